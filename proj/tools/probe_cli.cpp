// CLI front-end; links only against the C API.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "probellm.h"

namespace {

struct CommonOpts {
    std::string config;
    std::string seeds;
    std::string out;
    std::string resume_from;
    bool synthetic = false;
    long rng_seed = -1;
    long t_max = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
    auto* c = cmd->add_option("--config", o.config, "JSON run configuration");
    if (config_required) c->required();
    cmd->add_option("--seeds", o.seeds, "seed JSONL file (overrides config)");
    cmd->add_option("--out", o.out, "output directory (overrides config)");
    cmd->add_flag("--synthetic", o.synthetic,
                  "run against the synthetic failure field");
    cmd->add_option("--rng-seed", o.rng_seed, "search rng seed override");
    cmd->add_option("--t-max", o.t_max, "simulation budget override");
}

int apply_overrides(pl_engine* e, const CommonOpts& o) {
    if (o.synthetic && pl_engine_set_override(e, "synthetic", "default") != PL_OK)
        return 1;
    if (!o.seeds.empty() &&
        pl_engine_set_override(e, "seed_file", o.seeds.c_str()) != PL_OK)
        return 1;
    if (!o.out.empty() &&
        pl_engine_set_override(e, "output_dir", o.out.c_str()) != PL_OK)
        return 1;
    if (o.rng_seed >= 0 &&
        pl_engine_set_override(e, "rng_seed",
                               std::to_string(o.rng_seed).c_str()) != PL_OK)
        return 1;
    if (o.t_max >= 0 &&
        pl_engine_set_override(e, "max_simulations",
                               std::to_string(o.t_max).c_str()) != PL_OK)
        return 1;
    return 0;
}

int report(pl_engine* e, pl_status status, const char* verb) {
    if (status == PL_OK) {
        std::printf("%s: ok\n", verb);
    } else {
        std::fprintf(stderr, "%s: %s\n", verb, pl_last_error(e));
    }
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive failure-discovery engine"};
    app.require_subcommand(1);

    CommonOpts vo, po, mo, ao, ro;
    std::string compare_dir;
    bool sweep_flag = false;

    auto* validate = app.add_subcommand("validate", "check a configuration");
    add_common(validate, vo);

    auto* probe = app.add_subcommand("probe", "run the full discovery pipeline");
    add_common(probe, po);
    probe->add_option("--resume", po.resume_from,
                      "continue from this checkpoint file");

    auto* mine_cmd =
        app.add_subcommand("mine", "re-run clustering and induction");
    add_common(mine_cmd, mo);
    mine_cmd->add_flag("--sweep", sweep_flag,
                       "run the clustering sensitivity sweep instead");

    auto* analyze = app.add_subcommand("analyze", "recompute metrics");
    add_common(analyze, ao);
    analyze->add_option("--compare", compare_dir,
                        "second run directory for overlap analysis");

    auto* resume_cmd =
        app.add_subcommand("resume", "continue an interrupted run");
    add_common(resume_cmd, ro);
    resume_cmd->add_option("--resume", ro.resume_from, "checkpoint file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    const CommonOpts& o = validate->parsed()   ? vo
                          : probe->parsed()    ? po
                          : mine_cmd->parsed() ? mo
                          : analyze->parsed()  ? ao
                                               : ro;

    pl_engine* e = pl_engine_create(o.config.c_str());
    if (!e) {
        std::fprintf(stderr, "engine allocation failed\n");
        return static_cast<int>(PL_ERR_RUNTIME);
    }
    const char* load_err = pl_last_error(e);
    if (load_err && *load_err) {
        std::fprintf(stderr, "config: %s\n", load_err);
        pl_engine_free(e);
        return static_cast<int>(PL_ERR_VALIDATION);
    }
    if (apply_overrides(e, o) != 0) {
        std::fprintf(stderr, "override: %s\n", pl_last_error(e));
        pl_engine_free(e);
        return static_cast<int>(PL_ERR_VALIDATION);
    }

    int rc = 0;
    if (validate->parsed()) {
        rc = report(e, pl_engine_validate(e), "validate");
    } else if (probe->parsed()) {
        rc = po.resume_from.empty()
                 ? report(e, pl_engine_probe(e), "probe")
                 : report(e, pl_engine_resume(e, po.resume_from.c_str()),
                          "resume");
    } else if (mine_cmd->parsed()) {
        rc = sweep_flag ? report(e, pl_engine_sweep(e), "sweep")
                        : report(e, pl_engine_mine(e), "mine");
    } else if (analyze->parsed()) {
        rc = report(e,
                    pl_engine_analyze(
                        e, compare_dir.empty() ? nullptr : compare_dir.c_str()),
                    "analyze");
    } else if (resume_cmd->parsed()) {
        rc = report(e, pl_engine_resume(e, ro.resume_from.c_str()), "resume");
    }

    pl_engine_free(e);
    return rc;
}
