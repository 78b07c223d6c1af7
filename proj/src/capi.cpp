#include "probellm.h"

#include <cstdlib>
#include <new>
#include <string>

#include "probe/runner.hpp"

using probe::run::ExitCode;
using probe::run::PipelineResult;
using probe::run::RunConfig;

struct pl_engine {
    RunConfig config;
    std::string last_error;
    bool config_loaded = false;
};

namespace {

pl_status to_status(ExitCode code) { return static_cast<pl_status>(code); }

pl_status finish(pl_engine* e, const PipelineResult& r) {
    e->last_error = r.code == ExitCode::ok ? "" : r.message;
    return to_status(r.code);
}

pl_status fail(pl_engine* e, pl_status code, const std::string& msg) {
    e->last_error = msg;
    return code;
}

probe::oracle::SyntheticField default_field() {
    probe::oracle::SyntheticField field;
    field.dimension = 4;
    field.p_background = 0.02;
    for (int m = 0; m < 3; ++m) {
        probe::oracle::PlantedMode mode;
        mode.center.assign(4, 0.2 + 0.3 * m);
        mode.radius = 0.12;
        mode.p_inside = 0.85;
        field.modes.push_back(mode);
    }
    return field;
}

}  // namespace

extern "C" {

pl_engine* pl_engine_create(const char* config_path) {
    auto* e = new (std::nothrow) pl_engine();
    if (!e) return nullptr;
    if (!config_path) {
        e->last_error = "config path is null";
        return e;
    }
    try {
        e->config = RunConfig::load(config_path);
        e->config_loaded = true;
    } catch (const std::exception& ex) {
        e->last_error = ex.what();
    }
    return e;
}

void pl_engine_free(pl_engine* e) { delete e; }

const char* pl_last_error(const pl_engine* e) {
    return e ? e->last_error.c_str() : "null engine";
}

pl_status pl_engine_set_override(pl_engine* e, const char* key,
                                 const char* value) {
    if (!e) return PL_ERR_VALIDATION;
    if (!key || !value)
        return fail(e, PL_ERR_VALIDATION, "override key/value is null");
    std::string k = key, v = value;
    try {
        if (k == "output_dir") {
            e->config.output_dir = v;
        } else if (k == "seed_file") {
            e->config.seed_file = v;
            e->config.inline_seeds.clear();
            e->config.synthetic_seed_count = 0;
        } else if (k == "rng_seed") {
            e->config.search.rng_seed = std::stoull(v);
        } else if (k == "max_simulations") {
            e->config.search.max_simulations = std::stol(v);
        } else if (k == "benchmark") {
            e->config.benchmark = v;
        } else if (k == "synthetic") {
            e->config.synthetic = true;
            e->config.target.reset();
            e->config.generator.reset();
            e->config.judge.reset();
            e->config.embedder.reset();
            e->config.explainer.reset();
            if (!e->config.synthetic_params) {
                probe::run::SyntheticParams p;
                p.field = default_field();
                e->config.synthetic_params = p;
            }
            if (!e->config.seed_file && e->config.inline_seeds.empty() &&
                e->config.synthetic_seed_count == 0)
                e->config.synthetic_seed_count = 8;
            (void)v;
        } else {
            return fail(e, PL_ERR_VALIDATION, "unknown override key: " + k);
        }
    } catch (const std::exception& ex) {
        return fail(e, PL_ERR_VALIDATION,
                    "bad override value for " + k + ": " + ex.what());
    }
    e->last_error.clear();
    return PL_OK;
}

pl_status pl_engine_validate(pl_engine* e) {
    if (!e) return PL_ERR_VALIDATION;
    if (!e->config_loaded) return PL_ERR_VALIDATION;
    try {
        e->config.validate();
    } catch (const std::exception& ex) {
        return fail(e, PL_ERR_VALIDATION, ex.what());
    }
    e->last_error.clear();
    return PL_OK;
}

pl_status pl_engine_probe(pl_engine* e) {
    if (!e) return PL_ERR_VALIDATION;
    if (!e->config_loaded) return PL_ERR_VALIDATION;
    return finish(e, probe::run::run_pipeline(e->config));
}

pl_status pl_engine_probe_interrupted(pl_engine* e, long interrupt_after) {
    if (!e) return PL_ERR_VALIDATION;
    if (!e->config_loaded) return PL_ERR_VALIDATION;
    return finish(e,
                  probe::run::run_pipeline_interrupted(e->config, interrupt_after));
}

pl_status pl_engine_mine(pl_engine* e) {
    if (!e) return PL_ERR_VALIDATION;
    if (!e->config_loaded) return PL_ERR_VALIDATION;
    return finish(e, probe::run::run_mine(e->config));
}

pl_status pl_engine_analyze(pl_engine* e, const char* compare_dir) {
    if (!e) return PL_ERR_VALIDATION;
    if (!e->config_loaded) return PL_ERR_VALIDATION;
    std::optional<std::filesystem::path> cmp;
    if (compare_dir) cmp = std::filesystem::path(compare_dir);
    return finish(e, probe::run::run_analyze(e->config, cmp));
}

pl_status pl_engine_sweep(pl_engine* e) {
    if (!e) return PL_ERR_VALIDATION;
    if (!e->config_loaded) return PL_ERR_VALIDATION;
    return finish(e, probe::run::run_sweep(e->config));
}

pl_status pl_engine_resume(pl_engine* e, const char* checkpoint_path) {
    if (!e) return PL_ERR_VALIDATION;
    if (!e->config_loaded) return PL_ERR_VALIDATION;
    if (!checkpoint_path)
        return fail(e, PL_ERR_VALIDATION, "checkpoint path is null");
    return finish(e, probe::run::resume(checkpoint_path, e->config));
}

}  // extern "C"
