#include "probe/runner.hpp"

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "probe/generation.hpp"
#include "probe/live.hpp"
#include "probe/synthetic.hpp"

namespace probe::run {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json endpoint_to_json(const oracle::ModelEndpoint& e) {
    json j{{"base_url", e.base_url},
           {"model_name", e.model_name},
           {"api_key_env", e.api_key_env},
           {"timeout_seconds", e.timeout_seconds},
           {"max_retries", e.max_retries}};
    if (e.pricing)
        j["pricing"] = {{"input_per_1k", e.pricing->input_per_1k},
                        {"output_per_1k", e.pricing->output_per_1k}};
    return j;
}

oracle::ModelEndpoint endpoint_from_json(const json& j, oracle::Role role) {
    oracle::ModelEndpoint e;
    e.role = role;
    e.base_url = j.at("base_url").get<std::string>();
    e.model_name = j.value("model_name", "");
    e.api_key_env = j.value("api_key_env", "");
    e.timeout_seconds = j.value("timeout_seconds", 60);
    e.max_retries = j.value("max_retries", 2);
    if (j.contains("pricing")) {
        oracle::Pricing p;
        p.input_per_1k = j["pricing"].value("input_per_1k", 0.0);
        p.output_per_1k = j["pricing"].value("output_per_1k", 0.0);
        if (p.input_per_1k < 0.0 || p.output_per_1k < 0.0)
            throw ValidationError("pricing must be non-negative");
        e.pricing = p;
    }
    return e;
}

std::string metric_name(mine::Metric m) {
    return m == mine::Metric::euclidean ? "euclidean" : "cosine";
}

}  // namespace

json RunConfig::to_json() const {
    json j;
    j["benchmark"] = benchmark;
    j["output_dir"] = output_dir.string();
    j["checkpoint_interval"] = checkpoint_interval;
    j["search"] = {{"beta", search.beta},
                   {"max_width", search.max_width},
                   {"max_depth", search.max_depth},
                   {"max_simulations", search.max_simulations},
                   {"failure_budget", search.failure_budget},
                   {"seed_failures", search.seed_failures},
                   {"rng_seed", search.rng_seed},
                   {"consecutive_error_cap", search.consecutive_error_cap}};
    j["clustering"] = {{"min_cluster_size", clustering.min_cluster_size},
                       {"min_samples", clustering.min_samples},
                       {"metric", metric_name(clustering.metric)},
                       {"rng_seed", clustering.rng_seed}};
    j["mining"] = {{"n_c", mining.n_c},
                   {"b", mining.b},
                   {"tau", mining.tau},
                   {"frontier_k", mining.frontier_k},
                   {"frontier_refresh", mining.frontier_refresh}};
    j["utility"] = {{"per_mode_cap", utility.per_mode_cap}};
    j["pricing"] = {{"model_per_1k", pricing.model_per_1k},
                    {"judge_per_1k", pricing.judge_per_1k},
                    {"tool_per_1k", pricing.tool_per_1k}};
    if (seed_file) j["seeds"] = {{"file", seed_file->string()}};
    if (!inline_seeds.empty()) {
        json arr = json::array();
        for (const auto& s : inline_seeds)
            arr.push_back(json{{"question", s.question},
                               {"reference_answer", s.reference_answer},
                               {"topic_hint", s.topic_hint}});
        j["seeds"] = {{"inline", arr}};
    }
    if (synthetic_seed_count > 0)
        j["seeds"] = {{"synthetic_count", synthetic_seed_count}};
    j["synthetic"] = synthetic;
    if (synthetic_params) {
        j["synthetic_field"] = synthetic_params->field.to_json();
        j["micro_radius"] = synthetic_params->micro_radius;
    }
    json endpoints = json::object();
    if (target) endpoints["target"] = endpoint_to_json(*target);
    if (generator) endpoints["generator"] = endpoint_to_json(*generator);
    if (judge) endpoints["judge"] = endpoint_to_json(*judge);
    if (embedder) endpoints["embedder"] = endpoint_to_json(*embedder);
    if (explainer) endpoints["explainer"] = endpoint_to_json(*explainer);
    j["endpoints"] = endpoints;
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig cfg;
    cfg.benchmark = j.value("benchmark", "run");
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.checkpoint_interval = j.value("checkpoint_interval", 10L);
    if (j.contains("search")) {
        const auto& s = j["search"];
        cfg.search.beta = s.value("beta", 1.0);
        cfg.search.max_width = s.value("max_width", 5);
        cfg.search.max_depth = s.value("max_depth", 4);
        cfg.search.max_simulations = s.value("max_simulations", 100L);
        cfg.search.failure_budget = s.value("failure_budget", 50L);
        cfg.search.seed_failures = s.value("seed_failures", 5);
        cfg.search.rng_seed = s.value("rng_seed", std::uint64_t{0});
        cfg.search.consecutive_error_cap = s.value("consecutive_error_cap", 10);
    }
    if (j.contains("clustering")) {
        const auto& c = j["clustering"];
        cfg.clustering.min_cluster_size = c.value("min_cluster_size", 5);
        cfg.clustering.min_samples = c.value("min_samples", 3);
        cfg.clustering.metric = c.value("metric", std::string("euclidean")) ==
                                        "cosine"
                                    ? mine::Metric::cosine
                                    : mine::Metric::euclidean;
        cfg.clustering.rng_seed = c.value("rng_seed", std::uint64_t{0});
    }
    if (j.contains("mining")) {
        const auto& m = j["mining"];
        cfg.mining.n_c = m.value("n_c", 3);
        cfg.mining.b = m.value("b", 3);
        cfg.mining.tau = m.value("tau", 6);
        cfg.mining.frontier_k = m.value("frontier_k", 8);
        cfg.mining.frontier_refresh = m.value("frontier_refresh", 10);
    }
    if (j.contains("utility"))
        cfg.utility.per_mode_cap = j["utility"].value("per_mode_cap", 3);
    if (j.contains("pricing")) {
        cfg.pricing.model_per_1k = j["pricing"].value("model_per_1k", 0.0);
        cfg.pricing.judge_per_1k = j["pricing"].value("judge_per_1k", 0.0);
        cfg.pricing.tool_per_1k = j["pricing"].value("tool_per_1k", 0.0);
    }
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        if (s.contains("file")) cfg.seed_file = s["file"].get<std::string>();
        if (s.contains("inline"))
            for (const auto& item : s["inline"])
                cfg.inline_seeds.push_back(core::TestCase::make(
                    item.at("question").get<std::string>(),
                    item.at("reference_answer").get<std::string>(),
                    item.value("topic_hint", ""), core::Origin::seed));
        if (s.contains("synthetic_count"))
            cfg.synthetic_seed_count = s["synthetic_count"].get<int>();
    }
    cfg.synthetic = j.value("synthetic", false);
    if (j.contains("synthetic_field")) {
        SyntheticParams p;
        p.field = oracle::SyntheticField::from_json(j["synthetic_field"]);
        p.micro_radius = j.value("micro_radius", 0.1);
        cfg.synthetic_params = p;
    }
    if (j.contains("endpoints")) {
        const auto& e = j["endpoints"];
        if (e.contains("target"))
            cfg.target = endpoint_from_json(e["target"], oracle::Role::target);
        if (e.contains("generator"))
            cfg.generator =
                endpoint_from_json(e["generator"], oracle::Role::generator);
        if (e.contains("judge"))
            cfg.judge = endpoint_from_json(e["judge"], oracle::Role::judge);
        if (e.contains("embedder"))
            cfg.embedder =
                endpoint_from_json(e["embedder"], oracle::Role::embedder);
        if (e.contains("explainer"))
            cfg.explainer =
                endpoint_from_json(e["explainer"], oracle::Role::explainer);
    }
    return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config file not found: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("config parse error: ") + ex.what());
    }
    return from_json(j);
}

std::string RunConfig::reproducibility_hash() const {
    json j = to_json();
    j.erase("output_dir");
    return core::content_hash(j.dump());
}

void RunConfig::validate() const {
    if (search.beta <= 0.0) throw ValidationError("beta must be positive");
    if (search.max_width < 1) throw ValidationError("max_width must be >= 1");
    if (search.max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (search.max_simulations < 0)
        throw ValidationError("max_simulations must be >= 0");
    if (clustering.min_cluster_size < 2)
        throw ValidationError("min_cluster_size must be >= 2");
    if (utility.per_mode_cap < 1)
        throw ValidationError("per_mode_cap must be >= 1");
    if (synthetic) {
        if (!synthetic_params)
            throw ValidationError("synthetic run requires a synthetic_field");
        if (target || generator || judge || embedder)
            throw ValidationError(
                "synthetic run must not configure live endpoints");
        for (const auto& m : synthetic_params->field.modes) {
            if (m.radius <= 0.0)
                throw ValidationError("planted mode radius must be positive");
            if (m.p_inside <= synthetic_params->field.p_background)
                throw ValidationError("p_inside must exceed p_background");
        }
    } else {
        if (!target || !generator || !judge || !embedder)
            throw ValidationError(
                "live run requires target, generator, judge and embedder "
                "endpoints");
        for (const auto* e : {&*target, &*generator, &*judge, &*embedder}) {
            if (e->base_url.empty() || e->base_url.find("://") == std::string::npos)
                throw ValidationError("endpoint base_url invalid: " + e->base_url);
        }
    }
    int seed_sources = (seed_file ? 1 : 0) + (inline_seeds.empty() ? 0 : 1) +
                       (synthetic_seed_count > 0 ? 1 : 0);
    if (seed_sources != 1)
        throw ValidationError("exactly one seed source must be configured");
    if (synthetic_seed_count > 0 && !synthetic)
        throw ValidationError("synthetic seeds require a synthetic run");
    if (seed_file && !fs::exists(*seed_file))
        throw ValidationError("seed file not found: " + seed_file->string());
}

std::vector<core::TestCase> load_seeds(const fs::path& source) {
    std::ifstream in(source);
    if (!in) throw ValidationError("seed source not found: " + source.string());
    std::vector<core::TestCase> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& ex) {
            throw ValidationError("seed parse error at line " +
                                  std::to_string(line_no) + ": " + ex.what());
        }
        if (!j.contains("question") || !j.contains("reference_answer"))
            throw ValidationError(
                "seed parse error at line " + std::to_string(line_no) +
                ": question and reference_answer are required");
        out.push_back(core::TestCase::make(j["question"].get<std::string>(),
                                           j["reference_answer"].get<std::string>(),
                                           j.value("topic_hint", ""),
                                           core::Origin::seed));
    }
    if (out.empty())
        throw ValidationError("seed source is empty: " + source.string());
    return out;
}

std::vector<core::TestCase> synthetic_seed_cases(const oracle::SyntheticField& field,
                                                 int count,
                                                 std::uint64_t rng_seed) {
    std::vector<core::TestCase> out;
    std::mt19937_64 rng(rng_seed ^ 0x5eedf00dull);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        std::vector<double> point(static_cast<std::size_t>(field.dimension));
        if (i < static_cast<int>(field.modes.size())) {
            point = field.modes[static_cast<std::size_t>(i)].center;
        } else {
            for (auto& v : point) v = unit(rng);
        }
        out.push_back(core::TestCase::make(synth::point_question(point), "pass",
                                           "synthetic-seed", core::Origin::seed));
    }
    return out;
}

// ---------------------------------------------------------------------------

json Checkpoint::to_json() const {
    return json{{"version", version},
                {"config_hash", config_hash},
                {"stage", stage},
                {"state", state.to_json()},
                {"ledger", ledger.to_json()},
                {"proposer_rng", proposer_rng},
                {"oracle_rng", oracle_rng}};
}

Checkpoint Checkpoint::from_json(const json& j) {
    Checkpoint c;
    c.version = j.at("version").get<std::string>();
    c.config_hash = j.at("config_hash").get<std::string>();
    c.stage = j.at("stage").get<std::string>();
    c.state = search::SearchState::from_json(j.at("state"));
    c.ledger = stats::RunLedger::from_json(j.at("ledger"));
    c.proposer_rng = j.value("proposer_rng", "");
    c.oracle_rng = j.value("oracle_rng", "");
    return c;
}

Checkpoint Checkpoint::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ResumeError("checkpoint not found: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw ResumeError(std::string("corrupt checkpoint: ") + ex.what());
    }
    try {
        return from_json(j);
    } catch (const std::exception& ex) {
        throw ResumeError(std::string("corrupt checkpoint: ") + ex.what());
    }
}

void Checkpoint::save(const fs::path& path) const {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << to_json().dump(2) << "\n";
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------

namespace {

struct Components {
    std::unique_ptr<search::CaseProposer> proposer;
    std::unique_ptr<search::CaseOracle> oracle;
    std::shared_ptr<mine::EmbedderClient> embedder;
    std::unique_ptr<mine::ExplainerClient> explainer;  // may stay null
    std::unique_ptr<mine::InducerClient> inducer;
    std::shared_ptr<live::TokenTally> tally;
};

Components build_components(const RunConfig& cfg) {
    Components c;
    c.tally = std::make_shared<live::TokenTally>();
    if (cfg.synthetic) {
        const auto& p = *cfg.synthetic_params;
        synth::SyntheticProposerConfig pc;
        pc.micro_radius = p.micro_radius;
        c.proposer = std::make_unique<synth::SyntheticProposer>(
            p.field.dimension, pc, cfg.search.rng_seed);
        c.oracle = std::make_unique<synth::SyntheticOracle>(
            p.field, cfg.search.rng_seed ^ 0x0a11ce5ull);
        c.embedder = std::make_shared<synth::SyntheticEmbedder>(p.field.dimension);
        c.inducer = std::make_unique<synth::TemplateInducer>();
        return c;
    }
    auto target_backend = std::make_shared<oracle::HttpChatClient>(*cfg.target);
    auto judge_backend = std::make_shared<oracle::HttpChatClient>(*cfg.judge);
    auto gen_backend = std::make_shared<oracle::HttpChatClient>(*cfg.generator);
    c.oracle = std::make_unique<live::LiveOracle>(
        target_backend, *cfg.target, judge_backend, *cfg.judge, c.tally);
    auto tools = std::make_shared<gen::ToolRegistry>();
    tools->register_tool(gen::code_tool_spec(),
                         gen::make_code_handler(gen::local_subprocess_executor()));
    tools->register_tool(gen::retrieval_tool_spec(),
                         gen::make_retrieval_handler({}));
    auto generator_client =
        std::make_shared<live::ChatGeneratorClient>(gen_backend, c.tally);
    c.embedder = std::make_shared<live::HttpEmbedder>(*cfg.embedder);
    live::LiveProposerConfig lp;
    lp.frontier_k = cfg.mining.frontier_k;
    lp.frontier_refresh = cfg.mining.frontier_refresh;
    lp.rng_seed = cfg.search.rng_seed;
    c.proposer = std::make_unique<live::LiveProposer>(generator_client, tools,
                                                      c.embedder, lp, c.tally);
    if (cfg.explainer)
        c.explainer = std::make_unique<live::ChatExplainer>(
            std::make_shared<oracle::HttpChatClient>(*cfg.explainer));
    c.inducer = std::make_unique<live::ChatInducer>(gen_backend);
    return c;
}

std::vector<core::TestCase> resolve_seeds(const RunConfig& cfg) {
    if (cfg.seed_file) return load_seeds(*cfg.seed_file);
    if (!cfg.inline_seeds.empty()) return cfg.inline_seeds;
    return synthetic_seed_cases(cfg.synthetic_params->field,
                                cfg.synthetic_seed_count, cfg.search.rng_seed);
}

void drain_tally(Components& c, stats::RunLedger& ledger,
                 const std::string& benchmark, const std::string& regime) {
    stats::LedgerRecord rec;
    rec.benchmark = benchmark;
    rec.regime = regime;
    rec.model_in_tokens = c.tally->model_in;
    rec.model_out_tokens = c.tally->model_out;
    rec.judge_tokens = c.tally->judge;
    rec.tool_q_tokens = c.tally->tool_q;
    rec.tool_a_tokens = c.tally->tool_a;
    rec.estimated = c.tally->estimated;
    ledger.records.push_back(rec);
    c.tally->reset();
}

std::string proposer_rng_state(const Components& c) {
    if (auto* p = dynamic_cast<synth::SyntheticProposer*>(c.proposer.get()))
        return p->rng_state();
    return "";
}
std::string oracle_rng_state(const Components& c) {
    if (auto* o = dynamic_cast<synth::SyntheticOracle*>(c.oracle.get()))
        return o->rng_state();
    return "";
}
void restore_rng(Components& c, const Checkpoint& ck) {
    if (auto* p = dynamic_cast<synth::SyntheticProposer*>(c.proposer.get()))
        if (!ck.proposer_rng.empty()) p->restore_rng_state(ck.proposer_rng);
    if (auto* o = dynamic_cast<synth::SyntheticOracle*>(c.oracle.get()))
        if (!ck.oracle_rng.empty()) o->restore_rng_state(ck.oracle_rng);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

void save_checkpoint(const RunConfig& cfg, Components& c,
                     const search::SearchState& state,
                     const stats::RunLedger& ledger, const std::string& stage) {
    Checkpoint ck;
    ck.config_hash = cfg.reproducibility_hash();
    ck.stage = stage;
    ck.state = state;
    ck.ledger = ledger;
    ck.proposer_rng = proposer_rng_state(c);
    ck.oracle_rng = oracle_rng_state(c);
    ck.save(cfg.output_dir / "checkpoint.json");
}

struct LockGuard {
    fs::path path;
    bool held = false;
    explicit LockGuard(const fs::path& dir) : path(dir / ".lock") {
        if (fs::exists(path))
            throw ValidationError("output directory is locked by another run: " +
                                  path.string());
        std::ofstream out(path);
        out << "locked\n";
        held = true;
    }
    ~LockGuard() {
        if (held) {
            std::error_code ec;
            fs::remove(path, ec);
        }
    }
};

std::vector<core::EvaluatedCase> collect_non_failures(
    const search::SearchState& state) {
    std::vector<core::EvaluatedCase> out;
    std::set<std::string> seen;
    for (const auto* tree : {&state.macro_tree, &state.micro_tree}) {
        for (const auto& node : tree->nodes()) {
            if (!node.evaluated || node.evaluated->fail != 0) continue;
            if (!seen.insert(node.evaluated->test_case.id).second) continue;
            out.push_back(*node.evaluated);
        }
    }
    return out;
}

PipelineResult mine_and_report(const RunConfig& cfg, Components& c,
                               const search::SearchState& state,
                               const stats::RunLedger& ledger) {
    const fs::path& out = cfg.output_dir;

    // Pool artifact.
    {
        std::ostringstream os;
        for (const auto& e : state.pool.entries())
            os << core::to_jsonl_line(e) << "\n";
        write_file(out / "pool.jsonl", os.str());
    }
    write_file(out / "history.json", core::to_json(state.history).dump(2) + "\n");

    mine::ClusterAssignment assignment;
    std::vector<mine::FailureEmbedding> embeddings;
    std::vector<mine::FailureMode> modes;

    if (!state.pool.entries().empty()) {
        embeddings = mine::embed_failures(state.pool.entries(), *c.embedder,
                                          c.explainer.get());
        assignment = mine::cluster_failures(embeddings, cfg.clustering);

        // Embeddings sidecar for external visualization.
        std::ostringstream os;
        for (const auto& e : embeddings)
            os << json{{"case_id", e.case_id}, {"vector", e.vector}}.dump() << "\n";
        write_file(out / "embeddings.jsonl", os.str());

        auto non_failure_cases = collect_non_failures(state);
        std::vector<mine::NonFailurePoint> contrast_points;
        std::map<std::string, core::EvaluatedCase> non_failure_map;
        if (!non_failure_cases.empty()) {
            std::vector<std::string> texts;
            for (const auto& ec : non_failure_cases)
                texts.push_back(ec.test_case.question);
            auto vecs = c.embedder->embed(texts);
            for (std::size_t i = 0; i < non_failure_cases.size(); ++i) {
                contrast_points.push_back(mine::NonFailurePoint{
                    non_failure_cases[i].test_case.id, vecs[i]});
                non_failure_map[non_failure_cases[i].test_case.id] =
                    non_failure_cases[i];
            }
        }
        std::map<std::string, core::EvaluatedCase> failure_map;
        for (const auto& e : state.pool.entries())
            failure_map[e.ec.test_case.id] = e.ec;

        for (int k = 0; k < assignment.k; ++k) {
            auto evidence =
                mine::select_evidence(assignment, embeddings, k, contrast_points,
                                      cfg.mining.n_c, cfg.mining.b, cfg.mining.tau);
            modes.push_back(mine::induce_mode(evidence, assignment, failure_map,
                                              non_failure_map, *c.inducer));
        }
    }

    write_file(out / "assignment.json", assignment.to_json().dump(2) + "\n");
    {
        json jm = json::array();
        for (const auto& m : modes) jm.push_back(mine::to_json(m));
        write_file(out / "modes.json", jm.dump(2) + "\n");
    }
    write_file(out / "ledger.json", ledger.to_json().dump(2) + "\n");

    stats::MetricReport metrics =
        stats::compute_metrics(state.history, assignment, cfg.utility);
    write_file(out / "report.json",
               stats::report_json(metrics, modes, ledger).dump(2) + "\n");
    write_file(out / "report.md", stats::report_markdown(metrics, modes, ledger));
    write_file(out / "costs.csv", stats::costs_csv(ledger));

    PipelineResult result;
    result.metrics = metrics;
    return result;
}

PipelineResult probing_and_onward(const RunConfig& cfg, Components& c,
                                  search::SearchState& state,
                                  stats::RunLedger& ledger,
                                  std::optional<long> interrupt_after) {
    long last_checkpoint = state.simulations_done;
    bool interrupted = false;
    auto on_step = [&](const search::SearchState& s) {
        std::string regime = s.history.steps.empty()
                                 ? "macro"
                                 : s.history.steps.back().regime;
        drain_tally(c, ledger, cfg.benchmark, regime);
        if (s.simulations_done - last_checkpoint >= cfg.checkpoint_interval) {
            save_checkpoint(cfg, c, s, ledger, "probing");
            last_checkpoint = s.simulations_done;
        }
        if (interrupt_after && s.simulations_done >= *interrupt_after)
            interrupted = true;
    };

    try {
        // Custom loop so the crash-injection hook can stop mid-run.
        int consecutive_errors = 0;
        while (state.simulations_done < cfg.search.max_simulations &&
               static_cast<long>(state.pool.size()) < cfg.search.failure_budget &&
               !interrupted) {
            auto outcome =
                search::run_simulation(state, cfg.search, *c.proposer, *c.oracle);
            consecutive_errors = outcome.expanded ? 0 : consecutive_errors + 1;
            if (consecutive_errors >= cfg.search.consecutive_error_cap)
                throw std::runtime_error(
                    "probing aborted: consecutive error cap reached");
            on_step(state);
        }
    } catch (const std::exception& ex) {
        save_checkpoint(cfg, c, state, ledger, "probing");
        PipelineResult r;
        r.code = ExitCode::runtime;
        r.message = ex.what();
        return r;
    }

    save_checkpoint(cfg, c, state, ledger, interrupted ? "probing" : "mining");
    if (interrupted) {
        PipelineResult r;
        r.code = ExitCode::runtime;
        r.message = "interrupted";
        return r;
    }

    PipelineResult result = mine_and_report(cfg, c, state, ledger);
    save_checkpoint(cfg, c, state, ledger, "done");
    return result;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg) {
    try {
        cfg.validate();
        fs::create_directories(cfg.output_dir);
        LockGuard lock(cfg.output_dir);
        write_file(cfg.output_dir / "config_snapshot.json",
                   cfg.to_json().dump(2) + "\n");
        Components c = build_components(cfg);
        auto seeds = resolve_seeds(cfg);
        search::SearchState state =
            search::initialize_from_seeds(seeds, cfg.search, *c.oracle);
        stats::RunLedger ledger;
        ledger.pricing = cfg.pricing;
        drain_tally(c, ledger, cfg.benchmark, "seed");
        save_checkpoint(cfg, c, state, ledger, "probing");
        return probing_and_onward(cfg, c, state, ledger, std::nullopt);
    } catch (const ValidationError& ex) {
        return PipelineResult{ExitCode::validation, ex.what(), {}};
    } catch (const std::exception& ex) {
        return PipelineResult{ExitCode::runtime, ex.what(), {}};
    }
}

PipelineResult run_pipeline_interrupted(const RunConfig& cfg,
                                        long interrupt_after) {
    try {
        cfg.validate();
        fs::create_directories(cfg.output_dir);
        LockGuard lock(cfg.output_dir);
        write_file(cfg.output_dir / "config_snapshot.json",
                   cfg.to_json().dump(2) + "\n");
        Components c = build_components(cfg);
        auto seeds = resolve_seeds(cfg);
        search::SearchState state =
            search::initialize_from_seeds(seeds, cfg.search, *c.oracle);
        stats::RunLedger ledger;
        ledger.pricing = cfg.pricing;
        drain_tally(c, ledger, cfg.benchmark, "seed");
        save_checkpoint(cfg, c, state, ledger, "probing");
        return probing_and_onward(cfg, c, state, ledger, interrupt_after);
    } catch (const ValidationError& ex) {
        return PipelineResult{ExitCode::validation, ex.what(), {}};
    } catch (const std::exception& ex) {
        return PipelineResult{ExitCode::runtime, ex.what(), {}};
    }
}

PipelineResult resume(const fs::path& checkpoint_path, const RunConfig& cfg) {
    try {
        cfg.validate();
        Checkpoint ck = Checkpoint::load(checkpoint_path);
        if (ck.version != kCheckpointVersion)
            throw ResumeError("checkpoint version mismatch: " + ck.version);
        if (ck.config_hash != cfg.reproducibility_hash())
            throw ResumeError(
                "config hash mismatch: the checkpoint was produced under a "
                "different configuration");
        fs::create_directories(cfg.output_dir);
        LockGuard lock(cfg.output_dir);
        Components c = build_components(cfg);
        restore_rng(c, ck);
        search::SearchState state = ck.state;
        stats::RunLedger ledger = ck.ledger;
        if (ck.stage == "probing")
            return probing_and_onward(cfg, c, state, ledger, std::nullopt);
        PipelineResult result = mine_and_report(cfg, c, state, ledger);
        save_checkpoint(cfg, c, state, ledger, "done");
        return result;
    } catch (const ResumeError& ex) {
        return PipelineResult{ExitCode::resume_refused, ex.what(), {}};
    } catch (const ValidationError& ex) {
        return PipelineResult{ExitCode::validation, ex.what(), {}};
    } catch (const std::exception& ex) {
        return PipelineResult{ExitCode::runtime, ex.what(), {}};
    }
}

PipelineResult run_mine(const RunConfig& cfg) {
    try {
        cfg.validate();
        Checkpoint ck = Checkpoint::load(cfg.output_dir / "checkpoint.json");
        Components c = build_components(cfg);
        LockGuard lock(cfg.output_dir);
        return mine_and_report(cfg, c, ck.state, ck.ledger);
    } catch (const ResumeError& ex) {
        return PipelineResult{ExitCode::resume_refused, ex.what(), {}};
    } catch (const ValidationError& ex) {
        return PipelineResult{ExitCode::validation, ex.what(), {}};
    } catch (const std::exception& ex) {
        return PipelineResult{ExitCode::runtime, ex.what(), {}};
    }
}

namespace {

std::vector<mine::FailureEmbedding> load_embeddings_sidecar(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("embeddings sidecar not found: " + path.string());
    std::vector<mine::FailureEmbedding> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        out.push_back(mine::FailureEmbedding{
            j.at("case_id").get<std::string>(),
            j.at("vector").get<std::vector<double>>(), ""});
    }
    return out;
}

}  // namespace

PipelineResult run_analyze(const RunConfig& cfg,
                           const std::optional<fs::path>& compare_dir) {
    try {
        Checkpoint ck = Checkpoint::load(cfg.output_dir / "checkpoint.json");
        std::ifstream in(cfg.output_dir / "assignment.json");
        if (!in) throw ValidationError("assignment.json not found; run mine first");
        json ja;
        in >> ja;
        auto assignment = mine::ClusterAssignment::from_json(ja);
        stats::MetricReport metrics =
            stats::compute_metrics(ck.state.history, assignment, cfg.utility);
        json out{{"metrics", stats::report_json(metrics, {}, ck.ledger)["metrics"]}};
        if (compare_dir) {
            auto ea = load_embeddings_sidecar(cfg.output_dir / "embeddings.jsonl");
            auto eb = load_embeddings_sidecar(*compare_dir / "embeddings.jsonl");
            stats::LabeledSet sa, sb;
            for (const auto& e : ea) {
                sa.ids.push_back(e.case_id);
                sa.embeddings.push_back(e.vector);
            }
            for (const auto& e : eb) {
                sb.ids.push_back(e.case_id);
                sb.embeddings.push_back(e.vector);
            }
            auto overlap = stats::overlap_analysis(sa, sb, cfg.clustering);
            out["overlap"] = {{"shared", overlap.shared},
                              {"a_only", overlap.a_only},
                              {"b_only", overlap.b_only}};
        }
        write_file(cfg.output_dir / "analysis.json", out.dump(2) + "\n");
        PipelineResult r;
        r.metrics = metrics;
        return r;
    } catch (const ResumeError& ex) {
        return PipelineResult{ExitCode::resume_refused, ex.what(), {}};
    } catch (const ValidationError& ex) {
        return PipelineResult{ExitCode::validation, ex.what(), {}};
    } catch (const std::exception& ex) {
        return PipelineResult{ExitCode::runtime, ex.what(), {}};
    }
}

SweepResult run_sweep_on_embeddings(const std::vector<mine::FailureEmbedding>& emb,
                                    mine::Metric metric) {
    const int sizes[] = {3, 6, 9, 12, 15};
    const int samples[] = {1, 3, 5, 7, 9};
    SweepResult out;
    std::vector<mine::ClusterAssignment> labelings;
    for (int mcs : sizes) {
        for (int ms : samples) {
            mine::ClusteringConfig cc;
            cc.min_cluster_size = mcs;
            cc.min_samples = ms;
            cc.metric = metric;
            auto assignment = mine::cluster_failures(emb, cc);
            SweepCell cell;
            cell.min_cluster_size = mcs;
            cell.min_samples = ms;
            cell.cluster_count = assignment.k;
            cell.noise_rate = stats::noise_rate(assignment);
            out.cells.push_back(cell);
            labelings.push_back(std::move(assignment));
        }
    }
    out.consistency = stats::coassignment_consistency(labelings);
    return out;
}

PipelineResult run_sweep(const RunConfig& cfg) {
    try {
        auto emb = load_embeddings_sidecar(cfg.output_dir / "embeddings.jsonl");
        if (emb.empty()) throw ValidationError("no embeddings to sweep over");
        SweepResult sweep = run_sweep_on_embeddings(emb, cfg.clustering.metric);
        json cells = json::array();
        for (const auto& c : sweep.cells)
            cells.push_back(json{{"min_cluster_size", c.min_cluster_size},
                                 {"min_samples", c.min_samples},
                                 {"cluster_count", c.cluster_count},
                                 {"noise_rate", c.noise_rate}});
        json out{{"cells", cells}};
        if (sweep.consistency)
            out["consistency"] = *sweep.consistency;
        else
            out["consistency"] = "no-pairs";
        write_file(cfg.output_dir / "sweep.json", out.dump(2) + "\n");
        return PipelineResult{};
    } catch (const ValidationError& ex) {
        return PipelineResult{ExitCode::validation, ex.what(), {}};
    } catch (const std::exception& ex) {
        return PipelineResult{ExitCode::runtime, ex.what(), {}};
    }
}

}  // namespace probe::run
