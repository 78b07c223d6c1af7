#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/analytics.hpp"
#include "probe/core.hpp"
#include "probe/mining.hpp"
#include "probe/oracles.hpp"
#include "probe/search.hpp"

namespace probe::run {

inline constexpr const char* kCheckpointVersion = "1";

enum class ExitCode : int {
    ok = 0,
    validation = 2,
    runtime = 3,
    resume_refused = 4,
};

class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};
class ResumeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct MiningParams {
    int n_c = 3;
    int b = 3;
    int tau = 6;
    int frontier_k = 8;
    int frontier_refresh = 10;
};

struct SyntheticParams {
    oracle::SyntheticField field;
    double micro_radius = 0.1;
};

struct RunConfig {
    std::string benchmark = "run";
    std::filesystem::path output_dir = "out";
    long checkpoint_interval = 10;

    search::SearchConfig search;
    mine::ClusteringConfig clustering;
    MiningParams mining;
    core::UtilityConfig utility;
    stats::PricingSnapshot pricing;

    // Seed source: a JSONL file, inline cases, or synthetic auto-seeding.
    std::optional<std::filesystem::path> seed_file;
    std::vector<core::TestCase> inline_seeds;
    int synthetic_seed_count = 0;

    bool synthetic = false;
    std::optional<SyntheticParams> synthetic_params;

    std::optional<oracle::ModelEndpoint> target;
    std::optional<oracle::ModelEndpoint> generator;
    std::optional<oracle::ModelEndpoint> judge;
    std::optional<oracle::ModelEndpoint> embedder;
    std::optional<oracle::ModelEndpoint> explainer;  // absent => template fallback

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);

    /// Hash over every reproducibility-relevant field (output_dir excluded).
    std::string reproducibility_hash() const;

    /// Throws ValidationError on inconsistent or unresolvable settings.
    void validate() const;
};

/// Parses JSONL {question, reference_answer, topic_hint?} records into
/// origin=seed cases; parse errors name the line.
std::vector<core::TestCase> load_seeds(const std::filesystem::path& source);

std::vector<core::TestCase> synthetic_seed_cases(const oracle::SyntheticField& field,
                                                 int count, std::uint64_t rng_seed);

struct Checkpoint {
    std::string version = kCheckpointVersion;
    std::string config_hash;
    std::string stage;  // "probing" | "mining" | "done"
    search::SearchState state;
    stats::RunLedger ledger;
    std::string proposer_rng;
    std::string oracle_rng;

    nlohmann::json to_json() const;
    static Checkpoint from_json(const nlohmann::json& j);
    static Checkpoint load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct PipelineResult {
    ExitCode code = ExitCode::ok;
    std::string message;
    stats::MetricReport metrics;
};

/// Stage 1 through 4 plus report emission. All artifacts land under
/// cfg.output_dir.
PipelineResult run_pipeline(const RunConfig& cfg);

/// Crash-injection variant: stops (with a fresh checkpoint and a nonzero
/// status) once simulations_done reaches interrupt_after.
PipelineResult run_pipeline_interrupted(const RunConfig& cfg,
                                        long interrupt_after);

/// Continue an interrupted run from its checkpoint. Refuses on config-hash
/// or version mismatch.
PipelineResult resume(const std::filesystem::path& checkpoint_path,
                      const RunConfig& cfg);

/// Stages 3-4 + report over an existing checkpoint (re-clusterable without
/// re-probing).
PipelineResult run_mine(const RunConfig& cfg);

/// Metrics recomputation over existing artifacts; optional overlap against a
/// second run's embeddings sidecar.
PipelineResult run_analyze(const RunConfig& cfg,
                           const std::optional<std::filesystem::path>& compare_dir);

struct SweepCell {
    int min_cluster_size = 0;
    int min_samples = 0;
    int cluster_count = 0;
    double noise_rate = 0.0;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::optional<double> consistency;  // nullopt = no pair ever co-clustered
};

/// The clustering sensitivity grid: min_cluster_size {3,6,9,12,15} x
/// min_samples {1,3,5,7,9}, with the co-assignment consistency score.
SweepResult run_sweep_on_embeddings(const std::vector<mine::FailureEmbedding>& emb,
                                    mine::Metric metric);
PipelineResult run_sweep(const RunConfig& cfg);

}  // namespace probe::run
