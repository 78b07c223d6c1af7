#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/core.hpp"
#include "probe/mining.hpp"

namespace probe::stats {

struct LedgerRecord {
    std::string benchmark;
    std::string regime;  // "macro" | "micro" | "seed"
    double model_in_tokens = 0.0;
    double model_out_tokens = 0.0;
    double judge_tokens = 0.0;
    double tool_q_tokens = 0.0;
    double tool_a_tokens = 0.0;
    bool estimated = false;  // no provider usage block, char/4 heuristic
};

struct PricingSnapshot {
    double model_per_1k = 0.0;
    double judge_per_1k = 0.0;
    double tool_per_1k = 0.0;
};

struct RunLedger {
    std::vector<LedgerRecord> records;
    PricingSnapshot pricing;

    nlohmann::json to_json() const;
    static RunLedger from_json(const nlohmann::json& j);
};

struct MetricReport {
    double error_rate = 0.0;
    double noise_rate = 0.0;
    double cluster_size_std = 0.0;
    double macro_fraction = 0.0;
    double micro_fraction = 0.0;
    int cluster_count = 0;
    double avg_cluster_size = 0.0;
    long failure_count = 0;
    long simulations = 0;
    long utility = 0;
};

/// fails / total over non-skipped steps; 0 on empty history.
double error_rate(const core::ProbeHistory& history);

double noise_rate(const mine::ClusterAssignment& assignment);

/// Population standard deviation over non-noise cluster sizes.
double cluster_size_std(const mine::ClusterAssignment& assignment);

/// Mean of per-pair co-assignment rates over pairs that co-cluster under at
/// least one configuration. nullopt when no pair ever co-clusters.
std::optional<double> coassignment_consistency(
    const std::vector<mine::ClusterAssignment>& labelings);

struct OverlapResult {
    int shared = 0;
    int a_only = 0;
    int b_only = 0;
    mine::ClusterAssignment combined;
    std::vector<std::string> sources;  // "a"/"b" per combined case, subsampled
};

struct LabeledSet {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> embeddings;
};

/// Subsamples the larger set to equal size (seeded), clusters the union, and
/// labels each cluster shared / a-only / b-only by source membership.
OverlapResult overlap_analysis(const LabeledSet& set_a, const LabeledSet& set_b,
                               const mine::ClusteringConfig& cfg);

struct CostRow {
    std::string group;  // benchmark or regime value
    double model_in_out = 0.0;
    double judge = 0.0;
    double tool_q = 0.0;
    double tool_a = 0.0;
    double total = 0.0;
    double dollars = 0.0;
    long count = 0;
};

enum class CostGroupBy { regime, benchmark };

std::vector<CostRow> cost_aggregate(const RunLedger& ledger, CostGroupBy group_by);

MetricReport compute_metrics(const core::ProbeHistory& history,
                             const mine::ClusterAssignment& assignment,
                             const core::UtilityConfig& utility_cfg);

/// Deterministic report with stable field ordering.
nlohmann::json report_json(const MetricReport& metrics,
                           const std::vector<mine::FailureMode>& modes,
                           const RunLedger& ledger);
std::string report_markdown(const MetricReport& metrics,
                            const std::vector<mine::FailureMode>& modes,
                            const RunLedger& ledger);
std::string costs_csv(const RunLedger& ledger);

}  // namespace probe::stats
