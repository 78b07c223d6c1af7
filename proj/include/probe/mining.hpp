#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/core.hpp"

namespace probe::mine {

struct FailureEmbedding {
    std::string case_id;
    std::vector<double> vector;
    std::string error_text;
};

class EmbedderClient {
  public:
    virtual ~EmbedderClient() = default;
    virtual std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) = 0;
};

class ExplainerClient {
  public:
    virtual ~ExplainerClient() = default;
    virtual std::string explain(const std::string& question,
                                const std::string& reference,
                                const std::string& output) = 0;
};

/// Mismatch description for a failure case. A null explainer selects the
/// deterministic template fallback.
std::string derive_error_text(const core::EvaluatedCase& ec,
                              ExplainerClient* explainer);

/// One embedding per pool entry, order preserved. The embedded string is
/// question ++ separator ++ error_text.
std::vector<FailureEmbedding> embed_failures(
    const std::vector<core::PoolEntry>& entries, EmbedderClient& embedder,
    ExplainerClient* explainer);

enum class Metric { euclidean, cosine };

struct ClusteringConfig {
    int min_cluster_size = 5;
    int min_samples = 3;
    Metric metric = Metric::euclidean;
    std::uint64_t rng_seed = 0;
};

constexpr int kNoise = -1;

struct ClusterAssignment {
    std::vector<std::string> case_ids;            // input order
    std::vector<int> labels;                      // 0..k-1, or kNoise
    int k = 0;
    std::vector<std::vector<double>> centroids;   // per-cluster mean

    std::vector<long> cluster_sizes() const;
    long noise_count() const;

    nlohmann::json to_json() const;
    static ClusterAssignment from_json(const nlohmann::json& j);
};

/// Density-based hierarchical clustering: mutual-reachability MST, condensed
/// tree under min_cluster_size, excess-of-mass cluster selection. Points in
/// no dense region are labeled noise. Deterministic given inputs and config.
ClusterAssignment cluster_failures(const std::vector<FailureEmbedding>& embeddings,
                                   const ClusteringConfig& cfg);

/// Same algorithm over bare vectors (used by overlap analysis and fixtures).
ClusterAssignment cluster_points(const std::vector<std::string>& ids,
                                 const std::vector<std::vector<double>>& points,
                                 const ClusteringConfig& cfg);

struct NonFailurePoint {
    std::string case_id;
    std::vector<double> vector;
};

struct EvidenceSet {
    int cluster = 0;
    std::vector<std::string> central;  // case ids, nearest to centroid
    std::vector<std::pair<std::string, std::string>> boundary;  // (failure, contrast)
    bool small_cluster_all = false;
    bool missing_contrasts = false;  // no verified non-failures were available
};

/// Central members are the n_c nearest to the centroid; boundary failures the
/// b farthest, each paired with its nearest verified non-failure. Clusters
/// smaller than tau take the all-members path.
EvidenceSet select_evidence(const ClusterAssignment& assignment,
                            const std::vector<FailureEmbedding>& embeddings,
                            int cluster,
                            const std::vector<NonFailurePoint>& non_failures,
                            int n_c, int b, int tau);

struct FailureMode {
    int cluster = 0;
    std::string description;
    EvidenceSet evidence;
    std::vector<std::string> member_ids;
};

class InducerClient {
  public:
    virtual ~InducerClient() = default;
    virtual std::string induce(const std::string& prompt) = 0;
};

/// The induction prompt must carry every contrast pair; small clusters list
/// all members with no contrast section.
std::string build_induction_prompt(
    const EvidenceSet& evidence,
    const std::map<std::string, core::EvaluatedCase>& failures,
    const std::map<std::string, core::EvaluatedCase>& non_failures);

FailureMode induce_mode(const EvidenceSet& evidence,
                        const ClusterAssignment& assignment,
                        const std::map<std::string, core::EvaluatedCase>& failures,
                        const std::map<std::string, core::EvaluatedCase>& non_failures,
                        InducerClient& inducer);

nlohmann::json to_json(const FailureMode& m);
FailureMode failure_mode_from_json(const nlohmann::json& j);

}  // namespace probe::mine
