#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/core.hpp"

namespace probe::oracle {

enum class Role { target, generator, judge, embedder, explainer };

struct Pricing {
    double input_per_1k = 0.0;
    double output_per_1k = 0.0;
};

struct ModelEndpoint {
    Role role = Role::target;
    std::string base_url;
    std::string model_name;
    std::string api_key_env;  // secret comes from this environment variable
    std::optional<Pricing> pricing;
    int timeout_seconds = 60;
    int max_retries = 2;  // transport retries, distinct from tool retries
};

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant" | "tool"
    std::string content;
};

struct ChatResult {
    std::string content;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool usage_reported = false;  // false => counts are the char/4 estimate
    int attempts = 1;
};

class TransportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Chat-completions-style backend. HttpChatClient talks to a live endpoint;
/// tests use scripted stubs.
class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual ChatResult complete(const std::vector<ChatMessage>& messages) = 0;
};

class HttpChatClient : public ChatBackend {
  public:
    explicit HttpChatClient(ModelEndpoint endpoint);
    ChatResult complete(const std::vector<ChatMessage>& messages) override;
    const ModelEndpoint& endpoint() const { return endpoint_; }

  private:
    ModelEndpoint endpoint_;
};

/// Estimate used when the provider omits a usage block: ceil(chars / 4).
long estimate_tokens(const std::string& text);

struct TargetReply {
    std::string text;
    ChatResult transport;
};

TargetReply query_target(ChatBackend& client, const ModelEndpoint& endpoint,
                         const core::TestCase& tc);

class JudgeUnparseable : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct JudgeResult {
    core::Verdict verdict;
    ChatResult transport;
};

/// Prompts the judge with (question, reference, output); the reply must lead
/// with a strict PASS/FAIL token. One reformat retry, then JudgeUnparseable.
JudgeResult verify(ChatBackend& client, const ModelEndpoint& endpoint,
                   const core::TestCase& tc, const std::string& output);

// ---------------------------------------------------------------------------
// Synthetic failure field (LLM-free validation harness)

struct PlantedMode {
    std::vector<double> center;
    double radius = 0.0;      // epsilon, closed ball
    double p_inside = 1.0;    // p_min
};

struct SyntheticField {
    int dimension = 2;
    std::vector<PlantedMode> modes;
    double p_background = 0.0;
    std::uint64_t rng_seed = 0;

    /// p_inside of the first containing closed ball, else p_background.
    double probability(const std::vector<double>& point) const;
    /// Index of the first containing ball, if any.
    std::optional<std::size_t> mode_index(const std::vector<double>& point) const;

    nlohmann::json to_json() const;
    static SyntheticField from_json(const nlohmann::json& j);
};

/// Bernoulli(P(point)) draw from the caller's stream. Returns the fail bit.
int synthetic_evaluate(const SyntheticField& field,
                       const std::vector<double>& point, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Theory bounds

/// P_succ >= 1 - (1 - p_min)^n
double mode_identification_bound(double p_min, long n);

/// 8 ln n / delta^2 + (1 + pi^2/3)
double ucb1_count_bound(double delta, long n);

// ---------------------------------------------------------------------------
// Flat-arm bandit harness

struct BanditFixture {
    std::vector<double> arm_means;  // mu_j in [0,1]
    long horizon = 0;

    double optimal() const;
    std::vector<double> gaps() const;  // delta_j = mu* - mu_j
};

struct BanditResult {
    std::vector<long> pulls;             // per arm
    std::vector<double> regret;          // cumulative pseudo-regret R_t, t=1..T
};

/// UCB selection over flat Bernoulli arms using the same score form as the
/// tree search (mean + beta * sqrt(ln max(1,t) / max(1,n_j))).
BanditResult simulate_bandit(const BanditFixture& fixture, double beta,
                             std::uint64_t rng_seed);

}  // namespace probe::oracle
