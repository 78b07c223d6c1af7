#pragma once

#include <memory>
#include <string>
#include <vector>

#include "probe/analytics.hpp"
#include "probe/generation.hpp"
#include "probe/mining.hpp"
#include "probe/oracles.hpp"
#include "probe/search.hpp"

namespace probe::live {

/// Per-simulation token counters shared between the proposer, the oracle and
/// the pipeline, which drains them into the run ledger after each step.
struct TokenTally {
    double model_in = 0.0;
    double model_out = 0.0;
    double judge = 0.0;
    double tool_q = 0.0;
    double tool_a = 0.0;
    bool estimated = false;

    void reset() { *this = TokenTally{}; }
};

/// Target + judge behind the CaseOracle contract.
class LiveOracle : public search::CaseOracle {
  public:
    LiveOracle(std::shared_ptr<oracle::ChatBackend> target,
               oracle::ModelEndpoint target_endpoint,
               std::shared_ptr<oracle::ChatBackend> judge,
               oracle::ModelEndpoint judge_endpoint,
               std::shared_ptr<TokenTally> tally);
    core::EvaluatedCase evaluate(const core::TestCase& tc) override;

  private:
    std::shared_ptr<oracle::ChatBackend> target_;
    oracle::ModelEndpoint target_endpoint_;
    std::shared_ptr<oracle::ChatBackend> judge_;
    oracle::ModelEndpoint judge_endpoint_;
    std::shared_ptr<TokenTally> tally_;
};

/// Chat-backed generator client with token accounting.
class ChatGeneratorClient : public gen::GeneratorClient {
  public:
    ChatGeneratorClient(std::shared_ptr<oracle::ChatBackend> backend,
                        std::shared_ptr<TokenTally> tally);
    gen::GeneratorReply complete(
        const std::vector<std::pair<std::string, std::string>>& messages) override;

  private:
    std::shared_ptr<oracle::ChatBackend> backend_;
    std::shared_ptr<TokenTally> tally_;
};

struct LiveProposerConfig {
    int frontier_k = 8;
    int frontier_refresh = 10;  // recompute every N macro proposals
    std::uint64_t rng_seed = 0;
};

/// Tool-augmented proposal against the live generator; maintains the macro
/// frontier over the failure pool via the embedder.
class LiveProposer : public search::CaseProposer {
  public:
    LiveProposer(std::shared_ptr<gen::GeneratorClient> generator,
                 std::shared_ptr<gen::ToolRegistry> tools,
                 std::shared_ptr<mine::EmbedderClient> embedder,
                 LiveProposerConfig cfg, std::shared_ptr<TokenTally> tally);
    core::TestCase propose(search::Regime regime,
                           const core::EvaluatedCase* anchor,
                           const search::SearchState& state) override;

  private:
    std::shared_ptr<gen::GeneratorClient> generator_;
    std::shared_ptr<gen::ToolRegistry> tools_;
    std::shared_ptr<mine::EmbedderClient> embedder_;
    LiveProposerConfig cfg_;
    std::shared_ptr<TokenTally> tally_;
    std::optional<gen::FrontierSummary> frontier_;
    int macro_count_ = 0;
    std::size_t frontier_pool_size_ = 0;
};

/// Embeddings endpoint client (POST /v1/embeddings).
class HttpEmbedder : public mine::EmbedderClient {
  public:
    explicit HttpEmbedder(oracle::ModelEndpoint endpoint);
    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;

  private:
    oracle::ModelEndpoint endpoint_;
};

/// Chat-backed mismatch explainer.
class ChatExplainer : public mine::ExplainerClient {
  public:
    ChatExplainer(std::shared_ptr<oracle::ChatBackend> backend);
    std::string explain(const std::string& question, const std::string& reference,
                        const std::string& output) override;

  private:
    std::shared_ptr<oracle::ChatBackend> backend_;
};

/// Chat-backed mode inducer.
class ChatInducer : public mine::InducerClient {
  public:
    ChatInducer(std::shared_ptr<oracle::ChatBackend> backend);
    std::string induce(const std::string& prompt) override;

  private:
    std::shared_ptr<oracle::ChatBackend> backend_;
};

}  // namespace probe::live
