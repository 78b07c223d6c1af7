#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "probe/core.hpp"
#include "probe/mining.hpp"
#include "probe/oracles.hpp"
#include "probe/search.hpp"

namespace probe::synth {

/// Questions carry their point coordinates so the synthetic embedder can
/// recover them without any model call.
std::string point_question(const std::vector<double>& point);
std::optional<std::vector<double>> parse_point(const std::string& question);

/// Deterministic hash-to-vector fallback for text without coordinates.
std::vector<double> hash_embedding(const std::string& text, int dimension,
                                   std::uint64_t seed);

struct SyntheticProposerConfig {
    double micro_radius = 0.1;  // perturbation ball around the anchor
};

/// Macro: uniform point in the unit box. Micro: uniform point in the ball
/// around the anchor's point. Owns its rng stream for replay determinism.
class SyntheticProposer : public search::CaseProposer {
  public:
    SyntheticProposer(int dimension, SyntheticProposerConfig cfg,
                      std::uint64_t rng_seed);
    core::TestCase propose(search::Regime regime,
                           const core::EvaluatedCase* anchor,
                           const search::SearchState& state) override;

    std::string rng_state() const;
    void restore_rng_state(const std::string& s);

  private:
    int dimension_;
    SyntheticProposerConfig cfg_;
    std::mt19937_64 rng_;
};

/// Bernoulli verdicts drawn from the planted field.
class SyntheticOracle : public search::CaseOracle {
  public:
    SyntheticOracle(oracle::SyntheticField field, std::uint64_t rng_seed);
    core::EvaluatedCase evaluate(const core::TestCase& tc) override;
    const oracle::SyntheticField& field() const { return field_; }

    std::string rng_state() const;
    void restore_rng_state(const std::string& s);

  private:
    oracle::SyntheticField field_;
    std::mt19937_64 rng_;
};

/// Parses coordinates out of the question when present, otherwise hashes.
class SyntheticEmbedder : public mine::EmbedderClient {
  public:
    explicit SyntheticEmbedder(int dimension, std::uint64_t seed = 17);
    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override;

  private:
    int dimension_;
    std::uint64_t seed_;
};

/// Deterministic one-line summaries; no LLM involved.
class TemplateInducer : public mine::InducerClient {
  public:
    std::string induce(const std::string& prompt) override;
};

std::string serialize_rng(const std::mt19937_64& rng);
void deserialize_rng(std::mt19937_64& rng, const std::string& s);

}  // namespace probe::synth
