#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/core.hpp"

namespace probe::search {

enum class Regime { macro, micro };

std::string regime_name(Regime r);

struct SearchNode {
    int id = 0;          // index within its tree
    int parent = -1;     // -1 for the regime root
    int depth = 0;       // root at 0
    std::optional<core::EvaluatedCase> evaluated;  // absent for roots
    long visits = 0;     // N
    long failures = 0;   // E
    std::vector<int> children;  // insertion order
};

class RegimeTree {
  public:
    explicit RegimeTree(Regime regime);
    RegimeTree() : RegimeTree(Regime::macro) {}

    Regime regime() const { return regime_; }
    const SearchNode& at(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    SearchNode& at(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
    const SearchNode& root() const { return nodes_.front(); }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<SearchNode>& nodes() const { return nodes_; }

    int add_child(int parent_id, core::EvaluatedCase ec);

    nlohmann::json to_json() const;
    static RegimeTree from_json(const nlohmann::json& j);

  private:
    Regime regime_;
    std::vector<SearchNode> nodes_;
};

struct SearchConfig {
    double beta = 1.0;          // exploration weight
    int max_width = 5;          // W_max
    int max_depth = 4;          // D, root at depth 0
    long max_simulations = 100; // T_max
    long failure_budget = 50;   // M
    int seed_failures = 5;      // n, stage-1 target
    std::uint64_t rng_seed = 0;
    int consecutive_error_cap = 10;
};

struct SearchState {
    RegimeTree macro_tree{Regime::macro};
    RegimeTree micro_tree{Regime::micro};
    core::ProbeHistory history;
    core::FailurePool pool;
    long simulations_done = 0;
    bool insufficient_seeds = false;

    RegimeTree& tree(Regime r) { return r == Regime::macro ? macro_tree : micro_tree; }
    const RegimeTree& tree(Regime r) const {
        return r == Regime::macro ? macro_tree : micro_tree;
    }

    nlohmann::json to_json() const;
    static SearchState from_json(const nlohmann::json& j);
};

double empirical_failure_rate(const SearchNode& node);

/// p_hat(v) + beta * sqrt(ln(max(1, N(u))) / max(1, N(v)))
double ucb_score(const SearchNode& child, const SearchNode& parent, double beta);

/// Argmax of ucb_score over children; ties broken by lower N, then insertion
/// order. Throws std::logic_error when parent has no children.
int select_child(const RegimeTree& tree, int parent_id, double beta);

/// Regime roots scored as children of a virtual global root whose N is the
/// sum of both roots' N. Macro wins exact ties via insertion order.
Regime select_regime(const SearchState& state, double beta);

/// Greedy UCB descent to the first node with spare width that can still hold
/// a child within the depth bound; saturated subtrees are backtracked out of
/// in UCB order. nullopt only when no expandable node exists in the tree.
std::optional<int> traverse_to_expandable(const RegimeTree& tree,
                                          const SearchConfig& cfg);

/// Increment (N, E+=fail) on the node and every ancestor up to the regime
/// root; bumps the global simulation counter.
void backup(SearchState& state, Regime regime, int node_id, int fail);

class GenerationExhausted : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Proposes the next test case for a node expansion. Implementations:
/// tool-augmented LLM generation, or the synthetic point sampler.
class CaseProposer {
  public:
    virtual ~CaseProposer() = default;
    /// anchor is null when expanding a bare root. Throws GenerationExhausted
    /// after the retry policy is spent.
    virtual core::TestCase propose(Regime regime,
                                   const core::EvaluatedCase* anchor,
                                   const SearchState& state) = 0;
};

/// Answers "did the target fail on this case?" — live target+judge, or the
/// synthetic failure field.
class CaseOracle {
  public:
    virtual ~CaseOracle() = default;
    virtual core::EvaluatedCase evaluate(const core::TestCase& tc) = 0;
};

struct SimulationOutcome {
    bool expanded = false;
    std::string skip_reason;            // set when !expanded
    std::optional<core::EvaluatedCase> evaluated;
    Regime regime = Regime::macro;
};

SimulationOutcome run_simulation(SearchState& state, const SearchConfig& cfg,
                                 CaseProposer& proposer, CaseOracle& oracle);

/// Loops run_simulation while t < T_max and |F| < M. Aborts after
/// consecutive_error_cap successive skipped steps.
void run_probing_loop(SearchState& state, const SearchConfig& cfg,
                      CaseProposer& proposer, CaseOracle& oracle,
                      const std::function<void(const SearchState&)>& on_step = {});

/// Stage 1: probe seeds in order until cfg.seed_failures failures are
/// collected; each failure becomes an N=0 seed node under both regime roots.
SearchState initialize_from_seeds(const std::vector<core::TestCase>& seeds,
                                  const SearchConfig& cfg, CaseOracle& oracle);

}  // namespace probe::search
