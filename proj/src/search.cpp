#include "probe/search.hpp"

#include <cmath>
#include <stdexcept>

namespace probe::search {

using nlohmann::json;

std::string regime_name(Regime r) {
    return r == Regime::macro ? "macro" : "micro";
}

RegimeTree::RegimeTree(Regime regime) : regime_(regime) {
    SearchNode root;
    root.id = 0;
    root.parent = -1;
    root.depth = 0;
    nodes_.push_back(std::move(root));
}

int RegimeTree::add_child(int parent_id, core::EvaluatedCase ec) {
    SearchNode& parent = at(parent_id);
    SearchNode node;
    node.id = static_cast<int>(nodes_.size());
    node.parent = parent_id;
    node.depth = parent.depth + 1;
    node.evaluated = std::move(ec);
    parent.children.push_back(node.id);
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

double empirical_failure_rate(const SearchNode& node) {
    return static_cast<double>(node.failures) /
           static_cast<double>(std::max<long>(1, node.visits));
}

double ucb_score(const SearchNode& child, const SearchNode& parent, double beta) {
    double bonus = beta * std::sqrt(
        std::log(static_cast<double>(std::max<long>(1, parent.visits))) /
        static_cast<double>(std::max<long>(1, child.visits)));
    return empirical_failure_rate(child) + bonus;
}

int select_child(const RegimeTree& tree, int parent_id, double beta) {
    const SearchNode& parent = tree.at(parent_id);
    if (parent.children.empty())
        throw std::logic_error("select_child: node has no children");
    int best = parent.children.front();
    double best_score = ucb_score(tree.at(best), parent, beta);
    for (std::size_t i = 1; i < parent.children.size(); ++i) {
        int cand = parent.children[i];
        double score = ucb_score(tree.at(cand), parent, beta);
        if (score > best_score ||
            (score == best_score && tree.at(cand).visits < tree.at(best).visits)) {
            best = cand;
            best_score = score;
        }
    }
    return best;
}

Regime select_regime(const SearchState& state, double beta) {
    SearchNode virtual_root;
    virtual_root.visits =
        state.macro_tree.root().visits + state.micro_tree.root().visits;
    double macro_score = ucb_score(state.macro_tree.root(), virtual_root, beta);
    double micro_score = ucb_score(state.micro_tree.root(), virtual_root, beta);
    if (micro_score > macro_score) return Regime::micro;
    if (micro_score == macro_score &&
        state.micro_tree.root().visits < state.macro_tree.root().visits)
        return Regime::micro;
    return Regime::macro;
}

namespace {

// Greedy descent that backtracks out of saturated subtrees: children are
// tried in UCB order and the first subtree holding an expandable node wins.
std::optional<int> descend(const RegimeTree& tree, int id,
                           const SearchConfig& cfg) {
    const SearchNode& node = tree.at(id);
    // Expansion attaches a child at node.depth + 1, which must stay within
    // max_depth.
    if (static_cast<int>(node.children.size()) < cfg.max_width &&
        node.depth < cfg.max_depth)
        return id;
    std::vector<int> order = node.children;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        double sa = ucb_score(tree.at(a), node, cfg.beta);
        double sb = ucb_score(tree.at(b), node, cfg.beta);
        if (sa != sb) return sa > sb;
        return tree.at(a).visits < tree.at(b).visits;
    });
    for (int child : order)
        if (auto found = descend(tree, child, cfg)) return found;
    return std::nullopt;
}

}  // namespace

std::optional<int> traverse_to_expandable(const RegimeTree& tree,
                                          const SearchConfig& cfg) {
    return descend(tree, 0, cfg);
}

void backup(SearchState& state, Regime regime, int node_id, int fail) {
    RegimeTree& tree = state.tree(regime);
    int current = node_id;
    while (current != -1) {
        SearchNode& node = tree.at(current);
        int expected_parent = node.parent;
        node.visits += 1;
        node.failures += fail;
        current = expected_parent;
    }
    state.simulations_done += 1;
}

namespace {

void append_history(SearchState& state, const std::string& case_id, int fail,
                    Regime regime, bool skipped, const std::string& reason) {
    core::ProbeStep step;
    step.case_id = case_id;
    step.fail = fail;
    step.regime = regime_name(regime);
    step.step = static_cast<std::uint64_t>(state.history.steps.size());
    step.skipped = skipped;
    step.skip_reason = reason;
    state.history.steps.push_back(std::move(step));
}

void record_skip(SearchState& state, Regime regime, const std::string& reason) {
    state.simulations_done += 1;
    append_history(state, "", 0, regime, true, reason);
}

}  // namespace

SimulationOutcome run_simulation(SearchState& state, const SearchConfig& cfg,
                                 CaseProposer& proposer, CaseOracle& oracle) {
    SimulationOutcome out;
    Regime regime = select_regime(state, cfg.beta);
    out.regime = regime;
    RegimeTree& tree = state.tree(regime);

    auto expandable = traverse_to_expandable(tree, cfg);
    if (!expandable) {
        out.skip_reason = "tree-saturated";
        record_skip(state, regime, out.skip_reason);
        return out;
    }
    int node_id = *expandable;

    const core::EvaluatedCase* anchor = nullptr;
    const SearchNode& node = tree.at(node_id);
    if (node.evaluated) {
        anchor = &*node.evaluated;
    } else if (!node.children.empty()) {
        // Root expansion: anchor on the UCB-preferred existing child.
        int child = select_child(tree, node_id, cfg.beta);
        if (tree.at(child).evaluated) anchor = &*tree.at(child).evaluated;
    }

    core::TestCase proposal;
    try {
        proposal = proposer.propose(regime, anchor, state);
    } catch (const GenerationExhausted& ex) {
        out.skip_reason = std::string("generation-exhausted: ") + ex.what();
        record_skip(state, regime, out.skip_reason);
        return out;
    }

    core::EvaluatedCase ec = oracle.evaluate(proposal);
    int child_id = tree.add_child(node_id, ec);
    backup(state, regime, child_id, ec.fail);
    if (ec.fail == 1) state.pool.insert(ec, regime_name(regime));
    append_history(state, ec.test_case.id, ec.fail, regime, false, "");

    out.expanded = true;
    out.evaluated = std::move(ec);
    return out;
}

void run_probing_loop(SearchState& state, const SearchConfig& cfg,
                      CaseProposer& proposer, CaseOracle& oracle,
                      const std::function<void(const SearchState&)>& on_step) {
    int consecutive_errors = 0;
    while (state.simulations_done < cfg.max_simulations &&
           static_cast<long>(state.pool.size()) < cfg.failure_budget) {
        try {
            SimulationOutcome out = run_simulation(state, cfg, proposer, oracle);
            if (out.expanded)
                consecutive_errors = 0;
            else
                ++consecutive_errors;
        } catch (const std::exception& ex) {
            ++consecutive_errors;
            if (consecutive_errors >= cfg.consecutive_error_cap) throw;
            record_skip(state, select_regime(state, cfg.beta),
                        std::string("error: ") + ex.what());
        }
        if (consecutive_errors >= cfg.consecutive_error_cap)
            throw std::runtime_error("probing aborted: consecutive error cap reached");
        if (on_step) on_step(state);
    }
}

SearchState initialize_from_seeds(const std::vector<core::TestCase>& seeds,
                                  const SearchConfig& cfg, CaseOracle& oracle) {
    if (seeds.empty()) throw std::invalid_argument("seed list must be non-empty");
    SearchState state;
    int collected = 0;
    for (const auto& seed : seeds) {
        if (collected >= cfg.seed_failures) break;
        core::EvaluatedCase ec = oracle.evaluate(seed);
        if (ec.fail == 1) {
            state.pool.insert(ec, "seed");
            state.macro_tree.add_child(0, ec);
            state.micro_tree.add_child(0, ec);
            // Seed nodes start unvisited; add_child leaves N=E=0.
            ++collected;
        }
    }
    state.insufficient_seeds = collected < cfg.seed_failures;
    return state;
}

json RegimeTree::to_json() const {
    json nodes = json::array();
    for (const auto& n : nodes_) {
        json jn{{"id", n.id},
                {"parent", n.parent},
                {"depth", n.depth},
                {"visits", n.visits},
                {"failures", n.failures},
                {"children", n.children}};
        if (n.evaluated) jn["evaluated"] = core::to_json(*n.evaluated);
        nodes.push_back(std::move(jn));
    }
    return json{{"regime", regime_name(regime_)}, {"nodes", nodes}};
}

RegimeTree RegimeTree::from_json(const json& j) {
    RegimeTree tree(j.at("regime").get<std::string>() == "macro" ? Regime::macro
                                                                 : Regime::micro);
    tree.nodes_.clear();
    for (const auto& jn : j.at("nodes")) {
        SearchNode n;
        n.id = jn.at("id").get<int>();
        n.parent = jn.at("parent").get<int>();
        n.depth = jn.at("depth").get<int>();
        n.visits = jn.at("visits").get<long>();
        n.failures = jn.at("failures").get<long>();
        n.children = jn.at("children").get<std::vector<int>>();
        if (jn.contains("evaluated"))
            n.evaluated = core::evaluated_case_from_json(jn.at("evaluated"));
        tree.nodes_.push_back(std::move(n));
    }
    return tree;
}

json SearchState::to_json() const {
    return json{{"macro_tree", macro_tree.to_json()},
                {"micro_tree", micro_tree.to_json()},
                {"history", core::to_json(history)},
                {"pool", pool.to_json()},
                {"simulations_done", simulations_done},
                {"insufficient_seeds", insufficient_seeds}};
}

SearchState SearchState::from_json(const json& j) {
    SearchState state;
    state.macro_tree = RegimeTree::from_json(j.at("macro_tree"));
    state.micro_tree = RegimeTree::from_json(j.at("micro_tree"));
    state.history = core::history_from_json(j.at("history"));
    state.pool = core::FailurePool::from_json(j.at("pool"));
    state.simulations_done = j.at("simulations_done").get<long>();
    state.insufficient_seeds = j.value("insufficient_seeds", false);
    return state;
}

}  // namespace probe::search
