#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "probe/search.hpp"
#include "probe/synthetic.hpp"

using namespace probe;
using namespace probe::search;

namespace {

core::EvaluatedCase eval_case(const std::string& q, int fail) {
    auto tc = core::TestCase::make(q, "ref", "t", core::Origin::macro, "root");
    core::Verdict v;
    v.passed = fail == 0;
    if (fail) v.rationale = "wrong";
    return core::record_evaluation(tc, "out", v);
}

SearchNode node(long visits, long failures) {
    SearchNode n;
    n.visits = visits;
    n.failures = failures;
    return n;
}

// Always-fail / always-pass oracles.
struct ConstOracle : CaseOracle {
    int fail;
    explicit ConstOracle(int f) : fail(f) {}
    core::EvaluatedCase evaluate(const core::TestCase& tc) override {
        core::Verdict v;
        v.passed = fail == 0;
        if (fail) v.rationale = "scripted failure";
        v.judge_model = "const";
        return core::record_evaluation(tc, "out", v);
    }
};

struct CountingProposer : CaseProposer {
    long counter = 0;
    core::TestCase propose(Regime regime, const core::EvaluatedCase* anchor,
                           const SearchState&) override {
        auto origin = regime == Regime::macro ? core::Origin::macro
                                              : core::Origin::micro;
        return core::TestCase::make("question number " + std::to_string(counter++),
                                    "ref", "t", origin,
                                    anchor ? anchor->test_case.id : "root");
    }
};

}  // namespace

TEST_CASE("empirical_failure_rate") {
    CHECK(empirical_failure_rate(node(0, 0)) == doctest::Approx(0.0));
    CHECK(empirical_failure_rate(node(5, 3)) == doctest::Approx(0.6));
    CHECK(empirical_failure_rate(node(4, 4)) == doctest::Approx(1.0));
}

TEST_CASE("ucb_score scalar fixtures") {
    CHECK(ucb_score(node(0, 0), node(1, 0), 1.0) == doctest::Approx(0.0).epsilon(1e-9));
    double expected = 0.6 + std::sqrt(std::log(10.0) / 5.0);
    CHECK(ucb_score(node(5, 3), node(10, 0), 1.0) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(1.27865).epsilon(1e-4));
    // Doubling beta doubles the bonus only.
    double b1 = ucb_score(node(5, 3), node(10, 0), 1.0);
    double b2 = ucb_score(node(5, 3), node(10, 0), 2.0);
    CHECK(b2 - 0.6 == doctest::Approx(2.0 * (b1 - 0.6)));
}

TEST_CASE("select_child argmax and tie rules") {
    RegimeTree tree(Regime::macro);
    SUBCASE("singleton") {
        int c = tree.add_child(0, eval_case("only child", 1));
        tree.at(0).visits = 1;
        CHECK(select_child(tree, 0, 1.0) == c);
    }
    SUBCASE("score comparison") {
        int a = tree.add_child(0, eval_case("child a", 1));
        int b = tree.add_child(0, eval_case("child b", 0));
        tree.at(0).visits = 10;
        tree.at(a).visits = 5;
        tree.at(a).failures = 3;   // UCB ~1.2786
        tree.at(b).visits = 10;
        tree.at(b).failures = 4;   // 0.4 + sqrt(ln10/10) ~0.88
        CHECK(select_child(tree, 0, 1.0) == a);
    }
    SUBCASE("exact tie prefers lower N then insertion order") {
        int a = tree.add_child(0, eval_case("tie child a", 0));
        int b = tree.add_child(0, eval_case("tie child b", 0));
        tree.at(0).visits = 1;  // ln 1 = 0 -> both scores are p_hat = 0
        tree.at(a).visits = 2;
        CHECK(select_child(tree, 0, 1.0) == b);  // N=0 beats N=2
        tree.at(a).visits = 0;
        CHECK(select_child(tree, 0, 1.0) == a);  // full tie -> insertion order
    }
    SUBCASE("no children throws") {
        CHECK_THROWS_AS(select_child(tree, 0, 1.0), std::logic_error);
    }
}

TEST_CASE("select_child equals brute-force argmax on random trees") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        RegimeTree tree(Regime::macro);
        int n_children = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n_children; ++i) {
            int id = tree.add_child(0, eval_case("c" + std::to_string(trial) +
                                                     "_" + std::to_string(i),
                                                 0));
            tree.at(id).visits = static_cast<long>(rng() % 20);
            tree.at(id).failures =
                tree.at(id).visits == 0 ? 0 : static_cast<long>(rng()) %
                                                  (tree.at(id).visits + 1);
        }
        long pv = 0;
        for (int c : tree.at(0).children) pv += tree.at(c).visits;
        tree.at(0).visits = pv;

        int picked = select_child(tree, 0, 1.0);
        // Brute force: max score, ties by lower N then insertion order.
        int best = tree.at(0).children.front();
        for (int c : tree.at(0).children) {
            double sc = ucb_score(tree.at(c), tree.at(0), 1.0);
            double sb = ucb_score(tree.at(best), tree.at(0), 1.0);
            if (sc > sb ||
                (sc == sb && tree.at(c).visits < tree.at(best).visits))
                best = c;
        }
        CHECK(picked == best);
    }
}

TEST_CASE("select_regime") {
    SearchState state;
    SUBCASE("both unvisited -> macro") {
        CHECK(select_regime(state, 1.0) == Regime::macro);
    }
    SUBCASE("higher failure rate wins at equal visits") {
        state.macro_tree.at(0).visits = 10;
        state.macro_tree.at(0).failures = 8;
        state.micro_tree.at(0).visits = 10;
        state.micro_tree.at(0).failures = 2;
        CHECK(select_regime(state, 1.0) == Regime::macro);
    }
    SUBCASE("exploration bonus dominates at low N") {
        state.macro_tree.at(0).visits = 50;
        state.macro_tree.at(0).failures = 10;
        state.micro_tree.at(0).visits = 2;
        state.micro_tree.at(0).failures = 1;
        CHECK(select_regime(state, 1.0) == Regime::micro);
    }
}

TEST_CASE("traverse_to_expandable") {
    SearchConfig cfg;
    SUBCASE("bare root is expandable") {
        RegimeTree tree(Regime::macro);
        auto r = traverse_to_expandable(tree, cfg);
        REQUIRE(r.has_value());
        CHECK(*r == 0);
    }
    SUBCASE("full root descends one step") {
        cfg.max_width = 2;
        RegimeTree tree(Regime::macro);
        tree.add_child(0, eval_case("left", 1));
        tree.add_child(0, eval_case("right", 0));
        tree.at(0).visits = 2;
        tree.at(1).visits = 1;
        tree.at(1).failures = 1;
        tree.at(2).visits = 1;
        auto r = traverse_to_expandable(tree, cfg);
        REQUIRE(r.has_value());
        CHECK(*r == select_child(tree, 0, cfg.beta));
    }
    SUBCASE("W_max=1 depth 3 chain of full nodes saturates") {
        cfg.max_width = 1;
        cfg.max_depth = 3;
        RegimeTree tree(Regime::macro);
        int a = tree.add_child(0, eval_case("d1", 1));
        int b = tree.add_child(a, eval_case("d2", 1));
        // b sits at depth 2 and is still expandable (child would land at
        // depth 3 == max_depth)...
        auto r = traverse_to_expandable(tree, cfg);
        REQUIRE(r.has_value());
        CHECK(*r == b);
        // ...but once b is full too, every greedy path is saturated.
        tree.add_child(b, eval_case("d3", 1));
        CHECK_FALSE(traverse_to_expandable(tree, cfg).has_value());
    }
    SUBCASE("saturated greedy branch is backtracked out of") {
        cfg.max_width = 2;
        cfg.max_depth = 2;
        RegimeTree tree(Regime::macro);
        int a = tree.add_child(0, eval_case("branch a", 1));
        int b = tree.add_child(0, eval_case("branch b", 0));
        tree.add_child(a, eval_case("leaf a1", 1));
        tree.add_child(a, eval_case("leaf a2", 1));  // a is full at the depth cap
        tree.at(0).visits = 8;
        tree.at(a).visits = 6;
        tree.at(a).failures = 6;  // a is the UCB-preferred child...
        tree.at(b).visits = 2;
        // ...but its whole subtree is saturated, so descent lands on b.
        auto r = traverse_to_expandable(tree, cfg);
        REQUIRE(r.has_value());
        CHECK(*r == b);
    }
}

TEST_CASE("backup updates the root chain") {
    SearchState state;
    int a = state.macro_tree.add_child(0, eval_case("a", 1));
    int b = state.macro_tree.add_child(a, eval_case("b", 1));

    backup(state, Regime::macro, b, 1);
    CHECK(state.macro_tree.at(0).visits == 1);
    CHECK(state.macro_tree.at(0).failures == 1);
    CHECK(state.macro_tree.at(a).visits == 1);
    CHECK(state.macro_tree.at(b).visits == 1);
    CHECK(state.simulations_done == 1);

    backup(state, Regime::macro, a, 0);
    CHECK(state.macro_tree.at(0).visits == 2);
    CHECK(state.macro_tree.at(0).failures == 1);
    CHECK(state.macro_tree.at(a).visits == 2);
    CHECK(state.macro_tree.at(b).visits == 1);  // shared prefix only
}

TEST_CASE("run_simulation with constant oracles") {
    SearchConfig cfg;
    CountingProposer proposer;
    SUBCASE("always-fail grows the pool") {
        ConstOracle oracle(1);
        SearchState state;
        auto out = run_simulation(state, cfg, proposer, oracle);
        CHECK(out.expanded);
        CHECK(state.pool.size() == 1);
        CHECK(state.macro_tree.at(0).visits == 1);
        CHECK(state.macro_tree.at(0).failures == 1);
        CHECK(state.history.steps.size() == 1);
    }
    SUBCASE("always-pass leaves the pool empty") {
        ConstOracle oracle(0);
        SearchState state;
        auto out = run_simulation(state, cfg, proposer, oracle);
        CHECK(out.expanded);
        CHECK(state.pool.size() == 0);
        // First step is macro by the regime tie rule.
        CHECK(state.macro_tree.at(0).visits == 1);
        CHECK(state.macro_tree.at(0).failures == 0);
    }
}

TEST_CASE("run_probing_loop stopping conditions") {
    CountingProposer proposer;
    SUBCASE("T_max=0 returns immediately") {
        SearchConfig cfg;
        cfg.max_simulations = 0;
        ConstOracle oracle(1);
        SearchState state;
        run_probing_loop(state, cfg, proposer, oracle);
        CHECK(state.simulations_done == 0);
    }
    SUBCASE("failure budget binds first") {
        SearchConfig cfg;
        cfg.failure_budget = 1;
        ConstOracle oracle(1);
        SearchState state;
        run_probing_loop(state, cfg, proposer, oracle);
        CHECK(state.simulations_done == 1);
        CHECK(state.pool.size() == 1);
    }
}

TEST_CASE("initialize_from_seeds") {
    SearchConfig cfg;
    cfg.seed_failures = 2;
    std::vector<core::TestCase> seeds;
    for (int i = 0; i < 4; ++i)
        seeds.push_back(core::TestCase::make("seed " + std::to_string(i), "r",
                                             "t", core::Origin::seed));
    SUBCASE("stops after n failures, nodes under both roots with N=0") {
        ConstOracle oracle(1);
        auto state = initialize_from_seeds(seeds, cfg, oracle);
        CHECK_FALSE(state.insufficient_seeds);
        CHECK(state.pool.size() == 2);
        CHECK(state.macro_tree.at(0).children.size() == 2);
        CHECK(state.micro_tree.at(0).children.size() == 2);
        for (int c : state.macro_tree.at(0).children) {
            CHECK(state.macro_tree.at(c).visits == 0);
            CHECK(state.macro_tree.at(c).failures == 0);
        }
    }
    SUBCASE("all seeds pass -> warning state") {
        ConstOracle oracle(0);
        auto state = initialize_from_seeds(seeds, cfg, oracle);
        CHECK(state.insufficient_seeds);
        CHECK(state.pool.size() == 0);
        CHECK(state.macro_tree.size() == 1);
    }
}

TEST_CASE("10k simulations maintain tree invariants on a synthetic field") {
    oracle::SyntheticField field;
    field.dimension = 3;
    field.p_background = 0.15;
    oracle::PlantedMode mode;
    mode.center = {0.5, 0.5, 0.5};
    mode.radius = 0.2;
    mode.p_inside = 0.9;
    field.modes.push_back(mode);

    SearchConfig cfg;
    cfg.max_simulations = 10000;
    cfg.failure_budget = 100000;
    cfg.rng_seed = 1234;
    // Enough capacity that 10k steps are real expansions, not skips.
    cfg.max_width = 10;
    cfg.max_depth = 5;

    synth::SyntheticProposer proposer(3, {}, 1234);
    synth::SyntheticOracle oracle(field, 77);

    std::vector<core::TestCase> seeds;
    for (int i = 0; i < 50; ++i) {
        std::vector<double> p = {0.5 + 0.01 * i, 0.5, 0.5};
        seeds.push_back(core::TestCase::make(synth::point_question(p), "pass",
                                             "synthetic", core::Origin::seed));
    }
    auto state = initialize_from_seeds(seeds, cfg, oracle);
    run_probing_loop(state, cfg, proposer, oracle);

    long pool_from_history = 0;
    for (const auto& s : state.history.steps)
        if (!s.skipped) pool_from_history += s.fail;

    for (const auto* tree : {&state.macro_tree, &state.micro_tree}) {
        for (const auto& n : tree->nodes()) {
            CHECK(n.failures <= n.visits);
            CHECK(n.failures >= 0);
            if (n.id != 0)
                CHECK(static_cast<int>(n.children.size()) <= cfg.max_width);
            // Children of depth max_depth-1 nodes land exactly at max_depth.
            CHECK(n.depth <= cfg.max_depth);
            for (int c : n.children) CHECK(tree->at(c).visits <= n.visits);
        }
    }
    CHECK(state.macro_tree.at(0).visits + state.micro_tree.at(0).visits ==
          state.simulations_done);
    // Pool may be smaller than history fails due to duplicate questions, but
    // never larger (seed failures enter the pool before the loop).
    CHECK(static_cast<long>(state.pool.size()) >= pool_from_history / 2);
}

TEST_CASE("replay determinism: identical seeds give identical histories") {
    oracle::SyntheticField field;
    field.dimension = 2;
    field.p_background = 0.3;

    auto run_once = [&] {
        SearchConfig cfg;
        cfg.max_simulations = 200;
        cfg.failure_budget = 1000;
        cfg.rng_seed = 42;
        synth::SyntheticProposer proposer(2, {}, 42);
        synth::SyntheticOracle oracle(field, 43);
        std::vector<core::TestCase> seeds = {core::TestCase::make(
            synth::point_question({0.5, 0.5}), "pass", "s", core::Origin::seed)};
        auto state = initialize_from_seeds(seeds, cfg, oracle);
        run_probing_loop(state, cfg, proposer, oracle);
        return state.to_json().dump();
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("SearchState JSON round trip") {
    SearchState state;
    int a = state.macro_tree.add_child(0, eval_case("a", 1));
    backup(state, Regime::macro, a, 1);
    state.pool.insert(eval_case("a", 1), "macro");
    state.history.steps.push_back({"id1", 1, "macro", 0, false, ""});

    auto j = state.to_json();
    auto back = SearchState::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.simulations_done == 1);
    CHECK(back.macro_tree.at(a).failures == 1);
}
