#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "probe/core.hpp"

using namespace probe::core;

namespace {

EvaluatedCase make_failure(const std::string& q) {
    auto tc = TestCase::make(q, "ref", "topic", Origin::seed);
    Verdict v;
    v.passed = false;
    v.rationale = "wrong";
    v.judge_model = "stub";
    return record_evaluation(tc, "bad answer", v);
}

}  // namespace

TEST_CASE("normalize_question lowercases, strips punctuation, collapses space") {
    CHECK(normalize_question("What  is 2+2?") == normalize_question("what is 2+2"));
    CHECK(normalize_question("  Hello,   World!  ") == "hello world");
    // Punctuation is stripped outright, not replaced by whitespace.
    CHECK(normalize_question("A.B.C") == "abc");
}

TEST_CASE("content_hash is stable and 16 hex chars") {
    auto h = content_hash("payload");
    CHECK(h.size() == 16);
    CHECK(h == content_hash("payload"));
    CHECK(h != content_hash("payload2"));
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("TestCase::make produces stable ids and validates invariants") {
    auto a = TestCase::make("q", "r", "t", Origin::seed);
    auto b = TestCase::make("q", "r", "t", Origin::seed);
    CHECK(a.id == b.id);
    auto c = TestCase::make("q", "r", "t", Origin::macro, "parent");
    CHECK(a.id != c.id);
    CHECK(c.parent_id == "parent");
    CHECK_THROWS_AS(TestCase::make("", "r", "t", Origin::seed), std::invalid_argument);
    CHECK_THROWS_AS(TestCase::make("q", "", "t", Origin::seed), std::invalid_argument);
}

TEST_CASE("record_evaluation fail bit is the verdict complement") {
    auto tc = TestCase::make("q", "r", "t", Origin::seed);
    Verdict pass;
    pass.passed = true;
    CHECK(record_evaluation(tc, "out", pass).fail == 0);
    Verdict fail;
    fail.passed = false;
    fail.rationale = "nope";
    CHECK(record_evaluation(tc, "out", fail).fail == 1);
    // determinism / identity
    auto e1 = record_evaluation(tc, "out", fail);
    auto e2 = record_evaluation(tc, "out", fail);
    CHECK(to_json(e1) == to_json(e2));
}

TEST_CASE("FailurePool insert semantics") {
    FailurePool pool;
    auto f = make_failure("What is the capital of France?");
    CHECK(pool.insert(f, "seed") == InsertResult::inserted);
    CHECK(pool.size() == 1);

    // Same normalized question, different surface form.
    auto dup = make_failure("what is the capital of France");
    CHECK(pool.insert(dup, "macro") == InsertResult::duplicate);
    CHECK(pool.size() == 1);

    auto tc = TestCase::make("easy one", "r", "t", Origin::macro, f.test_case.id);
    Verdict ok;
    ok.passed = true;
    auto passing = record_evaluation(tc, "r", ok);
    CHECK(pool.insert(passing, "macro") == InsertResult::rejected_not_failure);
    CHECK(pool.size() == 1);

    CHECK(pool.contains_normalized(normalize_question("What is the capital of France?")));
}

TEST_CASE("FailurePool JSON round trip") {
    FailurePool pool;
    pool.insert(make_failure("alpha question"), "seed");
    pool.insert(make_failure("beta question"), "micro");
    auto j = pool.to_json();
    auto restored = FailurePool::from_json(j);
    CHECK(restored.to_json() == j);
    CHECK(restored.size() == 2);
    // Dedup index survives the round trip.
    CHECK(restored.insert(make_failure("Alpha question!"), "macro") ==
          InsertResult::duplicate);
}

TEST_CASE("utility formula") {
    UtilityConfig m3{3};
    CHECK(utility({}, m3) == 0);
    CHECK(utility({5, 2}, m3) == 5);
    CHECK(utility({1, 1, 1}, m3) == 3);
    CHECK_THROWS_AS(utility({3, 0}, m3), std::invalid_argument);
    CHECK_THROWS_AS(utility({-1}, m3), std::invalid_argument);
    // Capped at K*m and bounded by the total.
    CHECK(utility({10, 10}, m3) == 6);
    CHECK(utility({2, 2}, m3) == 4);
}

TEST_CASE("JSONL line round trip with fixed field names") {
    PoolEntry e;
    e.ec = make_failure("gamma question");
    e.regime = "micro";
    auto line = to_jsonl_line(e);
    auto j = nlohmann::json::parse(line);
    for (const char* field : {"id", "question", "reference_answer", "model_output",
                              "passed", "fail", "origin", "parent_id", "regime"})
        CHECK(j.contains(field));
    auto back = pool_entry_from_jsonl_line(line);
    CHECK(to_jsonl_line(back) == line);
}

TEST_CASE("history round trip preserves skipped steps") {
    ProbeHistory h;
    h.steps.push_back({"abc", 1, "macro", 0, false, ""});
    h.steps.push_back({"", 0, "micro", 1, true, "tree-saturated"});
    auto j = to_json(h);
    auto back = history_from_json(j);
    REQUIRE(back.steps.size() == 2);
    CHECK(back.steps[1].skipped);
    CHECK(back.steps[1].skip_reason == "tree-saturated");
    CHECK(to_json(back) == j);
}
