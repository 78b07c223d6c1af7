#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "probe/mining.hpp"

using namespace probe;
using namespace probe::mine;

namespace {

core::EvaluatedCase failure_case(const std::string& q) {
    auto tc = core::TestCase::make(q, "right", "t", core::Origin::macro, "root");
    core::Verdict v;
    v.passed = false;
    v.rationale = "mismatch";
    return core::record_evaluation(tc, "wrong", v);
}

core::EvaluatedCase passing_case(const std::string& q) {
    auto tc = core::TestCase::make(q, "right", "t", core::Origin::macro, "root");
    core::Verdict v;
    v.passed = true;
    return core::record_evaluation(tc, "right", v);
}

struct FixedEmbedder : EmbedderClient {
    int dim = 3;
    std::vector<std::string> seen;
    std::vector<std::vector<double>> embed(
        const std::vector<std::string>& texts) override {
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) {
            seen.push_back(t);
            out.push_back(std::vector<double>(static_cast<std::size_t>(dim),
                                              static_cast<double>(t.size())));
        }
        return out;
    }
};

struct EchoInducer : InducerClient {
    std::string last_prompt;
    std::string induce(const std::string& prompt) override {
        last_prompt = prompt;
        return "canned mode summary";
    }
};

std::vector<FailureEmbedding> blob_fixture(std::vector<std::vector<double>>* extra =
                                               nullptr) {
    std::vector<FailureEmbedding> emb;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.05);
    int id = 0;
    for (double cx : {0.0, 10.0}) {
        for (int i = 0; i < 20; ++i) {
            emb.push_back({"case" + std::to_string(id++),
                           {cx + g(rng), cx + g(rng)},
                           "err"});
        }
    }
    if (extra)
        for (const auto& p : *extra)
            emb.push_back({"case" + std::to_string(id++), p, "err"});
    return emb;
}

}  // namespace

TEST_CASE("derive_error_text") {
    auto f = failure_case("q1");
    SUBCASE("null explainer template carries both strings") {
        auto text = derive_error_text(f, nullptr);
        CHECK(text.find("right") != std::string::npos);
        CHECK(text.find("wrong") != std::string::npos);
    }
    SUBCASE("stub explainer verbatim") {
        struct Stub : ExplainerClient {
            std::string explain(const std::string&, const std::string&,
                                const std::string&) override {
                return "custom explanation";
            }
        } stub;
        CHECK(derive_error_text(f, &stub) == "custom explanation");
    }
    SUBCASE("fail=0 violates the precondition") {
        CHECK_THROWS(derive_error_text(passing_case("q2"), nullptr));
    }
}

TEST_CASE("embed_failures preserves order and embeds question plus error") {
    std::vector<core::PoolEntry> entries;
    for (const char* q : {"first q", "second q", "third q"})
        entries.push_back({failure_case(q), "macro"});
    FixedEmbedder embedder;
    auto emb = embed_failures(entries, embedder, nullptr);
    REQUIRE(emb.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(emb[i].case_id == entries[i].ec.test_case.id);
    CHECK(embedder.seen[0].find("first q") != std::string::npos);
    CHECK(embedder.seen[0].find(emb[0].error_text) != std::string::npos);
}

TEST_CASE("embed_failures rejects dimension inconsistency") {
    struct BadEmbedder : EmbedderClient {
        std::vector<std::vector<double>> embed(
            const std::vector<std::string>& texts) override {
            std::vector<std::vector<double>> out;
            for (std::size_t i = 0; i < texts.size(); ++i)
                out.push_back(std::vector<double>(i + 1, 0.0));
            return out;
        }
    } bad;
    std::vector<core::PoolEntry> entries{{failure_case("a"), "macro"},
                                         {failure_case("b"), "macro"}};
    CHECK_THROWS(embed_failures(entries, bad, nullptr));
}

TEST_CASE("cluster_failures fixtures") {
    ClusteringConfig cfg;
    cfg.min_cluster_size = 5;
    cfg.min_samples = 3;

    SUBCASE("fewer points than min_cluster_size -> all noise") {
        std::vector<FailureEmbedding> emb{{"a", {0.0, 0.0}, ""},
                                          {"b", {0.1, 0.0}, ""},
                                          {"c", {0.2, 0.0}, ""}};
        auto assignment = cluster_failures(emb, cfg);
        CHECK(assignment.k == 0);
        CHECK(assignment.noise_count() == 3);
    }
    SUBCASE("two blobs -> K=2, zero misassignments") {
        auto emb = blob_fixture();
        auto assignment = cluster_failures(emb, cfg);
        REQUIRE(assignment.k == 2);
        CHECK(assignment.noise_count() == 0);
        // First 20 in one cluster, last 20 in the other.
        std::set<int> first(assignment.labels.begin(), assignment.labels.begin() + 20);
        std::set<int> second(assignment.labels.begin() + 20, assignment.labels.end());
        CHECK(first.size() == 1);
        CHECK(second.size() == 1);
        CHECK(*first.begin() != *second.begin());
    }
    SUBCASE("planted outliers are noise") {
        std::vector<std::vector<double>> outliers{
            {50.0, -40.0}, {-60.0, 70.0}, {120.0, 5.0}, {5.0, -90.0}, {200.0, 200.0}};
        auto emb = blob_fixture(&outliers);
        auto assignment = cluster_failures(emb, cfg);
        CHECK(assignment.k == 2);
        CHECK(assignment.noise_count() == 5);
        for (std::size_t i = 40; i < 45; ++i) CHECK(assignment.labels[i] == kNoise);
    }
    SUBCASE("all points identical -> one cluster, no noise") {
        std::vector<FailureEmbedding> emb;
        for (int i = 0; i < 8; ++i)
            emb.push_back({"p" + std::to_string(i), {1.0, 2.0}, ""});
        auto assignment = cluster_failures(emb, cfg);
        CHECK(assignment.k == 1);
        CHECK(assignment.noise_count() == 0);
    }
    SUBCASE("determinism") {
        auto emb = blob_fixture();
        auto a = cluster_failures(emb, cfg);
        auto b = cluster_failures(emb, cfg);
        CHECK(a.labels == b.labels);
    }
    SUBCASE("raising min_cluster_size never lowers the noise count") {
        auto emb = blob_fixture();
        long prev = -1;
        for (int mcs : {3, 6, 9, 12, 15}) {
            ClusteringConfig c;
            c.min_cluster_size = mcs;
            c.min_samples = 3;
            long noise = cluster_failures(emb, c).noise_count();
            CHECK(noise >= prev);
            prev = noise;
        }
    }
    SUBCASE("partition property") {
        std::vector<std::vector<double>> outliers{{90.0, 90.0}};
        auto emb = blob_fixture(&outliers);
        auto assignment = cluster_failures(emb, cfg);
        long total = 0;
        for (long s : assignment.cluster_sizes()) total += s;
        CHECK(total + assignment.noise_count() ==
              static_cast<long>(emb.size()));
        for (long s : assignment.cluster_sizes())
            CHECK(s >= cfg.min_cluster_size);
    }
}

TEST_CASE("ClusterAssignment JSON round trip") {
    auto emb = blob_fixture();
    ClusteringConfig cfg;
    auto assignment = cluster_failures(emb, cfg);
    auto j = assignment.to_json();
    auto back = ClusterAssignment::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.labels == assignment.labels);
}

TEST_CASE("select_evidence") {
    // Hand-built assignments: evidence selection is independent of how the
    // labels were obtained, and degenerate equal-spacing inputs would be
    // labeled noise by the density clusterer.
    SUBCASE("collinear fixture: central middle, boundary endpoints") {
        std::vector<FailureEmbedding> emb;
        ClusterAssignment assignment;
        for (int i = 0; i < 10; ++i) {
            emb.push_back({"p" + std::to_string(i), {static_cast<double>(i)}, ""});
            assignment.case_ids.push_back(emb.back().case_id);
            assignment.labels.push_back(0);
        }
        assignment.k = 1;
        assignment.centroids = {{4.5}};
        std::vector<NonFailurePoint> contrasts{{"nf0", {-3.0}}, {"nf1", {12.0}}};
        auto ev = select_evidence(assignment, emb, 0, contrasts, 3, 2, 5);
        CHECK_FALSE(ev.small_cluster_all);
        // Centroid at 4.5: nearest are p4,p5 then p3/p6 (tie by id -> p3).
        std::set<std::string> central(ev.central.begin(), ev.central.end());
        CHECK(central == std::set<std::string>{"p4", "p5", "p3"});
        REQUIRE(ev.boundary.size() == 2);
        std::set<std::string> endpoints;
        for (const auto& [f, c] : ev.boundary) endpoints.insert(f);
        CHECK(endpoints == std::set<std::string>{"p0", "p9"});
        // Each boundary failure pairs with its nearest non-failure.
        for (const auto& [f, c] : ev.boundary) {
            if (f == "p0") CHECK(c == "nf0");
            if (f == "p9") CHECK(c == "nf1");
        }
        // Evidence geometry: central max distance <= boundary min distance.
        CHECK_FALSE(ev.missing_contrasts);
    }
    SUBCASE("small cluster path") {
        std::vector<FailureEmbedding> emb{{"a", {0.0}, ""}, {"b", {0.1}, ""},
                                          {"c", {0.2}, ""}, {"d", {0.3}, ""}};
        ClusterAssignment assignment;
        assignment.case_ids = {"a", "b", "c", "d"};
        assignment.labels = {0, 0, 0, 0};
        assignment.k = 1;
        assignment.centroids = {{0.15}};
        auto ev = select_evidence(assignment, emb, 0, {}, 3, 2, 6);
        CHECK(ev.small_cluster_all);
        CHECK(ev.central.size() == 4);
        CHECK(ev.boundary.empty());
    }
    SUBCASE("no non-failures available -> warning flag") {
        std::vector<FailureEmbedding> emb;
        ClusterAssignment assignment;
        for (int i = 0; i < 10; ++i) {
            emb.push_back({"p" + std::to_string(i), {static_cast<double>(i)}, ""});
            assignment.case_ids.push_back(emb.back().case_id);
            assignment.labels.push_back(0);
        }
        assignment.k = 1;
        assignment.centroids = {{4.5}};
        auto ev = select_evidence(assignment, emb, 0, {}, 3, 2, 5);
        CHECK(ev.missing_contrasts);
        CHECK(ev.boundary.empty());
    }
}

TEST_CASE("evidence geometry over random clusters") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FailureEmbedding> emb;
        std::vector<std::string> ids;
        std::vector<std::vector<double>> pts;
        int n = 8 + static_cast<int>(rng() % 20);
        for (int i = 0; i < n; ++i) {
            ids.push_back("p" + std::to_string(i));
            pts.push_back({unit(rng), unit(rng)});
            emb.push_back({ids.back(), pts.back(), ""});
        }
        ClusteringConfig cfg;
        cfg.min_cluster_size = 2;
        cfg.min_samples = 1;
        auto assignment = cluster_points(ids, pts, cfg);
        for (int k = 0; k < assignment.k; ++k) {
            auto ev = select_evidence(assignment, emb, k, {}, 3, 3, 4);
            if (ev.small_cluster_all || ev.central.empty()) continue;
            // Compute distances to the centroid.
            auto dist = [&](const std::string& id) {
                for (const auto& e : emb)
                    if (e.case_id == id) {
                        double s = 0.0;
                        for (std::size_t d = 0; d < e.vector.size(); ++d) {
                            double diff =
                                e.vector[d] -
                                assignment.centroids[static_cast<std::size_t>(k)][d];
                            s += diff * diff;
                        }
                        return s;
                    }
                return -1.0;
            };
            double central_max = 0.0;
            for (const auto& id : ev.central)
                central_max = std::max(central_max, dist(id));
            for (const auto& [f, c] : ev.boundary)
                CHECK(dist(f) >= central_max - 1e-12);
        }
    }
}

TEST_CASE("induction prompt and induce_mode") {
    std::map<std::string, core::EvaluatedCase> failures;
    std::map<std::string, core::EvaluatedCase> non_failures;
    auto f1 = failure_case("hard question one");
    auto f2 = failure_case("hard question two");
    auto nf = passing_case("easy question");
    failures[f1.test_case.id] = f1;
    failures[f2.test_case.id] = f2;
    non_failures[nf.test_case.id] = nf;

    EvidenceSet ev;
    ev.cluster = 0;
    ev.central = {f1.test_case.id};
    ev.boundary = {{f2.test_case.id, nf.test_case.id},
                   {f1.test_case.id, nf.test_case.id}};

    SUBCASE("every contrast pair appears in the prompt") {
        auto prompt = build_induction_prompt(ev, failures, non_failures);
        CHECK(prompt.find("hard question one") != std::string::npos);
        CHECK(prompt.find("hard question two") != std::string::npos);
        // Both pair bodies, including the shared non-failure, are present.
        auto first = prompt.find("easy question");
        REQUIRE(first != std::string::npos);
        CHECK(prompt.find("easy question", first + 1) != std::string::npos);
    }
    SUBCASE("small-cluster prompt has no contrast section") {
        EvidenceSet small;
        small.cluster = 0;
        small.central = {f1.test_case.id, f2.test_case.id};
        small.small_cluster_all = true;
        auto prompt = build_induction_prompt(small, failures, non_failures);
        CHECK(prompt.find("easy question") == std::string::npos);
        CHECK(prompt.find("hard question one") != std::string::npos);
        CHECK(prompt.find("hard question two") != std::string::npos);
    }
    SUBCASE("induce_mode assembles the FailureMode") {
        ClusterAssignment assignment;
        assignment.case_ids = {f1.test_case.id, f2.test_case.id};
        assignment.labels = {0, 0};
        assignment.k = 1;
        assignment.centroids = {{0.0}};
        EchoInducer inducer;
        auto mode = induce_mode(ev, assignment, failures, non_failures, inducer);
        CHECK(mode.description == "canned mode summary");
        CHECK(mode.member_ids.size() == 2);
        CHECK(inducer.last_prompt.find("hard question one") != std::string::npos);
        auto j = to_json(mode);
        auto back = failure_mode_from_json(j);
        CHECK(to_json(back) == j);
    }
}
