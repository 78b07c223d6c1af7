#include "probe/core.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace probe::core {

using nlohmann::json;

std::string origin_name(Origin o) {
    switch (o) {
        case Origin::seed: return "seed";
        case Origin::macro: return "macro";
        case Origin::micro: return "micro";
    }
    return "seed";
}

Origin origin_from_name(const std::string& s) {
    if (s == "seed") return Origin::seed;
    if (s == "macro") return Origin::macro;
    if (s == "micro") return Origin::micro;
    throw std::invalid_argument("unknown origin: " + s);
}

std::string normalize_question(const std::string& q) {
    std::string out;
    out.reserve(q.size());
    bool pending_space = false;
    for (unsigned char c : q) {
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (std::isspace(c)) {
            pending_space = true;
        }
        // punctuation dropped
    }
    return out;
}

std::string content_hash(const std::string& payload) {
    // FNV-1a 64-bit
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : payload) {
        h ^= c;
        h *= 1099511628211ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[h & 0xf];
        h >>= 4;
    }
    return out;
}

TestCase TestCase::make(std::string question, std::string reference_answer,
                        std::string topic_hint, Origin origin,
                        std::string parent_id) {
    if (question.empty()) throw std::invalid_argument("question must be non-empty");
    if (reference_answer.empty())
        throw std::invalid_argument("reference_answer must be non-empty");
    if (origin == Origin::seed && !parent_id.empty())
        throw std::invalid_argument("seed cases carry no parent_id");
    if (origin != Origin::seed && parent_id.empty())
        throw std::invalid_argument("non-seed cases require a parent_id");
    TestCase tc;
    tc.question = std::move(question);
    tc.reference_answer = std::move(reference_answer);
    tc.topic_hint = std::move(topic_hint);
    tc.origin = origin;
    tc.parent_id = std::move(parent_id);
    tc.id = content_hash(tc.question + "\x1f" + tc.reference_answer + "\x1f" +
                         origin_name(tc.origin) + "\x1f" + tc.parent_id);
    return tc;
}

EvaluatedCase record_evaluation(const TestCase& tc, const std::string& output,
                                const Verdict& verdict) {
    EvaluatedCase ec;
    ec.test_case = tc;
    ec.model_output = output;
    ec.verdict = verdict;
    ec.fail = verdict.passed ? 0 : 1;
    return ec;
}

InsertResult FailurePool::insert(const EvaluatedCase& ec, const std::string& regime) {
    if (ec.fail != 1) return InsertResult::rejected_not_failure;
    std::string key = normalize_question(ec.test_case.question);
    if (index_.count(key)) return InsertResult::duplicate;
    index_[key] = entries_.size();
    entries_.push_back(PoolEntry{ec, regime});
    return InsertResult::inserted;
}

bool FailurePool::contains_normalized(const std::string& normalized_question) const {
    return index_.count(normalized_question) > 0;
}

long utility(const std::vector<long>& mode_sizes, const UtilityConfig& cfg) {
    if (cfg.per_mode_cap < 1) throw std::invalid_argument("per_mode_cap must be >= 1");
    long total = 0;
    for (long n : mode_sizes) {
        if (n <= 0) throw std::invalid_argument("mode sizes must be positive");
        total += std::min<long>(n, cfg.per_mode_cap);
    }
    return total;
}

json to_json(const TestCase& tc) {
    return json{{"id", tc.id},
                {"question", tc.question},
                {"reference_answer", tc.reference_answer},
                {"topic_hint", tc.topic_hint},
                {"origin", origin_name(tc.origin)},
                {"parent_id", tc.parent_id}};
}

TestCase test_case_from_json(const json& j) {
    TestCase tc;
    tc.id = j.at("id").get<std::string>();
    tc.question = j.at("question").get<std::string>();
    tc.reference_answer = j.at("reference_answer").get<std::string>();
    tc.topic_hint = j.value("topic_hint", "");
    tc.origin = origin_from_name(j.at("origin").get<std::string>());
    tc.parent_id = j.value("parent_id", "");
    return tc;
}

json to_json(const Verdict& v) {
    return json{{"passed", v.passed},
                {"rationale", v.rationale},
                {"judge_model", v.judge_model}};
}

Verdict verdict_from_json(const json& j) {
    Verdict v;
    v.passed = j.at("passed").get<bool>();
    v.rationale = j.value("rationale", "");
    v.judge_model = j.value("judge_model", "");
    return v;
}

json to_json(const EvaluatedCase& ec) {
    return json{{"case", to_json(ec.test_case)},
                {"model_output", ec.model_output},
                {"verdict", to_json(ec.verdict)},
                {"fail", ec.fail}};
}

EvaluatedCase evaluated_case_from_json(const json& j) {
    EvaluatedCase ec;
    ec.test_case = test_case_from_json(j.at("case"));
    ec.model_output = j.at("model_output").get<std::string>();
    ec.verdict = verdict_from_json(j.at("verdict"));
    ec.fail = j.at("fail").get<int>();
    return ec;
}

std::string to_jsonl_line(const PoolEntry& e) {
    const auto& tc = e.ec.test_case;
    json j{{"id", tc.id},
           {"question", tc.question},
           {"reference_answer", tc.reference_answer},
           {"model_output", e.ec.model_output},
           {"passed", e.ec.verdict.passed},
           {"fail", e.ec.fail},
           {"origin", origin_name(tc.origin)},
           {"parent_id", tc.parent_id},
           {"regime", e.regime}};
    return j.dump();
}

PoolEntry pool_entry_from_jsonl_line(const std::string& line) {
    json j = json::parse(line);
    PoolEntry e;
    TestCase tc;
    tc.id = j.at("id").get<std::string>();
    tc.question = j.at("question").get<std::string>();
    tc.reference_answer = j.at("reference_answer").get<std::string>();
    tc.origin = origin_from_name(j.at("origin").get<std::string>());
    tc.parent_id = j.value("parent_id", "");
    e.ec.test_case = tc;
    e.ec.model_output = j.at("model_output").get<std::string>();
    e.ec.verdict.passed = j.at("passed").get<bool>();
    e.ec.verdict.rationale = e.ec.verdict.passed ? "" : "recorded failure";
    e.ec.fail = j.at("fail").get<int>();
    e.regime = j.value("regime", "");
    return e;
}

json FailurePool::to_json() const {
    json arr = json::array();
    for (const auto& e : entries_) {
        json j = core::to_json(e.ec);
        j["regime"] = e.regime;
        arr.push_back(j);
    }
    return arr;
}

FailurePool FailurePool::from_json(const json& j) {
    FailurePool pool;
    for (const auto& item : j) {
        EvaluatedCase ec = evaluated_case_from_json(item);
        pool.insert(ec, item.value("regime", ""));
    }
    return pool;
}

json to_json(const ProbeHistory& h) {
    json arr = json::array();
    for (const auto& s : h.steps) {
        arr.push_back(json{{"case_id", s.case_id},
                           {"fail", s.fail},
                           {"regime", s.regime},
                           {"step", s.step},
                           {"skipped", s.skipped},
                           {"skip_reason", s.skip_reason}});
    }
    return arr;
}

ProbeHistory history_from_json(const json& j) {
    ProbeHistory h;
    for (const auto& item : j) {
        ProbeStep s;
        s.case_id = item.at("case_id").get<std::string>();
        s.fail = item.at("fail").get<int>();
        s.regime = item.at("regime").get<std::string>();
        s.step = item.at("step").get<std::uint64_t>();
        s.skipped = item.value("skipped", false);
        s.skip_reason = item.value("skip_reason", "");
        h.steps.push_back(std::move(s));
    }
    return h;
}

}  // namespace probe::core
