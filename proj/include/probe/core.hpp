#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace probe::core {

enum class Origin { seed, macro, micro };

std::string origin_name(Origin o);
Origin origin_from_name(const std::string& s);

/// Lowercase, strip punctuation, collapse whitespace. Used for pool dedup
/// and generator distinctness checks.
std::string normalize_question(const std::string& q);

/// Stable 64-bit content hash rendered as 16 hex chars. Ids must survive
/// checkpoint/resume without renumbering.
std::string content_hash(const std::string& payload);

struct TestCase {
    std::string id;
    std::string question;
    std::string reference_answer;
    std::string topic_hint;
    Origin origin = Origin::seed;
    std::string parent_id;  // empty iff origin == seed

    static TestCase make(std::string question, std::string reference_answer,
                         std::string topic_hint, Origin origin,
                         std::string parent_id = {});
};

struct Verdict {
    bool passed = false;
    std::string rationale;  // non-empty when passed == false
    std::string judge_model;
};

struct EvaluatedCase {
    TestCase test_case;
    std::string model_output;
    Verdict verdict;
    int fail = 0;  // 1 iff verdict.passed == false
};

/// Total function: fail bit is the complement of the verdict.
EvaluatedCase record_evaluation(const TestCase& tc, const std::string& output,
                                const Verdict& verdict);

struct PoolEntry {
    EvaluatedCase ec;
    std::string regime;  // "seed", "macro", "micro"
};

enum class InsertResult { inserted, duplicate, rejected_not_failure };

/// Deduplicated ordered set of failure cases. Single-writer.
class FailurePool {
  public:
    InsertResult insert(const EvaluatedCase& ec, const std::string& regime);
    std::size_t size() const { return entries_.size(); }
    const std::vector<PoolEntry>& entries() const { return entries_; }
    bool contains_normalized(const std::string& normalized_question) const;

    nlohmann::json to_json() const;
    static FailurePool from_json(const nlohmann::json& j);

  private:
    std::vector<PoolEntry> entries_;
    std::map<std::string, std::size_t> index_;  // normalized question -> entry
};

struct UtilityConfig {
    int per_mode_cap = 3;  // m
};

/// U = sum_k min(n_k, m). Throws std::invalid_argument on non-positive sizes.
long utility(const std::vector<long>& mode_sizes, const UtilityConfig& cfg);

struct ProbeStep {
    std::string case_id;  // empty for skipped steps
    int fail = 0;
    std::string regime;
    std::uint64_t step = 0;  // logical timestamp
    bool skipped = false;
    std::string skip_reason;
};

struct ProbeHistory {
    std::vector<ProbeStep> steps;
};

// JSONL serialization of evaluated pool entries. Field names fixed.
std::string to_jsonl_line(const PoolEntry& e);
PoolEntry pool_entry_from_jsonl_line(const std::string& line);

nlohmann::json to_json(const TestCase& tc);
TestCase test_case_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvaluatedCase& ec);
EvaluatedCase evaluated_case_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProbeHistory& h);
ProbeHistory history_from_json(const nlohmann::json& j);

}  // namespace probe::core
