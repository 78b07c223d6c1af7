#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probe/core.hpp"
#include "probe/search.hpp"

namespace probe::gen {

struct ToolSpec {
    std::string name;
    std::string description;
    nlohmann::json input_schema;  // {"properties": {...}, "required": [...]}
    bool retryable = false;       // code-execution tools get the 3-attempt policy
};

enum class InvocationStatus { success, unknown_tool, schema_violation, handler_error };

struct ToolInvocation {
    std::string tool;
    nlohmann::json arguments;
    InvocationStatus status = InvocationStatus::success;
    nlohmann::json payload;  // structured handler result on success
    std::string error;
    int attempts = 0;
};

class ToolError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Handler returns a structured result or throws ToolError.
using ToolHandler = std::function<nlohmann::json(const nlohmann::json& args)>;

class ToolRegistry {
  public:
    static constexpr int kRetryCap = 3;

    void register_tool(ToolSpec spec, ToolHandler handler);
    bool has(const std::string& name) const;
    const std::vector<ToolSpec>& specs() const { return specs_; }

    /// Validates arguments against the schema before calling the handler.
    /// Retryable tools get up to kRetryCap attempts; the error text of the
    /// previous attempt is fed back under "previous_error".
    ToolInvocation invoke(const std::string& name,
                          const nlohmann::json& arguments) const;

    /// JSON schema blocks rendered into the generator prompt.
    nlohmann::json render_schemas() const;

  private:
    std::vector<ToolSpec> specs_;
    std::map<std::string, ToolHandler> handlers_;
};

/// Sandboxed code execution behind an executor interface; the default runs a
/// local python3 subprocess. Tests script their own executors.
using CodeExecutor = std::function<nlohmann::json(const std::string& code)>;
ToolSpec code_tool_spec();
ToolHandler make_code_handler(CodeExecutor executor);
CodeExecutor local_subprocess_executor();

/// Retrieval behind a replayable stub: canned (query -> snippet) pairs.
ToolSpec retrieval_tool_spec();
ToolHandler make_retrieval_handler(std::map<std::string, std::string> corpus);

// ---------------------------------------------------------------------------
// Frontier representatives (Macro diversification context)

struct Representative {
    std::string id;
    std::string question;
    std::vector<double> embedding;
};

struct FrontierSummary {
    std::vector<Representative> representatives;  // one medoid per cluster
    int k = 0;
};

struct EmbeddedNode {
    std::string id;
    std::string question;
    std::vector<double> embedding;
};

/// Seeded k-means into min(k, n) clusters; per cluster returns the member
/// closest to the centroid (ties to the lowest id).
FrontierSummary frontier_representatives(const std::vector<EmbeddedNode>& nodes,
                                         int k, std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Strategy-conditioned proposal

struct GeneratorToolCall {
    std::string tool;
    nlohmann::json arguments;
};

struct GeneratorReply {
    std::string text;
    std::vector<GeneratorToolCall> tool_calls;
};

class GeneratorClient {
  public:
    virtual ~GeneratorClient() = default;
    virtual GeneratorReply complete(
        const std::vector<std::pair<std::string, std::string>>& messages) = 0;
};

struct GenerationRequest {
    search::Regime regime = search::Regime::macro;
    const core::EvaluatedCase* anchor = nullptr;
    std::optional<FrontierSummary> frontier;  // present iff regime == macro
};

/// Structured generator output contract.
struct ParsedProposal {
    std::string question;
    std::string reference_answer;
    std::string topic_hint;
};

/// Tolerant extractor: first parseable JSON object in free text.
std::optional<nlohmann::json> extract_first_json_object(const std::string& text);

struct ProposalResult {
    core::TestCase test_case;
    std::vector<ToolInvocation> tool_calls;
};

struct ProposerConfig {
    int max_generation_attempts = 3;
    int max_tool_rounds = 4;
};

/// Macro: prompt with frontier representatives, require topical distinctness.
ProposalResult propose_macro(const GenerationRequest& req,
                             const ToolRegistry& tools, GeneratorClient& client,
                             const ProposerConfig& cfg = {});

/// Micro: prompt with the anchor's failure evidence, require a same-topic
/// variant distinct from the anchor.
ProposalResult propose_micro(const GenerationRequest& req,
                             const ToolRegistry& tools, GeneratorClient& client,
                             const ProposerConfig& cfg = {});

}  // namespace probe::gen
