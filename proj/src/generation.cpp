#include "probe/generation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace probe::gen {

using nlohmann::json;

namespace {

bool type_matches(const json& value, const std::string& type) {
    if (type == "string") return value.is_string();
    if (type == "number") return value.is_number();
    if (type == "integer") return value.is_number_integer();
    if (type == "boolean") return value.is_boolean();
    if (type == "array") return value.is_array();
    if (type == "object") return value.is_object();
    return true;
}

std::optional<std::string> validate_against_schema(const json& schema,
                                                   const json& args) {
    if (!args.is_object()) return "arguments must be an object";
    if (schema.contains("required")) {
        for (const auto& req : schema["required"]) {
            std::string name = req.get<std::string>();
            if (!args.contains(name)) return "missing required field: " + name;
        }
    }
    if (schema.contains("properties")) {
        for (const auto& [name, prop] : schema["properties"].items()) {
            if (!args.contains(name)) continue;
            if (prop.contains("type") &&
                !type_matches(args[name], prop["type"].get<std::string>()))
                return "field " + name + " has wrong type";
        }
    }
    return std::nullopt;
}

}  // namespace

void ToolRegistry::register_tool(ToolSpec spec, ToolHandler handler) {
    if (has(spec.name))
        throw std::invalid_argument("duplicate tool name: " + spec.name);
    handlers_[spec.name] = std::move(handler);
    specs_.push_back(std::move(spec));
}

bool ToolRegistry::has(const std::string& name) const {
    return handlers_.count(name) > 0;
}

ToolInvocation ToolRegistry::invoke(const std::string& name,
                                    const json& arguments) const {
    ToolInvocation inv;
    inv.tool = name;
    inv.arguments = arguments;
    auto it = handlers_.find(name);
    if (it == handlers_.end()) {
        inv.status = InvocationStatus::unknown_tool;
        inv.error = "unknown tool: " + name;
        return inv;
    }
    const ToolSpec* spec = nullptr;
    for (const auto& s : specs_)
        if (s.name == name) spec = &s;

    if (auto err = validate_against_schema(spec->input_schema, arguments)) {
        inv.status = InvocationStatus::schema_violation;
        inv.error = *err;
        return inv;  // attempts stays 0: validation precedes execution
    }

    int cap = spec->retryable ? kRetryCap : 1;
    std::string last_error;
    for (int attempt = 1; attempt <= cap; ++attempt) {
        inv.attempts = attempt;
        json call_args = arguments;
        if (attempt > 1) call_args["previous_error"] = last_error;
        try {
            inv.payload = it->second(call_args);
            inv.status = InvocationStatus::success;
            inv.error.clear();
            return inv;
        } catch (const std::exception& ex) {
            last_error = ex.what();
        }
    }
    inv.status = InvocationStatus::handler_error;
    inv.error = last_error;
    return inv;
}

json ToolRegistry::render_schemas() const {
    json out = json::array();
    for (const auto& s : specs_)
        out.push_back(json{{"name", s.name},
                           {"description", s.description},
                           {"input_schema", s.input_schema}});
    return out;
}

ToolSpec code_tool_spec() {
    ToolSpec spec;
    spec.name = "python_exec";
    spec.description =
        "Execute a short Python snippet and return its stdout. Use for "
        "computing or verifying reference answers.";
    spec.input_schema =
        json{{"properties", {{"code", {{"type", "string"}}}}},
             {"required", json::array({"code"})}};
    spec.retryable = true;
    return spec;
}

ToolHandler make_code_handler(CodeExecutor executor) {
    return [executor = std::move(executor)](const json& args) -> json {
        json result = executor(args.at("code").get<std::string>());
        if (!result.value("success", false))
            throw ToolError(result.value("error", "code execution failed"));
        return result;
    };
}

CodeExecutor local_subprocess_executor() {
    return [](const std::string& code) -> json {
        char path[] = "/tmp/probe_exec_XXXXXX";
        int fd = mkstemp(path);
        if (fd < 0) return json{{"success", false}, {"error", "mkstemp failed"}};
        {
            std::ofstream out(path);
            out << code;
        }
        close(fd);
        std::string cmd = std::string("python3 ") + path + " 2>&1";
        std::array<char, 4096> buf{};
        std::string output;
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe) {
            std::remove(path);
            return json{{"success", false}, {"error", "popen failed"}};
        }
        while (fgets(buf.data(), static_cast<int>(buf.size()), pipe))
            output += buf.data();
        int rc = pclose(pipe);
        std::remove(path);
        if (rc != 0) return json{{"success", false}, {"error", output}};
        return json{{"success", true}, {"output", output}};
    };
}

ToolSpec retrieval_tool_spec() {
    ToolSpec spec;
    spec.name = "web_search";
    spec.description = "Retrieve a short factual snippet for a query.";
    spec.input_schema =
        json{{"properties", {{"query", {{"type", "string"}}}}},
             {"required", json::array({"query"})}};
    spec.retryable = false;
    return spec;
}

ToolHandler make_retrieval_handler(std::map<std::string, std::string> corpus) {
    return [corpus = std::move(corpus)](const json& args) -> json {
        std::string query = args.at("query").get<std::string>();
        auto it = corpus.find(query);
        if (it == corpus.end()) throw ToolError("no results for: " + query);
        return json{{"success", true}, {"snippet", it->second}};
    };
}

// ---------------------------------------------------------------------------

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

FrontierSummary frontier_representatives(const std::vector<EmbeddedNode>& nodes,
                                         int k, std::uint64_t rng_seed) {
    if (nodes.empty()) throw std::invalid_argument("frontier: empty input");
    if (k < 1) throw std::invalid_argument("frontier: k must be >= 1");
    std::size_t dim = nodes.front().embedding.size();
    for (const auto& n : nodes)
        if (n.embedding.size() != dim)
            throw std::invalid_argument("frontier: embedding dimension mismatch");

    std::size_t n = nodes.size();
    std::size_t clusters = std::min<std::size_t>(static_cast<std::size_t>(k), n);

    std::vector<std::vector<double>> centroids;
    std::mt19937_64 rng(rng_seed);

    // k-means++ seeding
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centroids.push_back(nodes[pick(rng)].embedding);
    std::vector<double> d2(n);
    while (centroids.size() < clusters) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centroids)
                best = std::min(best, sq_dist(nodes[i].embedding, c));
            d2[i] = best;
            total += best;
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> unit(0.0, total);
            double r = unit(rng);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centroids.push_back(nodes[chosen].embedding);
    }

    std::vector<std::size_t> assign(n, 0);
    for (int iter = 0; iter < 50; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::max();
            for (std::size_t c = 0; c < centroids.size(); ++c) {
                double d = sq_dist(nodes[i].embedding, centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        std::vector<std::vector<double>> sums(centroids.size(),
                                              std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(centroids.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d)
                sums[assign[i]][d] += nodes[i].embedding[d];
            counts[assign[i]] += 1;
        }
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t d = 0; d < dim; ++d)
                centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        if (!changed) break;
    }

    FrontierSummary summary;
    summary.k = static_cast<int>(clusters);
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        std::optional<std::size_t> medoid;
        double best_d = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != c) continue;
            double d = sq_dist(nodes[i].embedding, centroids[c]);
            if (d < best_d ||
                (d == best_d && medoid && nodes[i].id < nodes[*medoid].id)) {
                best_d = d;
                medoid = i;
            }
        }
        if (!medoid) continue;
        summary.representatives.push_back(Representative{
            nodes[*medoid].id, nodes[*medoid].question, nodes[*medoid].embedding});
    }
    return summary;
}

// ---------------------------------------------------------------------------

std::optional<json> extract_first_json_object(const std::string& text) {
    for (std::size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\')
                    ++i;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            if (c == '{') ++depth;
            if (c == '}') {
                --depth;
                if (depth == 0) {
                    try {
                        return json::parse(text.substr(start, i - start + 1));
                    } catch (const json::exception&) {
                        break;  // try the next opening brace
                    }
                }
            }
        }
    }
    return std::nullopt;
}

namespace {

std::optional<ParsedProposal> parse_proposal(const std::string& text) {
    auto obj = extract_first_json_object(text);
    if (!obj) return std::nullopt;
    if (!obj->contains("question") || !obj->contains("reference_answer"))
        return std::nullopt;
    ParsedProposal p;
    p.question = obj->at("question").get<std::string>();
    p.reference_answer = obj->at("reference_answer").get<std::string>();
    p.topic_hint = obj->value("topic_hint", "");
    if (p.question.empty() || p.reference_answer.empty()) return std::nullopt;
    return p;
}

std::string format_case(const core::EvaluatedCase& ec) {
    std::ostringstream os;
    os << "question: " << ec.test_case.question
       << "\nreference answer: " << ec.test_case.reference_answer
       << "\nmodel output: " << ec.model_output
       << "\njudge rationale: " << ec.verdict.rationale;
    return os.str();
}

ProposalResult run_generation(const GenerationRequest& req,
                              const ToolRegistry& tools, GeneratorClient& client,
                              const ProposerConfig& cfg,
                              const std::string& instruction,
                              const std::string& context,
                              const std::vector<std::string>& forbidden_normalized) {
    std::string system_prompt =
        "You construct test questions with verifiable ground-truth answers.\n"
        "Available tools (call by replying with "
        "{\"tool\": NAME, \"arguments\": {...}}):\n" +
        tools.render_schemas().dump() +
        "\nWhen done, reply with a single JSON object: "
        "{\"question\": ..., \"reference_answer\": ..., \"topic_hint\": ...}.\n" +
        instruction;

    std::vector<ToolInvocation> ledger;
    for (int attempt = 0; attempt < cfg.max_generation_attempts; ++attempt) {
        std::vector<std::pair<std::string, std::string>> messages{
            {"system", system_prompt}, {"user", context}};
        if (attempt > 0)
            messages.push_back(
                {"user", "Your previous proposal was rejected as a duplicate. "
                         "Produce a different question."});

        GeneratorReply reply;
        for (int round = 0; round < cfg.max_tool_rounds; ++round) {
            reply = client.complete(messages);
            if (reply.tool_calls.empty()) break;
            for (const auto& call : reply.tool_calls) {
                ToolInvocation inv = tools.invoke(call.tool, call.arguments);
                json record{{"tool", inv.tool},
                            {"ok", inv.status == InvocationStatus::success},
                            {"result", inv.status == InvocationStatus::success
                                           ? inv.payload
                                           : json(inv.error)}};
                messages.push_back({"tool", record.dump()});
                ledger.push_back(std::move(inv));
            }
        }

        auto parsed = parse_proposal(reply.text);
        if (!parsed) {
            // One reformat retry before burning the attempt.
            messages.push_back({"assistant", reply.text});
            messages.push_back(
                {"user", "Reformat: emit only the JSON object with question, "
                         "reference_answer, topic_hint."});
            reply = client.complete(messages);
            parsed = parse_proposal(reply.text);
            if (!parsed) continue;
        }

        std::string normalized = core::normalize_question(parsed->question);
        bool clash = false;
        for (const auto& f : forbidden_normalized)
            if (f == normalized) clash = true;
        if (clash) continue;

        core::Origin origin = req.regime == search::Regime::macro
                                  ? core::Origin::macro
                                  : core::Origin::micro;
        std::string parent = req.anchor ? req.anchor->test_case.id : "root";
        core::TestCase tc = core::TestCase::make(
            parsed->question, parsed->reference_answer, parsed->topic_hint,
            origin, parent);
        return ProposalResult{std::move(tc), std::move(ledger)};
    }
    throw search::GenerationExhausted("proposal rejected after retries");
}

}  // namespace

ProposalResult propose_macro(const GenerationRequest& req,
                             const ToolRegistry& tools, GeneratorClient& client,
                             const ProposerConfig& cfg) {
    if (req.regime != search::Regime::macro)
        throw std::invalid_argument("propose_macro requires the macro regime");
    std::ostringstream context;
    std::vector<std::string> forbidden;
    context << "Current frontier representatives:\n";
    if (req.frontier) {
        for (const auto& r : req.frontier->representatives) {
            context << "- " << r.question << "\n";
            forbidden.push_back(core::normalize_question(r.question));
        }
    }
    if (req.anchor)
        context << "\nExpansion anchor (a known failure):\n"
                << format_case(*req.anchor) << "\n";
    context << "\nPropose one new question that is topically distinct from "
               "every representative above, together with a verified "
               "reference answer.";
    return run_generation(req, tools, client, cfg,
                          "Favor topical diversity over depth.", context.str(),
                          forbidden);
}

ProposalResult propose_micro(const GenerationRequest& req,
                             const ToolRegistry& tools, GeneratorClient& client,
                             const ProposerConfig& cfg) {
    if (req.regime != search::Regime::micro)
        throw std::invalid_argument("propose_micro requires the micro regime");
    std::ostringstream context;
    std::vector<std::string> forbidden;
    if (req.anchor) {
        context << "Anchor failure case:\n" << format_case(*req.anchor) << "\n";
        forbidden.push_back(
            core::normalize_question(req.anchor->test_case.question));
    }
    context << "\nProduce a controlled perturbation of the anchor question "
               "(entity or attribute substitution) that stays on the same "
               "topic, with a newly verified reference answer.";
    return run_generation(req, tools, client, cfg,
                          "Stay within the anchor's topic.", context.str(),
                          forbidden);
}

}  // namespace probe::gen
