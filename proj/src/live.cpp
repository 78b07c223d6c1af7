#include "probe/live.hpp"

#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace probe::live {

using nlohmann::json;

LiveOracle::LiveOracle(std::shared_ptr<oracle::ChatBackend> target,
                       oracle::ModelEndpoint target_endpoint,
                       std::shared_ptr<oracle::ChatBackend> judge,
                       oracle::ModelEndpoint judge_endpoint,
                       std::shared_ptr<TokenTally> tally)
    : target_(std::move(target)),
      target_endpoint_(std::move(target_endpoint)),
      judge_(std::move(judge)),
      judge_endpoint_(std::move(judge_endpoint)),
      tally_(std::move(tally)) {}

core::EvaluatedCase LiveOracle::evaluate(const core::TestCase& tc) {
    auto reply = oracle::query_target(*target_, target_endpoint_, tc);
    if (tally_) {
        tally_->model_in += static_cast<double>(reply.transport.prompt_tokens);
        tally_->model_out += static_cast<double>(reply.transport.completion_tokens);
        tally_->estimated |= !reply.transport.usage_reported;
    }
    auto judged = oracle::verify(*judge_, judge_endpoint_, tc, reply.text);
    if (tally_) {
        tally_->judge += static_cast<double>(judged.transport.prompt_tokens +
                                             judged.transport.completion_tokens);
        tally_->estimated |= !judged.transport.usage_reported;
    }
    return core::record_evaluation(tc, reply.text, judged.verdict);
}

ChatGeneratorClient::ChatGeneratorClient(
    std::shared_ptr<oracle::ChatBackend> backend,
    std::shared_ptr<TokenTally> tally)
    : backend_(std::move(backend)), tally_(std::move(tally)) {}

gen::GeneratorReply ChatGeneratorClient::complete(
    const std::vector<std::pair<std::string, std::string>>& messages) {
    std::vector<oracle::ChatMessage> chat;
    chat.reserve(messages.size());
    for (const auto& [role, content] : messages)
        chat.push_back({role == "tool" ? "user" : role, content});
    oracle::ChatResult res = backend_->complete(chat);
    if (tally_) {
        tally_->model_in += static_cast<double>(res.prompt_tokens);
        tally_->model_out += static_cast<double>(res.completion_tokens);
        tally_->estimated |= !res.usage_reported;
    }
    gen::GeneratorReply reply;
    reply.text = res.content;
    // A reply that is a bare tool call rather than a proposal.
    if (auto obj = gen::extract_first_json_object(res.content)) {
        if (obj->contains("tool") && obj->contains("arguments")) {
            reply.tool_calls.push_back(
                gen::GeneratorToolCall{obj->at("tool").get<std::string>(),
                                       obj->at("arguments")});
            reply.text.clear();
        }
    }
    return reply;
}

LiveProposer::LiveProposer(std::shared_ptr<gen::GeneratorClient> generator,
                           std::shared_ptr<gen::ToolRegistry> tools,
                           std::shared_ptr<mine::EmbedderClient> embedder,
                           LiveProposerConfig cfg,
                           std::shared_ptr<TokenTally> tally)
    : generator_(std::move(generator)),
      tools_(std::move(tools)),
      embedder_(std::move(embedder)),
      cfg_(cfg),
      tally_(std::move(tally)) {}

core::TestCase LiveProposer::propose(search::Regime regime,
                                     const core::EvaluatedCase* anchor,
                                     const search::SearchState& state) {
    gen::GenerationRequest req;
    req.regime = regime;
    req.anchor = anchor;

    if (regime == search::Regime::macro) {
        bool stale = !frontier_ || macro_count_ % cfg_.frontier_refresh == 0 ||
                     state.pool.size() != frontier_pool_size_;
        if (stale && state.pool.size() > 0 && embedder_) {
            std::vector<std::string> texts;
            std::vector<gen::EmbeddedNode> nodes;
            for (const auto& e : state.pool.entries())
                texts.push_back(e.ec.test_case.question);
            auto vectors = embedder_->embed(texts);
            for (std::size_t i = 0; i < vectors.size(); ++i)
                nodes.push_back(gen::EmbeddedNode{
                    state.pool.entries()[i].ec.test_case.id,
                    state.pool.entries()[i].ec.test_case.question,
                    std::move(vectors[i])});
            frontier_ = gen::frontier_representatives(nodes, cfg_.frontier_k,
                                                      cfg_.rng_seed);
            frontier_pool_size_ = state.pool.size();
        }
        req.frontier = frontier_ ? *frontier_ : gen::FrontierSummary{};
        ++macro_count_;
    }

    gen::ProposalResult result =
        regime == search::Regime::macro
            ? gen::propose_macro(req, *tools_, *generator_)
            : gen::propose_micro(req, *tools_, *generator_);
    if (tally_) {
        for (const auto& inv : result.tool_calls) {
            tally_->tool_q +=
                static_cast<double>(oracle::estimate_tokens(inv.arguments.dump()));
            tally_->tool_a += static_cast<double>(oracle::estimate_tokens(
                inv.status == gen::InvocationStatus::success ? inv.payload.dump()
                                                             : inv.error));
        }
    }
    return result.test_case;
}

HttpEmbedder::HttpEmbedder(oracle::ModelEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

std::vector<std::vector<double>> HttpEmbedder::embed(
    const std::vector<std::string>& texts) {
    json body{{"model", endpoint_.model_name}, {"input", texts}};
    std::string api_key;
    if (!endpoint_.api_key_env.empty())
        if (const char* v = std::getenv(endpoint_.api_key_env.c_str())) api_key = v;
    httplib::Client cli(endpoint_.base_url);
    cli.set_read_timeout(endpoint_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = cli.Post("/v1/embeddings", headers, body.dump(), "application/json");
    if (!res || res->status != 200)
        throw oracle::TransportError("embeddings request failed");
    json reply = json::parse(res->body);
    std::vector<std::vector<double>> out;
    for (const auto& item : reply.at("data"))
        out.push_back(item.at("embedding").get<std::vector<double>>());
    return out;
}

ChatExplainer::ChatExplainer(std::shared_ptr<oracle::ChatBackend> backend)
    : backend_(std::move(backend)) {}

std::string ChatExplainer::explain(const std::string& question,
                                   const std::string& reference,
                                   const std::string& output) {
    std::ostringstream os;
    os << "Describe in one paragraph how the model answer mismatches the "
          "reference.\nQuestion: " << question << "\nReference: " << reference
       << "\nModel answer: " << output;
    return backend_->complete({{"user", os.str()}}).content;
}

ChatInducer::ChatInducer(std::shared_ptr<oracle::ChatBackend> backend)
    : backend_(std::move(backend)) {}

std::string ChatInducer::induce(const std::string& prompt) {
    return backend_->complete({{"user", prompt}}).content;
}

}  // namespace probe::live
