#include "probe/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <thread>

#include <httplib.h>

namespace probe::oracle {

using nlohmann::json;

long estimate_tokens(const std::string& text) {
    return static_cast<long>((text.size() + 3) / 4);
}

HttpChatClient::HttpChatClient(ModelEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

ChatResult HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
    json body{{"model", endpoint_.model_name}, {"messages", json::array()}};
    std::string prompt_text;
    for (const auto& m : messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
        prompt_text += m.content;
    }

    std::string api_key;
    if (!endpoint_.api_key_env.empty()) {
        if (const char* v = std::getenv(endpoint_.api_key_env.c_str())) api_key = v;
    }

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(200 << (attempt - 1)));
        httplib::Client cli(endpoint_.base_url);
        cli.set_read_timeout(endpoint_.timeout_seconds, 0);
        cli.set_connection_timeout(endpoint_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!api_key.empty())
            headers.emplace("Authorization", "Bearer " + api_key);
        auto res = cli.Post("/v1/chat/completions", headers, body.dump(),
                            "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception& ex) {
            last_error = std::string("bad json: ") + ex.what();
            continue;
        }
        ChatResult out;
        out.attempts = attempt + 1;
        try {
            out.content =
                reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            last_error = "reply missing choices[0].message.content";
            continue;
        }
        if (reply.contains("usage")) {
            out.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
            out.completion_tokens = reply["usage"].value("completion_tokens", 0L);
            out.usage_reported = true;
        } else {
            out.prompt_tokens = estimate_tokens(prompt_text);
            out.completion_tokens = estimate_tokens(out.content);
        }
        return out;
    }
    throw TransportError("chat request to " + endpoint_.base_url +
                         " failed: " + last_error);
}

TargetReply query_target(ChatBackend& client, const ModelEndpoint& endpoint,
                         const core::TestCase& tc) {
    if (endpoint.role != Role::target)
        throw std::invalid_argument("query_target requires a target endpoint");
    std::vector<ChatMessage> messages{
        {"system", "Answer the question directly and concisely."},
        {"user", tc.question}};
    ChatResult res = client.complete(messages);
    if (res.content.empty()) throw TransportError("empty target response");
    return TargetReply{res.content, res};
}

namespace {

std::optional<core::Verdict> parse_judge_reply(const std::string& text,
                                               const std::string& judge_model) {
    std::size_t start = text.find_first_not_of(" \t\r\n");
    if (start == std::string::npos) return std::nullopt;
    std::string head = text.substr(start, 4);
    std::transform(head.begin(), head.end(), head.begin(), ::toupper);
    core::Verdict v;
    v.judge_model = judge_model;
    if (head == "PASS") {
        v.passed = true;
        v.rationale = text.substr(std::min(text.size(), start + 4));
        return v;
    }
    if (head == "FAIL") {
        v.passed = false;
        v.rationale = text.substr(std::min(text.size(), start + 4));
        if (v.rationale.find_first_not_of(" :.-\t\r\n") == std::string::npos)
            v.rationale = "judge returned FAIL with no rationale";
        return v;
    }
    return std::nullopt;
}

}  // namespace

JudgeResult verify(ChatBackend& client, const ModelEndpoint& endpoint,
                   const core::TestCase& tc, const std::string& output) {
    if (endpoint.role != Role::judge)
        throw std::invalid_argument("verify requires a judge endpoint");
    std::string instruction =
        "You are a strict grader. Compare the model answer against the "
        "reference answer.\nQuestion: " + tc.question +
        "\nReference answer: " + tc.reference_answer +
        "\nModel answer: " + output +
        "\nReply with PASS or FAIL as the very first word, followed by a "
        "short rationale.";
    std::vector<ChatMessage> messages{{"user", instruction}};
    ChatResult res = client.complete(messages);
    auto verdict = parse_judge_reply(res.content, endpoint.model_name);
    if (!verdict) {
        messages.push_back({"assistant", res.content});
        messages.push_back(
            {"user", "Reformat your verdict: start with exactly PASS or FAIL."});
        ChatResult retry = res;
        retry = client.complete(messages);
        verdict = parse_judge_reply(retry.content, endpoint.model_name);
        if (!verdict)
            throw JudgeUnparseable("judge reply carried no PASS/FAIL token");
        retry.prompt_tokens += res.prompt_tokens;
        retry.completion_tokens += res.completion_tokens;
        return JudgeResult{*verdict, retry};
    }
    return JudgeResult{*verdict, res};
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

std::optional<std::size_t> SyntheticField::mode_index(
    const std::vector<double>& point) const {
    if (static_cast<int>(point.size()) != dimension)
        throw std::invalid_argument("point dimension mismatch");
    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (sq_dist(point, modes[i].center) <= modes[i].radius * modes[i].radius)
            return i;  // closed ball, first match wins
    }
    return std::nullopt;
}

double SyntheticField::probability(const std::vector<double>& point) const {
    auto idx = mode_index(point);
    return idx ? modes[*idx].p_inside : p_background;
}

int synthetic_evaluate(const SyntheticField& field,
                       const std::vector<double>& point, std::mt19937_64& rng) {
    double p = field.probability(point);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return unit(rng) < p ? 1 : 0;
}

json SyntheticField::to_json() const {
    json jm = json::array();
    for (const auto& m : modes)
        jm.push_back(json{{"center", m.center},
                          {"radius", m.radius},
                          {"p_inside", m.p_inside}});
    return json{{"dimension", dimension},
                {"modes", jm},
                {"p_background", p_background},
                {"rng_seed", rng_seed}};
}

SyntheticField SyntheticField::from_json(const json& j) {
    SyntheticField f;
    f.dimension = j.at("dimension").get<int>();
    f.p_background = j.at("p_background").get<double>();
    f.rng_seed = j.value("rng_seed", std::uint64_t{0});
    for (const auto& jm : j.at("modes")) {
        PlantedMode m;
        m.center = jm.at("center").get<std::vector<double>>();
        m.radius = jm.at("radius").get<double>();
        m.p_inside = jm.at("p_inside").get<double>();
        f.modes.push_back(std::move(m));
    }
    return f;
}

// ---------------------------------------------------------------------------

double mode_identification_bound(double p_min, long n) {
    if (p_min <= 0.0 || p_min > 1.0)
        throw std::domain_error("p_min must lie in (0, 1]");
    if (n < 1) throw std::domain_error("n must be >= 1");
    return 1.0 - std::pow(1.0 - p_min, static_cast<double>(n));
}

double ucb1_count_bound(double delta, long n) {
    if (delta <= 0.0) throw std::domain_error("delta must be positive");
    if (n < 1) throw std::domain_error("n must be >= 1");
    return 8.0 * std::log(static_cast<double>(n)) / (delta * delta) +
           (1.0 + std::numbers::pi * std::numbers::pi / 3.0);
}

double BanditFixture::optimal() const {
    return *std::max_element(arm_means.begin(), arm_means.end());
}

std::vector<double> BanditFixture::gaps() const {
    double best = optimal();
    std::vector<double> out;
    out.reserve(arm_means.size());
    for (double mu : arm_means) out.push_back(best - mu);
    return out;
}

BanditResult simulate_bandit(const BanditFixture& fixture, double beta,
                             std::uint64_t rng_seed) {
    std::size_t k = fixture.arm_means.size();
    if (k < 2) throw std::invalid_argument("bandit fixture needs >= 2 arms");
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> gaps = fixture.gaps();

    BanditResult out;
    out.pulls.assign(k, 0);
    out.regret.reserve(static_cast<std::size_t>(fixture.horizon));
    std::vector<double> rewards(k, 0.0);
    long total = 0;
    double cumulative = 0.0;

    for (long t = 0; t < fixture.horizon; ++t) {
        std::size_t best = 0;
        double best_score = -1.0;
        for (std::size_t j = 0; j < k; ++j) {
            double mean = out.pulls[j] > 0
                              ? rewards[j] / static_cast<double>(out.pulls[j])
                              : 0.0;
            double bonus = beta * std::sqrt(
                std::log(static_cast<double>(std::max<long>(1, total))) /
                static_cast<double>(std::max<long>(1, out.pulls[j])));
            double score = mean + bonus;
            if (score > best_score ||
                (score == best_score && out.pulls[j] < out.pulls[best])) {
                best = j;
                best_score = score;
            }
        }
        double reward = unit(rng) < fixture.arm_means[best] ? 1.0 : 0.0;
        rewards[best] += reward;
        out.pulls[best] += 1;
        ++total;
        cumulative += gaps[best];
        out.regret.push_back(cumulative);
    }
    return out;
}

}  // namespace probe::oracle
