#include "probe/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace probe::stats {

using nlohmann::json;

double error_rate(const core::ProbeHistory& history) {
    long total = 0, fails = 0;
    for (const auto& s : history.steps) {
        if (s.skipped) continue;
        ++total;
        fails += s.fail;
    }
    return total == 0 ? 0.0 : static_cast<double>(fails) / static_cast<double>(total);
}

double noise_rate(const mine::ClusterAssignment& assignment) {
    if (assignment.labels.empty()) return 0.0;
    return static_cast<double>(assignment.noise_count()) /
           static_cast<double>(assignment.labels.size());
}

double cluster_size_std(const mine::ClusterAssignment& assignment) {
    auto sizes = assignment.cluster_sizes();
    if (sizes.empty()) throw std::invalid_argument("cluster_size_std: no clusters");
    double mean = 0.0;
    for (long s : sizes) mean += static_cast<double>(s);
    mean /= static_cast<double>(sizes.size());
    double var = 0.0;
    for (long s : sizes) {
        double d = static_cast<double>(s) - mean;
        var += d * d;
    }
    var /= static_cast<double>(sizes.size());  // population variance
    return std::sqrt(var);
}

std::optional<double> coassignment_consistency(
    const std::vector<mine::ClusterAssignment>& labelings) {
    if (labelings.size() < 2)
        throw std::invalid_argument("consistency needs >= 2 labelings");

    // Align every labeling by case id.
    std::vector<std::string> ids = labelings.front().case_ids;
    std::vector<std::string> sorted_ids = ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    std::vector<std::map<std::string, int>> label_of(labelings.size());
    for (std::size_t s = 0; s < labelings.size(); ++s) {
        const auto& l = labelings[s];
        std::vector<std::string> check = l.case_ids;
        std::sort(check.begin(), check.end());
        if (check != sorted_ids)
            throw std::invalid_argument("labelings cover different case sets");
        for (std::size_t i = 0; i < l.case_ids.size(); ++i)
            label_of[s][l.case_ids[i]] = l.labels[i];
    }

    double sum = 0.0;
    long pairs = 0;
    std::size_t n = ids.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            long together = 0;
            for (std::size_t s = 0; s < labelings.size(); ++s) {
                int li = label_of[s][ids[i]];
                int lj = label_of[s][ids[j]];
                if (li != mine::kNoise && li == lj) ++together;
            }
            if (together == 0) continue;  // conditional pair set
            sum += static_cast<double>(together) /
                   static_cast<double>(labelings.size());
            ++pairs;
        }
    }
    if (pairs == 0) return std::nullopt;
    return sum / static_cast<double>(pairs);
}

OverlapResult overlap_analysis(const LabeledSet& set_a, const LabeledSet& set_b,
                               const mine::ClusteringConfig& cfg) {
    if (set_a.ids.empty() || set_b.ids.empty())
        throw std::invalid_argument("overlap: both sets must be non-empty");
    std::size_t dim = set_a.embeddings.front().size();
    for (const auto& v : set_b.embeddings)
        if (v.size() != dim)
            throw std::invalid_argument("overlap: incompatible embedding dimensions");

    auto subsample = [&](const LabeledSet& s, std::size_t target) {
        std::vector<std::size_t> idx(s.ids.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (s.ids.size() > target) {
            std::mt19937_64 rng(cfg.rng_seed);
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(target);
            std::sort(idx.begin(), idx.end());
        }
        return idx;
    };
    std::size_t target = std::min(set_a.ids.size(), set_b.ids.size());
    auto ia = subsample(set_a, target);
    auto ib = subsample(set_b, target);

    std::vector<std::string> ids;
    std::vector<std::vector<double>> points;
    std::vector<std::string> sources;
    for (std::size_t i : ia) {
        ids.push_back(set_a.ids[i]);
        points.push_back(set_a.embeddings[i]);
        sources.push_back("a");
    }
    for (std::size_t i : ib) {
        ids.push_back(set_b.ids[i]);
        points.push_back(set_b.embeddings[i]);
        sources.push_back("b");
    }

    OverlapResult out;
    out.combined = mine::cluster_points(ids, points, cfg);
    out.sources = sources;
    for (int c = 0; c < out.combined.k; ++c) {
        bool has_a = false, has_b = false;
        for (std::size_t i = 0; i < out.combined.labels.size(); ++i) {
            if (out.combined.labels[i] != c) continue;
            (sources[i] == "a" ? has_a : has_b) = true;
        }
        if (has_a && has_b)
            ++out.shared;
        else if (has_a)
            ++out.a_only;
        else
            ++out.b_only;
    }
    return out;
}

std::vector<CostRow> cost_aggregate(const RunLedger& ledger, CostGroupBy group_by) {
    std::map<std::string, CostRow> groups;
    std::vector<std::string> order;
    for (const auto& r : ledger.records) {
        std::string key = group_by == CostGroupBy::regime ? r.regime : r.benchmark;
        if (!groups.count(key)) order.push_back(key);
        CostRow& row = groups[key];
        row.group = key;
        row.model_in_out += r.model_in_tokens + r.model_out_tokens;
        row.judge += r.judge_tokens;
        row.tool_q += r.tool_q_tokens;
        row.tool_a += r.tool_a_tokens;
        row.count += 1;
    }
    std::vector<CostRow> out;
    for (const auto& key : order) {
        CostRow row = groups[key];
        double n = static_cast<double>(std::max<long>(1, row.count));
        row.model_in_out /= n;
        row.judge /= n;
        row.tool_q /= n;
        row.tool_a /= n;
        row.total = row.model_in_out + row.judge + row.tool_q + row.tool_a;
        row.dollars = (row.model_in_out * ledger.pricing.model_per_1k +
                       row.judge * ledger.pricing.judge_per_1k +
                       (row.tool_q + row.tool_a) * ledger.pricing.tool_per_1k) /
                      1000.0;
        out.push_back(std::move(row));
    }
    return out;
}

MetricReport compute_metrics(const core::ProbeHistory& history,
                             const mine::ClusterAssignment& assignment,
                             const core::UtilityConfig& utility_cfg) {
    MetricReport m;
    m.error_rate = error_rate(history);
    m.noise_rate = noise_rate(assignment);
    m.cluster_count = assignment.k;
    auto sizes = assignment.cluster_sizes();
    if (!sizes.empty()) {
        m.cluster_size_std = cluster_size_std(assignment);
        long total = 0;
        for (long s : sizes) total += s;
        m.avg_cluster_size =
            static_cast<double>(total) / static_cast<double>(sizes.size());
        m.utility = core::utility(sizes, utility_cfg);
    }
    long macro = 0, micro = 0;
    for (const auto& s : history.steps) {
        if (s.regime == "macro")
            ++macro;
        else if (s.regime == "micro")
            ++micro;
        m.failure_count += s.skipped ? 0 : s.fail;
    }
    m.simulations = static_cast<long>(history.steps.size());
    if (macro + micro > 0) {
        m.macro_fraction =
            static_cast<double>(macro) / static_cast<double>(macro + micro);
        m.micro_fraction =
            static_cast<double>(micro) / static_cast<double>(macro + micro);
    }
    return m;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

json metrics_json(const MetricReport& m) {
    return json{{"error_rate", m.error_rate},
                {"noise_rate", m.noise_rate},
                {"cluster_size_std", m.cluster_size_std},
                {"macro_fraction", m.macro_fraction},
                {"micro_fraction", m.micro_fraction},
                {"cluster_count", m.cluster_count},
                {"avg_cluster_size", m.avg_cluster_size},
                {"failure_count", m.failure_count},
                {"simulations", m.simulations},
                {"utility", m.utility}};
}

}  // namespace

json report_json(const MetricReport& metrics,
                 const std::vector<mine::FailureMode>& modes,
                 const RunLedger& ledger) {
    json jmodes = json::array();
    for (const auto& m : modes) jmodes.push_back(mine::to_json(m));
    json jcosts = json::array();
    for (const auto& row : cost_aggregate(ledger, CostGroupBy::regime))
        jcosts.push_back(json{{"group", row.group},
                              {"model_in_out", row.model_in_out},
                              {"judge", row.judge},
                              {"tool_q", row.tool_q},
                              {"tool_a", row.tool_a},
                              {"total", row.total},
                              {"dollars", row.dollars}});
    return json{{"metrics", metrics_json(metrics)},
                {"modes", jmodes},
                {"costs", jcosts}};
}

std::string report_markdown(const MetricReport& metrics,
                            const std::vector<mine::FailureMode>& modes,
                            const RunLedger& ledger) {
    std::ostringstream os;
    os << "# Probing report\n\n## Metrics\n\n";
    os << "- simulations: " << metrics.simulations << "\n";
    os << "- failures: " << metrics.failure_count << "\n";
    os << "- error rate: " << fmt(metrics.error_rate) << "\n";
    os << "- noise rate: " << fmt(metrics.noise_rate) << "\n";
    os << "- cluster count: " << metrics.cluster_count << "\n";
    os << "- cluster size std: " << fmt(metrics.cluster_size_std) << "\n";
    os << "- avg cluster size: " << fmt(metrics.avg_cluster_size) << "\n";
    os << "- macro fraction: " << fmt(metrics.macro_fraction) << "\n";
    os << "- micro fraction: " << fmt(metrics.micro_fraction) << "\n";
    os << "- utility: " << metrics.utility << "\n";
    os << "\n## Failure modes\n\n";
    if (modes.empty()) {
        os << "no failure modes discovered\n";
    } else {
        for (const auto& m : modes) {
            os << "### Mode " << m.cluster << " (" << m.member_ids.size()
               << " members)\n\n" << m.description << "\n\n";
            os << "central evidence: ";
            for (std::size_t i = 0; i < m.evidence.central.size(); ++i)
                os << (i ? ", " : "") << m.evidence.central[i];
            os << "\n\n";
        }
    }
    os << "## Costs (avg tokens per simulation, by regime)\n\n";
    os << "| group | model_in_out | judge | tool_q | tool_a | total |\n";
    os << "|---|---|---|---|---|---|\n";
    for (const auto& row : cost_aggregate(ledger, CostGroupBy::regime))
        os << "| " << row.group << " | " << fmt(row.model_in_out) << " | "
           << fmt(row.judge) << " | " << fmt(row.tool_q) << " | "
           << fmt(row.tool_a) << " | " << fmt(row.total) << " |\n";
    return os.str();
}

std::string costs_csv(const RunLedger& ledger) {
    std::ostringstream os;
    os << "benchmark,type,model_in_out,judge,tool_q,tool_a,total,dollars\n";
    std::map<std::pair<std::string, std::string>, std::vector<LedgerRecord>> groups;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& r : ledger.records) {
        auto key = std::make_pair(r.benchmark, r.regime);
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(r);
    }
    for (const auto& key : order) {
        RunLedger sub;
        sub.records = groups[key];
        sub.pricing = ledger.pricing;
        auto rows = cost_aggregate(sub, CostGroupBy::regime);
        for (const auto& row : rows)
            os << key.first << "," << key.second << "," << fmt(row.model_in_out)
               << "," << fmt(row.judge) << "," << fmt(row.tool_q) << ","
               << fmt(row.tool_a) << "," << fmt(row.total) << ","
               << fmt(row.dollars) << "\n";
    }
    return os.str();
}

json RunLedger::to_json() const {
    json recs = json::array();
    for (const auto& r : records)
        recs.push_back(json{{"benchmark", r.benchmark},
                            {"regime", r.regime},
                            {"model_in_tokens", r.model_in_tokens},
                            {"model_out_tokens", r.model_out_tokens},
                            {"judge_tokens", r.judge_tokens},
                            {"tool_q_tokens", r.tool_q_tokens},
                            {"tool_a_tokens", r.tool_a_tokens},
                            {"estimated", r.estimated}});
    return json{{"records", recs},
                {"pricing",
                 {{"model_per_1k", pricing.model_per_1k},
                  {"judge_per_1k", pricing.judge_per_1k},
                  {"tool_per_1k", pricing.tool_per_1k}}}};
}

RunLedger RunLedger::from_json(const json& j) {
    RunLedger l;
    for (const auto& jr : j.at("records")) {
        LedgerRecord r;
        r.benchmark = jr.value("benchmark", "");
        r.regime = jr.value("regime", "");
        r.model_in_tokens = jr.at("model_in_tokens").get<double>();
        r.model_out_tokens = jr.at("model_out_tokens").get<double>();
        r.judge_tokens = jr.at("judge_tokens").get<double>();
        r.tool_q_tokens = jr.at("tool_q_tokens").get<double>();
        r.tool_a_tokens = jr.at("tool_a_tokens").get<double>();
        r.estimated = jr.value("estimated", false);
        l.records.push_back(std::move(r));
    }
    const auto& p = j.at("pricing");
    l.pricing.model_per_1k = p.value("model_per_1k", 0.0);
    l.pricing.judge_per_1k = p.value("judge_per_1k", 0.0);
    l.pricing.tool_per_1k = p.value("tool_per_1k", 0.0);
    return l;
}

}  // namespace probe::stats
