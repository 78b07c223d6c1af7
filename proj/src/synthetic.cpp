#include "probe/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace probe::synth {

std::string point_question(const std::vector<double>& point) {
    std::ostringstream os;
    os << "Evaluate the probe at coordinates";
    char buf[32];
    for (double v : point) {
        std::snprintf(buf, sizeof(buf), " %.6f", v);
        os << buf;
    }
    return os.str();
}

std::optional<std::vector<double>> parse_point(const std::string& question) {
    const std::string marker = "coordinates";
    auto pos = question.find(marker);
    if (pos == std::string::npos) return std::nullopt;
    std::istringstream is(question.substr(pos + marker.size()));
    std::vector<double> out;
    double v;
    while (is >> v) out.push_back(v);
    if (out.empty()) return std::nullopt;
    return out;
}

std::vector<double> hash_embedding(const std::string& text, int dimension,
                                   std::uint64_t seed) {
    std::vector<double> out(static_cast<std::size_t>(dimension), 0.0);
    std::uint64_t h = seed * 1099511628211ull + 1469598103934665603ull;
    std::istringstream is(text);
    std::string token;
    while (is >> token) {
        std::uint64_t th = h;
        for (unsigned char c : token) {
            th ^= c;
            th *= 1099511628211ull;
        }
        std::mt19937_64 rng(th);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& x : out) x += gauss(rng);
    }
    return out;
}

SyntheticProposer::SyntheticProposer(int dimension, SyntheticProposerConfig cfg,
                                     std::uint64_t rng_seed)
    : dimension_(dimension), cfg_(cfg), rng_(rng_seed) {}

core::TestCase SyntheticProposer::propose(search::Regime regime,
                                          const core::EvaluatedCase* anchor,
                                          const search::SearchState&) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> point(static_cast<std::size_t>(dimension_), 0.0);

    std::optional<std::vector<double>> anchor_point;
    if (anchor) anchor_point = parse_point(anchor->test_case.question);

    if (regime == search::Regime::micro && anchor_point) {
        // Uniform draw in the closed ball around the anchor (rejection).
        while (true) {
            double sq = 0.0;
            for (std::size_t d = 0; d < point.size(); ++d) {
                double off = (2.0 * unit(rng_) - 1.0) * cfg_.micro_radius;
                point[d] = (*anchor_point)[d] + off;
                sq += off * off;
            }
            if (sq <= cfg_.micro_radius * cfg_.micro_radius) break;
        }
    } else {
        for (auto& v : point) v = unit(rng_);
    }

    core::Origin origin = regime == search::Regime::macro ? core::Origin::macro
                                                          : core::Origin::micro;
    std::string parent = anchor ? anchor->test_case.id : "root";
    return core::TestCase::make(point_question(point), "pass", "synthetic",
                                origin, parent);
}

std::string SyntheticProposer::rng_state() const { return serialize_rng(rng_); }
void SyntheticProposer::restore_rng_state(const std::string& s) {
    deserialize_rng(rng_, s);
}

SyntheticOracle::SyntheticOracle(oracle::SyntheticField field,
                                 std::uint64_t rng_seed)
    : field_(std::move(field)), rng_(rng_seed) {}

core::EvaluatedCase SyntheticOracle::evaluate(const core::TestCase& tc) {
    auto point = parse_point(tc.question);
    if (!point || static_cast<int>(point->size()) != field_.dimension)
        throw std::invalid_argument(
            "synthetic oracle: question carries no valid coordinates");
    int fail = oracle::synthetic_evaluate(field_, *point, rng_);
    core::Verdict v;
    v.passed = fail == 0;
    v.judge_model = "synthetic-field";
    v.rationale = fail ? "synthetic failure draw at P(x)" : "";
    return core::record_evaluation(tc, fail ? "incorrect" : "pass", v);
}

std::string SyntheticOracle::rng_state() const { return serialize_rng(rng_); }
void SyntheticOracle::restore_rng_state(const std::string& s) {
    deserialize_rng(rng_, s);
}

SyntheticEmbedder::SyntheticEmbedder(int dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {}

std::vector<std::vector<double>> SyntheticEmbedder::embed(
    const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto point = parse_point(t);
        if (point && static_cast<int>(point->size()) == dimension_)
            out.push_back(*point);
        else
            out.push_back(hash_embedding(t, dimension_, seed_));
    }
    return out;
}

std::string TemplateInducer::induce(const std::string& prompt) {
    // Count the evidence lines for a stable summary.
    long evidence_lines = 0;
    std::istringstream is(prompt);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty() && (line[0] == '-' || line[0] == '*')) ++evidence_lines;
    std::ostringstream os;
    os << "Recurring failure region with " << evidence_lines
       << " evidence items; members share nearby probe coordinates.";
    return os.str();
}

std::string serialize_rng(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void deserialize_rng(std::mt19937_64& rng, const std::string& s) {
    std::istringstream is(s);
    is >> rng;
}

}  // namespace probe::synth
