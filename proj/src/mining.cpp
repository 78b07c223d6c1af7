#include "probe/mining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace probe::mine {

using nlohmann::json;

std::string derive_error_text(const core::EvaluatedCase& ec,
                              ExplainerClient* explainer) {
    if (ec.fail != 1)
        throw std::invalid_argument("derive_error_text requires a failure case");
    if (!explainer)
        return "expected \"" + ec.test_case.reference_answer + "\", produced \"" +
               ec.model_output + "\"";
    return explainer->explain(ec.test_case.question,
                              ec.test_case.reference_answer, ec.model_output);
}

std::vector<FailureEmbedding> embed_failures(
    const std::vector<core::PoolEntry>& entries, EmbedderClient& embedder,
    ExplainerClient* explainer) {
    if (entries.empty())
        throw std::invalid_argument("embed_failures: empty pool");
    std::vector<std::string> texts;
    std::vector<std::string> errors;
    texts.reserve(entries.size());
    for (const auto& e : entries) {
        std::string err = derive_error_text(e.ec, explainer);
        texts.push_back(e.ec.test_case.question + "\n---\n" + err);
        errors.push_back(std::move(err));
    }
    auto vectors = embedder.embed(texts);
    if (vectors.size() != entries.size())
        throw std::runtime_error("embedder returned wrong batch size");
    std::size_t dim = vectors.front().size();
    std::vector<FailureEmbedding> out;
    out.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (vectors[i].size() != dim)
            throw std::runtime_error("inconsistent embedding dimension in batch");
        out.push_back(FailureEmbedding{entries[i].ec.test_case.id,
                                       std::move(vectors[i]), errors[i]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Density-based hierarchical clustering

namespace {

constexpr double kLambdaCap = 1e12;  // stands in for 1/0 on identical points

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double cosine_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

struct DendroNode {
    int left = -1;   // child ids (< n: leaf point, >= n: merge node)
    int right = -1;
    double dist = 0.0;
    int size = 0;
};

struct CondensedCluster {
    int parent = -1;
    double lambda_birth = 0.0;
    int size = 0;
    std::vector<int> child_clusters;
    std::vector<std::pair<int, double>> points;  // (point, lambda at fall-out)
};

class UnionFind {
  public:
    explicit UnionFind(int n) : parent_(n), rep_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
        std::iota(rep_.begin(), rep_.end(), 0);
    }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    int rep(int x) { return rep_[find(x)]; }
    void unite(int a, int b, int new_rep) {
        int ra = find(a), rb = find(b);
        parent_[ra] = rb;
        rep_[rb] = new_rep;
    }

  private:
    std::vector<int> parent_;
    std::vector<int> rep_;
};

}  // namespace

std::vector<long> ClusterAssignment::cluster_sizes() const {
    std::vector<long> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels)
        if (l != kNoise) sizes[static_cast<std::size_t>(l)] += 1;
    return sizes;
}

long ClusterAssignment::noise_count() const {
    long n = 0;
    for (int l : labels)
        if (l == kNoise) ++n;
    return n;
}

ClusterAssignment cluster_points(const std::vector<std::string>& ids,
                                 const std::vector<std::vector<double>>& points,
                                 const ClusteringConfig& cfg) {
    if (points.empty()) throw std::invalid_argument("clustering: empty input");
    if (cfg.min_cluster_size < 2)
        throw std::invalid_argument("min_cluster_size must be >= 2");
    int n = static_cast<int>(points.size());

    ClusterAssignment out;
    out.case_ids = ids;
    out.labels.assign(static_cast<std::size_t>(n), kNoise);

    auto dist_fn = cfg.metric == Metric::euclidean ? euclidean : cosine_dist;

    // Pairwise distances.
    std::vector<std::vector<double>> dist(static_cast<std::size_t>(n),
                                          std::vector<double>(static_cast<std::size_t>(n), 0.0));
    double max_dist = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double d = dist_fn(points[static_cast<std::size_t>(i)],
                               points[static_cast<std::size_t>(j)]);
            dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = d;
            dist[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = d;
            max_dist = std::max(max_dist, d);
        }

    if (max_dist == 0.0) {
        // Degenerate input: all points identical form one cluster, no noise.
        std::fill(out.labels.begin(), out.labels.end(), 0);
        out.k = 1;
        out.centroids.push_back(points.front());
        return out;
    }
    if (n < cfg.min_cluster_size) {
        out.k = 0;
        return out;  // density threshold unreachable, everything noise
    }

    // Core distances: distance to the min_samples-th neighbor, self included.
    int ms = std::min(cfg.min_samples, n);
    std::vector<double> core(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> row = dist[static_cast<std::size_t>(i)];
        std::nth_element(row.begin(), row.begin() + (ms - 1), row.end());
        core[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(ms - 1)];
    }

    auto mreach = [&](int i, int j) {
        return std::max({core[static_cast<std::size_t>(i)],
                         core[static_cast<std::size_t>(j)],
                         dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]});
    };

    // MST over the mutual-reachability graph (Prim).
    std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
    std::vector<double> best(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::max());
    std::vector<int> best_from(static_cast<std::size_t>(n), 0);
    struct Edge {
        int a, b;
        double w;
    };
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n - 1));
    in_tree[0] = true;
    for (int j = 1; j < n; ++j) best[static_cast<std::size_t>(j)] = mreach(0, j);
    for (int step = 1; step < n; ++step) {
        int pick = -1;
        double pick_w = std::numeric_limits<double>::max();
        for (int j = 0; j < n; ++j)
            if (!in_tree[static_cast<std::size_t>(j)] &&
                best[static_cast<std::size_t>(j)] < pick_w) {
                pick = j;
                pick_w = best[static_cast<std::size_t>(j)];
            }
        in_tree[static_cast<std::size_t>(pick)] = true;
        edges.push_back(Edge{best_from[static_cast<std::size_t>(pick)], pick, pick_w});
        for (int j = 0; j < n; ++j) {
            if (in_tree[static_cast<std::size_t>(j)]) continue;
            double w = mreach(pick, j);
            if (w < best[static_cast<std::size_t>(j)]) {
                best[static_cast<std::size_t>(j)] = w;
                best_from[static_cast<std::size_t>(j)] = pick;
            }
        }
    }
    std::stable_sort(edges.begin(), edges.end(),
                     [](const Edge& x, const Edge& y) { return x.w < y.w; });

    // Single-linkage dendrogram.
    std::vector<DendroNode> dendro(static_cast<std::size_t>(2 * n - 1));
    for (int i = 0; i < n; ++i) dendro[static_cast<std::size_t>(i)].size = 1;
    UnionFind uf(2 * n - 1);
    int next_node = n;
    for (const auto& e : edges) {
        int ra = uf.rep(e.a);
        int rb = uf.rep(e.b);
        DendroNode& m = dendro[static_cast<std::size_t>(next_node)];
        m.left = ra;
        m.right = rb;
        m.dist = e.w;
        m.size = dendro[static_cast<std::size_t>(ra)].size +
                 dendro[static_cast<std::size_t>(rb)].size;
        uf.unite(e.a, e.b, next_node);
        ++next_node;
    }
    int root = 2 * n - 2;

    auto collect_leaves = [&](int node, std::vector<int>& acc) {
        std::vector<int> stack{node};
        while (!stack.empty()) {
            int cur = stack.back();
            stack.pop_back();
            if (cur < n) {
                acc.push_back(cur);
            } else {
                stack.push_back(dendro[static_cast<std::size_t>(cur)].left);
                stack.push_back(dendro[static_cast<std::size_t>(cur)].right);
            }
        }
    };

    // Condense under min_cluster_size.
    std::vector<CondensedCluster> clusters;
    clusters.push_back(CondensedCluster{-1, 0.0, n, {}, {}});
    struct Work {
        int dendro_node;
        int cluster;
    };
    std::vector<Work> work{{root, 0}};
    while (!work.empty()) {
        Work w = work.back();
        work.pop_back();
        int node = w.dendro_node;
        if (node < n) {
            // Lone point reached as a continuing "cluster": it falls out at
            // the cap (never detaches below itself).
            clusters[static_cast<std::size_t>(w.cluster)].points.emplace_back(
                node, kLambdaCap);
            continue;
        }
        const DendroNode& m = dendro[static_cast<std::size_t>(node)];
        double lambda = m.dist > 0.0 ? std::min(1.0 / m.dist, kLambdaCap)
                                     : kLambdaCap;
        int ls = m.left < n ? 1 : dendro[static_cast<std::size_t>(m.left)].size;
        int rs = m.right < n ? 1 : dendro[static_cast<std::size_t>(m.right)].size;
        bool l_big = ls >= cfg.min_cluster_size;
        bool r_big = rs >= cfg.min_cluster_size;
        if (l_big && r_big) {
            for (int child : {m.left, m.right}) {
                int cid = static_cast<int>(clusters.size());
                int csize = child < n ? 1 : dendro[static_cast<std::size_t>(child)].size;
                clusters.push_back(
                    CondensedCluster{w.cluster, lambda, csize, {}, {}});
                clusters[static_cast<std::size_t>(w.cluster)].child_clusters.push_back(cid);
                work.push_back(Work{child, cid});
            }
        } else if (l_big || r_big) {
            int keep = l_big ? m.left : m.right;
            int drop = l_big ? m.right : m.left;
            std::vector<int> leaves;
            collect_leaves(drop, leaves);
            for (int p : leaves)
                clusters[static_cast<std::size_t>(w.cluster)].points.emplace_back(p, lambda);
            work.push_back(Work{keep, w.cluster});
        } else {
            std::vector<int> leaves;
            collect_leaves(node, leaves);
            for (int p : leaves)
                clusters[static_cast<std::size_t>(w.cluster)].points.emplace_back(p, lambda);
        }
    }

    // Stability (excess of mass): sum over members of lambda_leave - lambda_birth.
    std::size_t nc = clusters.size();
    std::vector<double> stability(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
        for (const auto& [p, lam] : clusters[c].points)
            stability[c] += std::min(lam, kLambdaCap) - clusters[c].lambda_birth;
        for (int child : clusters[c].child_clusters)
            stability[c] +=
                (clusters[static_cast<std::size_t>(child)].lambda_birth -
                 clusters[c].lambda_birth) *
                clusters[static_cast<std::size_t>(child)].size;
    }

    // Bottom-up selection; the root cluster is never selectable.
    std::vector<bool> selected(nc, false);
    std::vector<double> subtree_stability(nc, 0.0);
    for (std::size_t c = nc; c-- > 1;) {
        const auto& cl = clusters[c];
        if (cl.child_clusters.empty()) {
            selected[c] = true;
            subtree_stability[c] = stability[c];
            continue;
        }
        double child_sum = 0.0;
        for (int child : cl.child_clusters)
            child_sum += subtree_stability[static_cast<std::size_t>(child)];
        if (stability[c] >= child_sum) {
            selected[c] = true;
            subtree_stability[c] = stability[c];
        } else {
            subtree_stability[c] = child_sum;
        }
    }
    // A selected ancestor absorbs its selected descendants.
    std::vector<int> final_label(nc, kNoise);
    int next_cluster = 0;
    std::vector<int> dfs{0};
    // Walk top-down; first selected cluster on a path wins.
    struct Frame {
        int cluster;
        int owner;  // final label inherited from a selected ancestor, or kNoise
    };
    std::vector<Frame> frames{{0, kNoise}};
    while (!frames.empty()) {
        Frame f = frames.back();
        frames.pop_back();
        int owner = f.owner;
        if (f.cluster != 0 && owner == kNoise &&
            selected[static_cast<std::size_t>(f.cluster)])
            owner = next_cluster++;
        final_label[static_cast<std::size_t>(f.cluster)] = owner;
        for (int child : clusters[static_cast<std::size_t>(f.cluster)].child_clusters)
            frames.push_back(Frame{child, owner});
    }

    for (std::size_t c = 0; c < nc; ++c) {
        int label = final_label[c];
        if (label == kNoise) continue;
        for (const auto& [p, lam] : clusters[c].points)
            out.labels[static_cast<std::size_t>(p)] = label;
    }
    out.k = next_cluster;

    // Centroids of non-noise clusters; noise never enters a centroid.
    std::size_t dim = points.front().size();
    out.centroids.assign(static_cast<std::size_t>(out.k),
                         std::vector<double>(dim, 0.0));
    std::vector<long> counts(static_cast<std::size_t>(out.k), 0);
    for (int i = 0; i < n; ++i) {
        int l = out.labels[static_cast<std::size_t>(i)];
        if (l == kNoise) continue;
        for (std::size_t d = 0; d < dim; ++d)
            out.centroids[static_cast<std::size_t>(l)][d] +=
                points[static_cast<std::size_t>(i)][d];
        counts[static_cast<std::size_t>(l)] += 1;
    }
    for (int c = 0; c < out.k; ++c)
        for (std::size_t d = 0; d < dim; ++d)
            out.centroids[static_cast<std::size_t>(c)][d] /=
                static_cast<double>(counts[static_cast<std::size_t>(c)]);
    return out;
}

ClusterAssignment cluster_failures(const std::vector<FailureEmbedding>& embeddings,
                                   const ClusteringConfig& cfg) {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> points;
    ids.reserve(embeddings.size());
    points.reserve(embeddings.size());
    for (const auto& e : embeddings) {
        ids.push_back(e.case_id);
        points.push_back(e.vector);
    }
    return cluster_points(ids, points, cfg);
}

// ---------------------------------------------------------------------------

EvidenceSet select_evidence(const ClusterAssignment& assignment,
                            const std::vector<FailureEmbedding>& embeddings,
                            int cluster,
                            const std::vector<NonFailurePoint>& non_failures,
                            int n_c, int b, int tau) {
    EvidenceSet ev;
    ev.cluster = cluster;

    struct Member {
        std::size_t index;
        double dist_to_centroid;
    };
    std::vector<Member> members;
    const auto& centroid = assignment.centroids.at(static_cast<std::size_t>(cluster));
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (assignment.labels[i] != cluster) continue;
        members.push_back(Member{i, euclidean(embeddings[i].vector, centroid)});
    }
    if (members.empty())
        throw std::invalid_argument("select_evidence: empty cluster");

    if (static_cast<int>(members.size()) < tau) {
        ev.small_cluster_all = true;
        for (const auto& m : members)
            ev.central.push_back(embeddings[m.index].case_id);
        return ev;
    }

    std::stable_sort(members.begin(), members.end(), [&](const Member& a, const Member& c) {
        if (a.dist_to_centroid != c.dist_to_centroid)
            return a.dist_to_centroid < c.dist_to_centroid;
        return embeddings[a.index].case_id < embeddings[c.index].case_id;
    });

    int central_n = std::min<int>(n_c, static_cast<int>(members.size()));
    for (int i = 0; i < central_n; ++i)
        ev.central.push_back(embeddings[members[static_cast<std::size_t>(i)].index].case_id);

    int boundary_n = std::min<int>(b, static_cast<int>(members.size()) - central_n);
    if (non_failures.empty() && boundary_n > 0) {
        ev.missing_contrasts = true;
        return ev;
    }
    for (int i = 0; i < boundary_n; ++i) {
        const Member& m = members[members.size() - 1 - static_cast<std::size_t>(i)];
        const auto& fe = embeddings[m.index];
        double best_d = std::numeric_limits<double>::max();
        std::string best_id;
        for (const auto& nf : non_failures) {
            double d = euclidean(fe.vector, nf.vector);
            if (d < best_d || (d == best_d && nf.case_id < best_id)) {
                best_d = d;
                best_id = nf.case_id;
            }
        }
        ev.boundary.emplace_back(fe.case_id, best_id);
    }
    return ev;
}

std::string build_induction_prompt(
    const EvidenceSet& evidence,
    const std::map<std::string, core::EvaluatedCase>& failures,
    const std::map<std::string, core::EvaluatedCase>& non_failures) {
    std::ostringstream os;
    os << "Summarize the recurring failure pattern shared by these cases.\n\n";
    if (evidence.small_cluster_all)
        os << "All cluster members:\n";
    else
        os << "Central failures:\n";
    for (const auto& id : evidence.central) {
        const auto& ec = failures.at(id);
        os << "- question: " << ec.test_case.question
           << "\n  reference: " << ec.test_case.reference_answer
           << "\n  model output: " << ec.model_output << "\n";
    }
    if (!evidence.boundary.empty()) {
        os << "\nContrast pairs (failure vs. nearby success; use these to "
              "delimit where the failure pattern stops):\n";
        for (const auto& [fail_id, ok_id] : evidence.boundary) {
            const auto& f = failures.at(fail_id);
            os << "* FAILED: " << f.test_case.question << " -> "
               << f.model_output << "\n";
            auto it = non_failures.find(ok_id);
            if (it != non_failures.end())
                os << "  PASSED: " << it->second.test_case.question << " -> "
                   << it->second.model_output << "\n";
        }
    }
    os << "\nReply with one concise paragraph naming the failure mode.";
    return os.str();
}

FailureMode induce_mode(const EvidenceSet& evidence,
                        const ClusterAssignment& assignment,
                        const std::map<std::string, core::EvaluatedCase>& failures,
                        const std::map<std::string, core::EvaluatedCase>& non_failures,
                        InducerClient& inducer) {
    FailureMode mode;
    mode.cluster = evidence.cluster;
    mode.evidence = evidence;
    for (std::size_t i = 0; i < assignment.labels.size(); ++i)
        if (assignment.labels[i] == evidence.cluster)
            mode.member_ids.push_back(assignment.case_ids[i]);
    std::string prompt = build_induction_prompt(evidence, failures, non_failures);
    mode.description = inducer.induce(prompt);
    if (mode.description.empty())
        throw std::runtime_error("inducer returned an empty description");
    return mode;
}

// ---------------------------------------------------------------------------

json ClusterAssignment::to_json() const {
    return json{{"case_ids", case_ids},
                {"labels", labels},
                {"k", k},
                {"centroids", centroids}};
}

ClusterAssignment ClusterAssignment::from_json(const json& j) {
    ClusterAssignment a;
    a.case_ids = j.at("case_ids").get<std::vector<std::string>>();
    a.labels = j.at("labels").get<std::vector<int>>();
    a.k = j.at("k").get<int>();
    a.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    return a;
}

json to_json(const FailureMode& m) {
    json pairs = json::array();
    for (const auto& [f, s] : m.evidence.boundary)
        pairs.push_back(json{{"failure", f}, {"contrast", s}});
    return json{{"cluster", m.cluster},
                {"description", m.description},
                {"member_ids", m.member_ids},
                {"evidence",
                 {{"central", m.evidence.central},
                  {"boundary", pairs},
                  {"small_cluster_all", m.evidence.small_cluster_all},
                  {"missing_contrasts", m.evidence.missing_contrasts}}}};
}

FailureMode failure_mode_from_json(const json& j) {
    FailureMode m;
    m.cluster = j.at("cluster").get<int>();
    m.description = j.at("description").get<std::string>();
    m.member_ids = j.at("member_ids").get<std::vector<std::string>>();
    const auto& ev = j.at("evidence");
    m.evidence.cluster = m.cluster;
    m.evidence.central = ev.at("central").get<std::vector<std::string>>();
    for (const auto& p : ev.at("boundary"))
        m.evidence.boundary.emplace_back(p.at("failure").get<std::string>(),
                                         p.at("contrast").get<std::string>());
    m.evidence.small_cluster_all = ev.value("small_cluster_all", false);
    m.evidence.missing_contrasts = ev.value("missing_contrasts", false);
    return m;
}

}  // namespace probe::mine
