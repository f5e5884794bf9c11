#include "hmlet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace hmlet {

std::vector<NodeClass> classify_nodes(const GateDecisionLog& log, std::size_t num_nodes) {
    if (log.layers.empty()) {
        throw std::invalid_argument("classify_nodes: no gated layers in the decision log");
    }
    for (const auto& d : log.decisions) {
        if (d.size() != num_nodes) {
            throw std::invalid_argument("classify_nodes: decision log does not cover all nodes");
        }
    }
    std::vector<NodeClass> classes(num_nodes);
    for (std::size_t v = 0; v < num_nodes; ++v) {
        bool any_linear = false, any_nonlinear = false;
        for (const auto& d : log.decisions) {
            if (d[v] == kLinearBranch) {
                any_linear = true;
            } else {
                any_nonlinear = true;
            }
        }
        classes[v] = any_linear && any_nonlinear ? NodeClass::PNL
                     : any_nonlinear             ? NodeClass::FNL
                                                 : NodeClass::FL;
    }
    return classes;
}

NeighborLists build_unweighted(const InteractionGraph& graph) {
    NeighborLists adj(graph.num_nodes());
    for (std::size_t u = 0; u < graph.num_users; ++u) {
        for (auto v : graph.train[u]) {
            adj[u].push_back(static_cast<std::int32_t>(graph.num_users + v));
            adj[graph.num_users + v].push_back(static_cast<std::int32_t>(u));
        }
    }
    return adj;
}

std::vector<double> pagerank(const NeighborLists& adj, double damping, double tol,
                             std::size_t max_iter) {
    const std::size_t n = adj.size();
    if (n == 0) return {};
    std::vector<double> pr(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        double dangling = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            if (adj[v].empty()) dangling += pr[v];
        }
        const double base =
            (1.0 - damping) / static_cast<double>(n) + damping * dangling / static_cast<double>(n);
#pragma omp parallel for schedule(static)
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (auto u : adj[v]) {
                s += pr[u] / static_cast<double>(adj[u].size());
            }
            next[v] = base + damping * s;
        }
        double l1 = 0.0;
        for (std::size_t v = 0; v < n; ++v) l1 += std::abs(next[v] - pr[v]);
        pr.swap(next);
        if (l1 < tol) return pr;
    }
    throw std::runtime_error("pagerank: no convergence after " + std::to_string(max_iter) +
                             " iterations");
}

std::vector<double> betweenness(const NeighborLists& adj) {
    const std::size_t n = adj.size();
    std::vector<double> bc(n, 0.0);
    if (n <= 2) return bc;

    std::vector<__float128> acc(n, 0);

#pragma omp parallel
    {
        std::vector<__float128> local(n, 0);
        std::vector<std::int32_t> dist(n);
        std::vector<double> sigma(n);
        std::vector<__float128> delta(n);
        std::vector<std::vector<std::int32_t>> preds(n);
        std::vector<std::int32_t> order;
        order.reserve(n);

#pragma omp for schedule(static)
        for (std::size_t s = 0; s < n; ++s) {
            std::fill(dist.begin(), dist.end(), -1);
            std::fill(sigma.begin(), sigma.end(), 0.0);
            std::fill(delta.begin(), delta.end(), __float128(0));
            for (auto& p : preds) p.clear();
            order.clear();

            std::deque<std::int32_t> queue;
            dist[s] = 0;
            sigma[s] = 1.0;
            queue.push_back(static_cast<std::int32_t>(s));
            while (!queue.empty()) {
                const std::int32_t v = queue.front();
                queue.pop_front();
                order.push_back(v);
                for (auto w : adj[v]) {
                    if (dist[w] < 0) {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if (dist[w] == dist[v] + 1) {
                        sigma[w] += sigma[v];
                        preds[w].push_back(v);
                    }
                }
            }
            for (auto it = order.rbegin(); it != order.rend(); ++it) {
                const std::int32_t w = *it;
                for (auto v : preds[w]) {
                    delta[v] += (__float128(sigma[v]) / __float128(sigma[w])) *
                                (__float128(1) + delta[w]);
                }
                if (w != static_cast<std::int32_t>(s)) local[w] += delta[w];
            }
        }

#pragma omp critical
        for (std::size_t v = 0; v < n; ++v) acc[v] += local[v];
    }

    // Each unordered pair was counted from both endpoints; fold the halving
    // into the undirected normalization.
    const __float128 scale =
        __float128(1) / (__float128(static_cast<double>(n - 1)) * __float128(static_cast<double>(n - 2)));
    for (std::size_t v = 0; v < n; ++v) {
        bc[v] = static_cast<double>(acc[v] * scale);
    }
    return bc;
}

std::vector<double> closeness(const NeighborLists& adj) {
    const std::size_t n = adj.size();
    std::vector<double> out(n, 0.0);
    if (n <= 1) return out;

#pragma omp parallel
    {
        std::vector<std::int32_t> dist(n);
        std::deque<std::int32_t> queue;
#pragma omp for schedule(static)
        for (std::size_t s = 0; s < n; ++s) {
            std::fill(dist.begin(), dist.end(), -1);
            queue.clear();
            dist[s] = 0;
            queue.push_back(static_cast<std::int32_t>(s));
            std::int64_t sum = 0;
            std::int64_t reached = 1;
            while (!queue.empty()) {
                const std::int32_t v = queue.front();
                queue.pop_front();
                for (auto w : adj[v]) {
                    if (dist[w] < 0) {
                        dist[w] = dist[v] + 1;
                        sum += dist[w];
                        ++reached;
                        queue.push_back(w);
                    }
                }
            }
            if (reached <= 1) {
                out[s] = 0.0;
            } else {
                const double nv1 = static_cast<double>(reached - 1);
                out[s] = (nv1 / static_cast<double>(n - 1)) * (nv1 / static_cast<double>(sum));
            }
        }
    }
    return out;
}

BoxStats box_stats(std::vector<double> values) {
    BoxStats b;
    b.count = values.size();
    if (values.empty()) return b;
    std::sort(values.begin(), values.end());
    const auto quantile = [&values](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= values.size()) return values.back();
        return values[lo] + frac * (values[lo + 1] - values[lo]);
    };
    b.q1 = quantile(0.25);
    b.median = quantile(0.5);
    b.q3 = quantile(0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_lo = values.back();
    b.whisker_hi = values.front();
    for (double v : values) {
        if (v >= lo_fence) {
            b.whisker_lo = v;
            break;
        }
    }
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
        if (*it <= hi_fence) {
            b.whisker_hi = *it;
            break;
        }
    }
    return b;
}

AnalysisReport class_report(const std::vector<NodeClass>& classes, const std::vector<double>& pr,
                            const std::vector<double>& btw, const std::vector<double>& cls,
                            const InteractionGraph& graph, const DenseMatrix& embeddings) {
    const std::size_t n = graph.num_nodes();
    if (classes.size() != n || pr.size() != n || btw.size() != n || cls.size() != n ||
        embeddings.rows != n) {
        throw std::invalid_argument("class_report: inconsistent node universes");
    }

    AnalysisReport rep;
    for (auto c : classes) ++rep.class_count[static_cast<std::size_t>(c)];
    for (std::size_t c = 0; c < 3; ++c) {
        rep.class_pct[c] =
            100.0 * static_cast<double>(rep.class_count[c]) / static_cast<double>(n);
    }

    // Ten equal-count bins over nodes sorted by training degree.
    std::vector<std::int64_t> degree(n);
    for (std::size_t u = 0; u < graph.num_users; ++u) degree[u] = graph.user_degree[u];
    for (std::size_t v = 0; v < graph.num_items; ++v) {
        degree[graph.num_users + v] = graph.item_degree[v];
    }
    std::vector<std::int32_t> by_degree(n);
    std::iota(by_degree.begin(), by_degree.end(), 0);
    std::sort(by_degree.begin(), by_degree.end(), [&degree](std::int32_t a, std::int32_t b) {
        if (degree[a] != degree[b]) return degree[a] < degree[b];
        return a < b;
    });
    rep.degree_bins.resize(10);
    for (std::size_t b = 0; b < 10; ++b) {
        const std::size_t lo = b * n / 10;
        const std::size_t hi = (b + 1) * n / 10;
        auto& bin = rep.degree_bins[b];
        bin.count = hi - lo;
        if (bin.count == 0) continue;
        bin.min_degree = degree[by_degree[lo]];
        bin.max_degree = degree[by_degree[hi - 1]];
        std::array<std::size_t, 3> counts{};
        for (std::size_t i = lo; i < hi; ++i) {
            ++counts[static_cast<std::size_t>(classes[by_degree[i]])];
        }
        for (std::size_t c = 0; c < 3; ++c) {
            bin.class_pct[c] =
                100.0 * static_cast<double>(counts[c]) / static_cast<double>(bin.count);
        }
    }

    const std::vector<double>* metrics[3] = {&pr, &btw, &cls};
    for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t c = 0; c < 3; ++c) {
            std::vector<double> vals;
            for (std::size_t v = 0; v < n; ++v) {
                if (static_cast<std::size_t>(classes[v]) == c) vals.push_back((*metrics[m])[v]);
            }
            rep.centrality_box[m][c] = box_stats(std::move(vals));
        }
    }

    // Cosine similarity along every training edge, credited to both
    // endpoints' classes.
    std::array<double, 3> sum{}, sum_sq{};
    std::array<std::size_t, 3> cnt{};
    const std::size_t dim = embeddings.cols;
    std::vector<double> norms(n);
    for (std::size_t v = 0; v < n; ++v) {
        norms[v] = std::sqrt(dot(std::span(embeddings.row(v), dim),
                                 std::span(embeddings.row(v), dim)));
    }
    for (std::size_t u = 0; u < graph.num_users; ++u) {
        for (auto v : graph.train[u]) {
            const std::size_t vr = graph.num_users + static_cast<std::size_t>(v);
            double c = 0.0;
            if (norms[u] > 0.0 && norms[vr] > 0.0) {
                c = dot(std::span(embeddings.row(u), dim), std::span(embeddings.row(vr), dim)) /
                    (norms[u] * norms[vr]);
            }
            for (const std::size_t node : {u, vr}) {
                const auto cls_idx = static_cast<std::size_t>(classes[node]);
                sum[cls_idx] += c;
                sum_sq[cls_idx] += c * c;
                ++cnt[cls_idx];
            }
        }
    }
    for (std::size_t c = 0; c < 3; ++c) {
        rep.similarity[c].count = cnt[c];
        if (cnt[c] > 0) {
            const double mean = sum[c] / static_cast<double>(cnt[c]);
            rep.similarity[c].mean = mean;
            rep.similarity[c].variance = sum_sq[c] / static_cast<double>(cnt[c]) - mean * mean;
        }
    }
    return rep;
}

} // namespace hmlet
