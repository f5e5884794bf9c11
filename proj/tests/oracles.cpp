#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "hmlet/rng.hpp"

namespace oracles {

std::vector<std::vector<double>> dense_normalized_adjacency(const hmlet::InteractionGraph& g) {
    const std::size_t n = g.num_nodes();
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (std::size_t u = 0; u < g.num_users; ++u) {
        for (auto v : g.train[u]) {
            const std::size_t vr = g.num_users + static_cast<std::size_t>(v);
            const double w = 1.0 / std::sqrt(static_cast<double>(g.user_degree[u]) *
                                             static_cast<double>(g.item_degree[v]));
            a[u][vr] = w;
            a[vr][u] = w;
        }
    }
    return a;
}

namespace {

std::vector<std::vector<double>> dense_mul(const std::vector<std::vector<double>>& a,
                                           const std::vector<std::vector<double>>& x) {
    const std::size_t n = a.size();
    const std::size_t d = x[0].size();
    std::vector<std::vector<double>> out(n, std::vector<double>(d, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (a[r][c] == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) out[r][k] += a[r][c] * x[c][k];
        }
    }
    return out;
}

} // namespace

double LinearGcnOracle::score(std::size_t user, std::size_t item) const {
    double s = 0.0;
    for (const auto& e : layers) {
        for (std::size_t k = 0; k < dim; ++k) {
            s += e[user][k] * e[num_users + item][k];
        }
    }
    return s / static_cast<double>(layers.size());
}

LinearGcnOracle linear_gcn_forward(const std::vector<std::vector<double>>& a_hat,
                                   const hmlet::DenseMatrix& e0, std::size_t num_users) {
    LinearGcnOracle o;
    o.num_users = num_users;
    o.dim = e0.cols;
    std::vector<std::vector<double>> cur(e0.rows, std::vector<double>(e0.cols));
    for (std::size_t r = 0; r < e0.rows; ++r) {
        for (std::size_t c = 0; c < e0.cols; ++c) cur[r][c] = e0.at(r, c);
    }
    o.layers.push_back(cur);
    for (int i = 0; i < 4; ++i) {
        cur = dense_mul(a_hat, cur);
        o.layers.push_back(cur);
    }
    return o;
}

std::vector<std::vector<double>> linear_gcn_grad(
    const std::vector<std::vector<double>>& a_hat, const hmlet::DenseMatrix& e0,
    std::size_t num_users, std::span<const hmlet::TripletGrad> grads) {
    const LinearGcnOracle fwd = linear_gcn_forward(a_hat, e0, num_users);
    const std::size_t n = e0.rows;
    const std::size_t d = e0.cols;
    const double beta = 1.0 / 5.0;

    // d loss / d E_i for each layer, then pull back through A_hat (symmetric).
    std::vector<std::vector<double>> acc(n, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> total(n, std::vector<double>(d, 0.0));
    for (int i = 4; i >= 0; --i) {
        for (const auto& t : grads) {
            const auto& e = fwd.layers[static_cast<std::size_t>(i)];
            const std::size_t pu = static_cast<std::size_t>(t.user);
            const std::size_t pi = num_users + static_cast<std::size_t>(t.pos_item);
            const std::size_t pj = num_users + static_cast<std::size_t>(t.neg_item);
            for (std::size_t k = 0; k < d; ++k) {
                acc[pu][k] += beta * (t.d_pos * e[pi][k] + t.d_neg * e[pj][k]);
                acc[pi][k] += beta * t.d_pos * e[pu][k];
                acc[pj][k] += beta * t.d_neg * e[pu][k];
            }
        }
        if (i > 0) {
            acc = dense_mul(a_hat, acc);
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < d; ++k) total[r][k] = acc[r][k];
    }
    return total;
}

hmlet::RawInteractions naive_kcore(const hmlet::RawInteractions& raw, std::size_t k) {
    auto pairs = raw.pairs;
    while (true) {
        std::map<std::string, std::size_t> ud, id;
        for (const auto& [u, v] : pairs) {
            ++ud[u];
            ++id[v];
        }
        std::vector<std::pair<std::string, std::string>> next;
        for (const auto& p : pairs) {
            if (ud[p.first] >= k && id[p.second] >= k) next.push_back(p);
        }
        if (next.size() == pairs.size()) break;
        pairs = std::move(next);
    }
    hmlet::RawInteractions out;
    out.pairs = std::move(pairs);
    return out;
}

std::vector<double> dense_pagerank(const std::vector<std::vector<std::int32_t>>& adj,
                                   double damping, std::size_t iters) {
    const std::size_t n = adj.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t u = 0; u < n; ++u) {
        if (adj[u].empty()) {
            for (std::size_t v = 0; v < n; ++v) m[v][u] = 1.0 / static_cast<double>(n);
        } else {
            for (auto v : adj[u]) m[v][u] = 1.0 / static_cast<double>(adj[u].size());
        }
    }
    std::vector<double> pr(n, 1.0 / static_cast<double>(n)), next(n);
    for (std::size_t it = 0; it < iters; ++it) {
        for (std::size_t v = 0; v < n; ++v) {
            double s = 0.0;
            for (std::size_t u = 0; u < n; ++u) s += m[v][u] * pr[u];
            next[v] = (1.0 - damping) / static_cast<double>(n) + damping * s;
        }
        pr.swap(next);
    }
    return pr;
}

std::vector<double> brute_betweenness(const std::vector<std::vector<std::int32_t>>& adj) {
    const std::size_t n = adj.size();
    std::vector<double> bc(n, 0.0);
    if (n <= 2) return bc;

    // Distances and path counts from every source.
    std::vector<std::vector<std::int32_t>> dist(n, std::vector<std::int32_t>(n, -1));
    std::vector<std::vector<double>> sigma(n, std::vector<double>(n, 0.0));
    for (std::size_t s = 0; s < n; ++s) {
        std::deque<std::int32_t> q;
        dist[s][s] = 0;
        sigma[s][s] = 1.0;
        q.push_back(static_cast<std::int32_t>(s));
        while (!q.empty()) {
            const auto v = q.front();
            q.pop_front();
            for (auto w : adj[v]) {
                if (dist[s][w] < 0) {
                    dist[s][w] = dist[s][v] + 1;
                    q.push_back(w);
                }
                if (dist[s][w] == dist[s][v] + 1) sigma[s][w] += sigma[s][v];
            }
        }
    }

    std::vector<__float128> acc(n, 0);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = s + 1; t < n; ++t) {
            if (dist[s][t] < 0) continue;
            for (std::size_t v = 0; v < n; ++v) {
                if (v == s || v == t) continue;
                if (dist[s][v] < 0 || dist[t][v] < 0) continue;
                if (dist[s][v] + dist[t][v] != dist[s][t]) continue;
                acc[v] += __float128(sigma[s][v] * sigma[t][v]) / __float128(sigma[s][t]);
            }
        }
    }
    const __float128 scale = __float128(2) / (__float128(static_cast<double>(n - 1)) *
                                              __float128(static_cast<double>(n - 2)));
    for (std::size_t v = 0; v < n; ++v) bc[v] = static_cast<double>(acc[v] * scale);
    return bc;
}

std::vector<double> brute_closeness(const std::vector<std::vector<std::int32_t>>& adj) {
    const std::size_t n = adj.size();
    std::vector<double> out(n, 0.0);
    if (n <= 1) return out;
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::int32_t> dist(n, -1);
        std::deque<std::int32_t> q;
        dist[s] = 0;
        q.push_back(static_cast<std::int32_t>(s));
        while (!q.empty()) {
            const auto v = q.front();
            q.pop_front();
            for (auto w : adj[v]) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        std::int64_t sum = 0, reached = 0;
        for (std::size_t v = 0; v < n; ++v) {
            if (v != s && dist[v] >= 0) {
                sum += dist[v];
                ++reached;
            }
        }
        if (reached == 0) {
            out[s] = 0.0;
        } else {
            const double nv1 = static_cast<double>(reached);
            out[s] = (nv1 / static_cast<double>(n - 1)) * (nv1 / static_cast<double>(sum));
        }
    }
    return out;
}

double ref_ndcg(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                std::size_t k) {
    if (relevant.empty()) return 0.0;
    const std::set<std::int32_t> rel(relevant.begin(), relevant.end());
    double dcg = 0.0;
    for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) {
        if (rel.count(ranked[p]) > 0) dcg += 1.0 / std::log2(static_cast<double>(p + 2));
    }
    if (dcg == 0.0) return 0.0;
    double idcg = 0.0;
    for (std::size_t p = 0; p < std::min(k, rel.size()); ++p) {
        idcg += 1.0 / std::log2(static_cast<double>(p + 2));
    }
    return dcg / idcg;
}

double ref_recall(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                  std::size_t k) {
    if (relevant.empty()) return 0.0;
    const std::set<std::int32_t> rel(relevant.begin(), relevant.end());
    std::size_t hits = 0;
    for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) {
        if (rel.count(ranked[p]) > 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(rel.size());
}

double ref_precision(std::span<const std::int32_t> ranked,
                     std::span<const std::int32_t> relevant, std::size_t k) {
    const std::set<std::int32_t> rel(relevant.begin(), relevant.end());
    std::size_t hits = 0;
    for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) {
        if (rel.count(ranked[p]) > 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

hmlet::RawInteractions two_block_graph(std::size_t users, std::size_t items, double p_in,
                                       double p_out, std::uint64_t seed) {
    hmlet::Rng rng(seed);
    hmlet::RawInteractions raw;
    for (std::size_t u = 0; u < users; ++u) {
        const bool ub = u < users / 2;
        for (std::size_t v = 0; v < items; ++v) {
            const bool vb = v < items / 2;
            const double p = ub == vb ? p_in : p_out;
            if (rng.next_double() < p) {
                raw.pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(v));
            }
        }
    }
    return raw;
}

std::vector<std::vector<std::int32_t>> random_graph(std::size_t n, double p,
                                                    std::uint64_t seed) {
    hmlet::Rng rng(seed);
    std::vector<std::vector<std::int32_t>> adj(n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if (rng.next_double() < p) {
                adj[a].push_back(static_cast<std::int32_t>(b));
                adj[b].push_back(static_cast<std::int32_t>(a));
            }
        }
    }
    return adj;
}

hmlet::RawInteractions random_bipartite(std::size_t users, std::size_t items, double p,
                                        std::uint64_t seed) {
    hmlet::Rng rng(seed);
    hmlet::RawInteractions raw;
    for (std::size_t u = 0; u < users; ++u) {
        bool any = false;
        for (std::size_t v = 0; v < items; ++v) {
            if (rng.next_double() < p) {
                raw.pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(v));
                any = true;
            }
        }
        if (!any) {
            const std::size_t v = rng.next_below(items);
            raw.pairs.emplace_back("u" + std::to_string(u), "i" + std::to_string(v));
        }
    }
    return raw;
}

GradCheck gradcheck(const hmlet::Csr& adj, hmlet::ModelParams params,
                    const hmlet::VariantSpec& variant,
                    std::span<const hmlet::Triplet> batch, double lambda,
                    const hmlet::ForwardOptions& opts, double h) {
    using namespace hmlet;
    const ForwardTrace base = forward(adj, params, variant, opts);
    const BatchLoss loss = bpr_batch_loss(base, params, batch, lambda);
    ParamGrads analytic = backward(base, adj, params, variant, loss.grads);
    add_l2_grads(analytic, params, batch, lambda);

    const auto replay_loss = [&]() {
        const ForwardTrace t = forward_relaxed_replay(adj, params, variant, base);
        return bpr_batch_loss(t, params, batch, lambda).total;
    };

    GradCheck result;
    const auto check_coord = [&](double& coord, double grad) {
        const double orig = coord;
        coord = orig + h;
        const double lp = replay_loss();
        coord = orig - h;
        const double lm = replay_loss();
        coord = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double rel =
            std::abs(grad - fd) / std::max({std::abs(grad), std::abs(fd), 1e-6});
        result.max_rel_err = std::max(result.max_rel_err, rel);
        ++result.coords_checked;
    };

    for (std::size_t k = 0; k < params.embeddings.data.size(); ++k) {
        check_coord(params.embeddings.data[k], analytic.embeddings.data[k]);
    }
    for (std::size_t g = 0; g < params.gating.size(); ++g) {
        auto& mlp = params.gating[g];
        auto& mg = analytic.gating[g];
        for (std::size_t k = 0; k < mlp.w1.data.size(); ++k) {
            check_coord(mlp.w1.data[k], mg.w1.data[k]);
        }
        for (std::size_t k = 0; k < mlp.b1.size(); ++k) check_coord(mlp.b1[k], mg.b1[k]);
        for (std::size_t k = 0; k < mlp.w2.data.size(); ++k) {
            check_coord(mlp.w2.data[k], mg.w2.data[k]);
        }
        for (std::size_t k = 0; k < mlp.b2.size(); ++k) check_coord(mlp.b2[k], mg.b2[k]);
    }
    return result;
}

} // namespace oracles
