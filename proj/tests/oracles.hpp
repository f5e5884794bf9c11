// Independent reference implementations used only by tests. Everything here
// is written directly from definitions (dense matrices, explicit loops) and
// shares no propagation/metric code with the library.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hmlet/graph.hpp"
#include "hmlet/model.hpp"
#include "hmlet/trainer.hpp"

namespace oracles {

// Dense D^{-1/2} A D^{-1/2} over users+items built from the training lists.
std::vector<std::vector<double>> dense_normalized_adjacency(const hmlet::InteractionGraph& g);

// Straight-line 4-layer linear GCN: E[i] = A_hat * E[i-1], score =
// 1/5 * sum_i dot(E_i[u], E_i[U+v]). Dense matrices throughout.
struct LinearGcnOracle {
    std::vector<std::vector<std::vector<double>>> layers; // 5 x n x d
    std::size_t num_users = 0;
    std::size_t dim = 0;

    double score(std::size_t user, std::size_t item) const;
};
LinearGcnOracle linear_gcn_forward(const std::vector<std::vector<double>>& a_hat,
                                   const hmlet::DenseMatrix& e0, std::size_t num_users);

// Analytic gradient of sum over triplets of (d_pos * score(u,i) +
// d_neg * score(u,j)) w.r.t. e0, by explicit dense back-substitution.
std::vector<std::vector<double>> linear_gcn_grad(
    const std::vector<std::vector<double>>& a_hat, const hmlet::DenseMatrix& e0,
    std::size_t num_users, std::span<const hmlet::TripletGrad> grads);

// Repeat-until-stable degree filter over explicit pair scans.
hmlet::RawInteractions naive_kcore(const hmlet::RawInteractions& raw, std::size_t k);

// Dense power iteration with teleportation and dangling redistribution.
std::vector<double> dense_pagerank(const std::vector<std::vector<std::int32_t>>& adj,
                                   double damping, std::size_t iters);

// All-pairs BFS dependency counting: sigma products per unordered pair,
// extended-precision accumulation, scaled by 2/((n-1)(n-2)).
std::vector<double> brute_betweenness(const std::vector<std::vector<std::int32_t>>& adj);

// Per-node BFS distances folded by the component-scaled closeness formula.
std::vector<double> brute_closeness(const std::vector<std::vector<std::int32_t>>& adj);

// Metric references by direct definition over explicit sets.
double ref_ndcg(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                std::size_t k);
double ref_recall(std::span<const std::int32_t> ranked, std::span<const std::int32_t> relevant,
                  std::size_t k);
double ref_precision(std::span<const std::int32_t> ranked,
                     std::span<const std::int32_t> relevant, std::size_t k);

// Two-block bipartite generator: users/items split into two halves, each
// within-block pair drawn with rate p_in, cross-block with p_out.
hmlet::RawInteractions two_block_graph(std::size_t users, std::size_t items, double p_in,
                                       double p_out, std::uint64_t seed);

// Erdos-Renyi-style undirected graph as neighbor lists.
std::vector<std::vector<std::int32_t>> random_graph(std::size_t n, double p, std::uint64_t seed);

// Random bipartite interactions with every user given at least one item.
hmlet::RawInteractions random_bipartite(std::size_t users, std::size_t items, double p,
                                        std::uint64_t seed);

// Central-difference check of the analytic gradients against the relaxed
// replay of a train-mode forward pass. Covers every e0 coordinate and every
// gating parameter; returns the worst relative error.
struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};
GradCheck gradcheck(const hmlet::Csr& adj, hmlet::ModelParams params,
                    const hmlet::VariantSpec& variant,
                    std::span<const hmlet::Triplet> batch, double lambda,
                    const hmlet::ForwardOptions& opts, double h);

} // namespace oracles
