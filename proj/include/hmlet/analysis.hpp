#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hmlet/graph.hpp"
#include "hmlet/model.hpp"

namespace hmlet {

enum class NodeClass : std::uint8_t { FNL = 0, PNL = 1, FL = 2 };

// FNL: every gated-layer decision was non-linear. FL: every decision was
// linear. PNL: mixed. Requires a log covering all nodes at >= 1 gated layer.
std::vector<NodeClass> classify_nodes(const GateDecisionLog& log, std::size_t num_nodes);

// Unweighted training-interaction bipartite graph as neighbor lists over the
// combined node set (users first).
using NeighborLists = std::vector<std::vector<std::int32_t>>;
NeighborLists build_unweighted(const InteractionGraph& graph);

// Power iteration with uniform teleportation and uniform redistribution of
// dangling mass; stops when the L1 change drops below tol.
std::vector<double> pagerank(const NeighborLists& adj, double damping = 0.85,
                             double tol = 1e-10, std::size_t max_iter = 10000);

// Brandes' algorithm on unweighted BFS shortest paths. Per-source
// dependencies are accumulated in extended precision and rounded once per
// node, so any mathematically equal accumulation order produces the same
// doubles. Normalized for undirected graphs (pairwise dependencies counted
// once, scaled by 2/((n-1)(n-2))).
std::vector<double> betweenness(const NeighborLists& adj);

// Per node v in a component of size n_v: (n_v-1)/sum of BFS distances,
// scaled by (n_v-1)/(n-1). Isolated nodes score 0.
std::vector<double> closeness(const NeighborLists& adj);

struct BoxStats {
    double whisker_lo = 0.0; // smallest value >= q1 - 1.5*iqr
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_hi = 0.0; // largest value <= q3 + 1.5*iqr
    std::size_t count = 0;
};

BoxStats box_stats(std::vector<double> values);

struct DegreeBin {
    std::int64_t min_degree = 0;
    std::int64_t max_degree = 0;
    std::size_t count = 0;
    std::array<double, 3> class_pct{}; // FNL, PNL, FL
};

struct SimilarityStats {
    double mean = 0.0;
    double variance = 0.0; // population variance
    std::size_t count = 0;
};

struct AnalysisReport {
    std::array<double, 3> class_pct{};                     // FNL, PNL, FL
    std::array<std::size_t, 3> class_count{};
    std::vector<DegreeBin> degree_bins;                    // 10 equal-count bins
    std::array<std::array<BoxStats, 3>, 3> centrality_box; // [pr, btw, cls][class]
    std::array<SimilarityStats, 3> similarity;
};

// Degree-decile class ratios, per-class centrality box statistics, and the
// per-class cosine similarity between each node's embedding row and its
// training neighbors' rows.
AnalysisReport class_report(const std::vector<NodeClass>& classes,
                            const std::vector<double>& pr, const std::vector<double>& btw,
                            const std::vector<double>& cls, const InteractionGraph& graph,
                            const DenseMatrix& embeddings);

} // namespace hmlet
