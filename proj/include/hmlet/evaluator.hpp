#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hmlet/graph.hpp"
#include "hmlet/model.hpp"

namespace hmlet {

enum class EvalSplit { Val, Test };

struct MetricsReport {
    std::size_t k = 0;
    double ndcg = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    std::size_t num_users_evaluated = 0;
    std::vector<double> per_user_ndcg;
    std::vector<double> per_user_recall;
    std::vector<double> per_user_precision;
    std::vector<std::int32_t> evaluated_users;
};

// Top-k item indices by score over the allowed candidates; excluded items
// never appear; ties broken by ascending item index.
std::vector<std::int32_t> rank_items(std::span<const double> scores,
                                     std::span<const std::int32_t> excluded_sorted,
                                     std::size_t k);

// DCG with binary relevance over log2(position+1); IDCG truncates at
// min(k, |relevant|). Returns 0 when nothing relevant is ranked.
double ndcg_at_k(std::span<const std::int32_t> ranked,
                 std::span<const std::int32_t> relevant_sorted, std::size_t k);
double recall_at_k(std::span<const std::int32_t> ranked,
                   std::span<const std::int32_t> relevant_sorted, std::size_t k);
double precision_at_k(std::span<const std::int32_t> ranked,
                      std::span<const std::int32_t> relevant_sorted, std::size_t k);

// Eval-mode forward once, then per-user ranking metrics averaged over users
// with a nonempty target set. Validation excludes each user's train items
// from the candidates; test excludes train and val.
MetricsReport evaluate(const ModelParams& params, const InteractionGraph& graph,
                       const Csr& adj, EvalSplit split, std::size_t k = 20,
                       Activation phi = Activation::LeakyRelu);

// Same, but reuses an existing eval-mode trace.
MetricsReport evaluate_trace(const ForwardTrace& trace, const ModelParams& params,
                             const InteractionGraph& graph, EvalSplit split, std::size_t k);

} // namespace hmlet
