#include "hmlet/evaluator.hpp"

#include <algorithm>
#include <cmath>

namespace hmlet {

std::vector<std::int32_t> rank_items(std::span<const double> scores,
                                     std::span<const std::int32_t> excluded_sorted,
                                     std::size_t k) {
    std::vector<std::int32_t> candidates;
    candidates.reserve(scores.size());
    for (std::int32_t v = 0; v < static_cast<std::int32_t>(scores.size()); ++v) {
        if (!std::binary_search(excluded_sorted.begin(), excluded_sorted.end(), v)) {
            candidates.push_back(v);
        }
    }
    const std::size_t take = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + take, candidates.end(),
                      [&scores](std::int32_t a, std::int32_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    candidates.resize(take);
    return candidates;
}

double ndcg_at_k(std::span<const std::int32_t> ranked,
                 std::span<const std::int32_t> relevant_sorted, std::size_t k) {
    if (relevant_sorted.empty()) return 0.0;
    double dcg = 0.0;
    const std::size_t upto = std::min(k, ranked.size());
    for (std::size_t p = 0; p < upto; ++p) {
        if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), ranked[p])) {
            dcg += 1.0 / std::log2(static_cast<double>(p + 2));
        }
    }
    if (dcg == 0.0) return 0.0;
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, relevant_sorted.size());
    for (std::size_t p = 0; p < ideal; ++p) {
        idcg += 1.0 / std::log2(static_cast<double>(p + 2));
    }
    return dcg / idcg;
}

double recall_at_k(std::span<const std::int32_t> ranked,
                   std::span<const std::int32_t> relevant_sorted, std::size_t k) {
    if (relevant_sorted.empty()) return 0.0;
    std::size_t hits = 0;
    const std::size_t upto = std::min(k, ranked.size());
    for (std::size_t p = 0; p < upto; ++p) {
        if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), ranked[p])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(relevant_sorted.size());
}

double precision_at_k(std::span<const std::int32_t> ranked,
                      std::span<const std::int32_t> relevant_sorted, std::size_t k) {
    std::size_t hits = 0;
    const std::size_t upto = std::min(k, ranked.size());
    for (std::size_t p = 0; p < upto; ++p) {
        if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), ranked[p])) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

MetricsReport evaluate_trace(const ForwardTrace& trace, const ModelParams& params,
                             const InteractionGraph& graph, EvalSplit split, std::size_t k) {
    MetricsReport report;
    report.k = k;

    std::vector<std::int32_t> users;
    for (std::size_t u = 0; u < graph.num_users; ++u) {
        const auto& target = split == EvalSplit::Val ? graph.val[u] : graph.test[u];
        if (!target.empty()) users.push_back(static_cast<std::int32_t>(u));
    }
    report.evaluated_users = users;
    report.num_users_evaluated = users.size();
    report.per_user_ndcg.resize(users.size());
    report.per_user_recall.resize(users.size());
    report.per_user_precision.resize(users.size());
    if (users.empty()) return report;

#pragma omp parallel
    {
        std::vector<double> scores(graph.num_items);
        std::vector<std::int32_t> excluded;
#pragma omp for schedule(static)
        for (std::size_t idx = 0; idx < users.size(); ++idx) {
            const std::size_t u = static_cast<std::size_t>(users[idx]);
            const auto& target = split == EvalSplit::Val ? graph.val[u] : graph.test[u];

            excluded.clear();
            if (split == EvalSplit::Val) {
                excluded = graph.train[u];
            } else {
                excluded.resize(graph.train[u].size() + graph.val[u].size());
                std::merge(graph.train[u].begin(), graph.train[u].end(), graph.val[u].begin(),
                           graph.val[u].end(), excluded.begin());
            }

            score_row(trace, params, u, scores);
            const auto ranked = rank_items(scores, excluded, k);
            report.per_user_ndcg[idx] = ndcg_at_k(ranked, target, k);
            report.per_user_recall[idx] = recall_at_k(ranked, target, k);
            report.per_user_precision[idx] = precision_at_k(ranked, target, k);
        }
    }

    for (std::size_t i = 0; i < users.size(); ++i) {
        report.ndcg += report.per_user_ndcg[i];
        report.recall += report.per_user_recall[i];
        report.precision += report.per_user_precision[i];
    }
    const double n = static_cast<double>(users.size());
    report.ndcg /= n;
    report.recall /= n;
    report.precision /= n;
    return report;
}

MetricsReport evaluate(const ModelParams& params, const InteractionGraph& graph, const Csr& adj,
                       EvalSplit split, std::size_t k, Activation phi) {
    ForwardOptions opts;
    opts.mode = RunMode::Eval;
    opts.phi = phi;
    const VariantSpec spec = layer_plan(params.variant);
    const ForwardTrace trace = forward(adj, params, spec, opts);
    return evaluate_trace(trace, params, graph, split, k);
}

} // namespace hmlet
