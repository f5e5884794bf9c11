#pragma once

#include <string>

#include <json.hpp>

#include "hmlet/analysis.hpp"
#include "hmlet/evaluator.hpp"
#include "hmlet/trainer.hpp"

namespace hmlet {

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& r,
                                              const std::string& variant,
                                              const std::string& checkpoint_id) {
    nlohmann::ordered_json j;
    j["k"] = r.k;
    j["ndcg"] = r.ndcg;
    j["recall"] = r.recall;
    j["precision"] = r.precision;
    j["num_users"] = r.num_users_evaluated;
    j["variant"] = variant;
    j["checkpoint_id"] = checkpoint_id;
    return j;
}

inline nlohmann::ordered_json box_to_json(const BoxStats& b) {
    return {{"whisker_lo", b.whisker_lo}, {"q1", b.q1},      {"median", b.median},
            {"q3", b.q3},                 {"whisker_hi", b.whisker_hi}, {"count", b.count}};
}

inline nlohmann::ordered_json analysis_to_json(const AnalysisReport& r) {
    static const char* kClassNames[3] = {"FNL", "PNL", "FL"};
    static const char* kMetricNames[3] = {"pagerank", "betweenness", "closeness"};
    nlohmann::ordered_json j;
    for (std::size_t c = 0; c < 3; ++c) {
        j["class_sizes_pct"][kClassNames[c]] = r.class_pct[c];
        j["class_counts"][kClassNames[c]] = r.class_count[c];
    }
    j["degree_bins"] = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < r.degree_bins.size(); ++b) {
        const auto& bin = r.degree_bins[b];
        nlohmann::ordered_json jb;
        jb["bin"] = b + 1;
        jb["min_degree"] = bin.min_degree;
        jb["max_degree"] = bin.max_degree;
        jb["count"] = bin.count;
        for (std::size_t c = 0; c < 3; ++c) jb["class_pct"][kClassNames[c]] = bin.class_pct[c];
        j["degree_bins"].push_back(jb);
    }
    for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t c = 0; c < 3; ++c) {
            j["centrality"][kMetricNames[m]][kClassNames[c]] =
                box_to_json(r.centrality_box[m][c]);
        }
    }
    for (std::size_t c = 0; c < 3; ++c) {
        j["similarity"][kClassNames[c]] = {{"mean", r.similarity[c].mean},
                                           {"variance", r.similarity[c].variance},
                                           {"count", r.similarity[c].count}};
    }
    return j;
}

inline nlohmann::ordered_json epoch_to_json(const EpochStats& s) {
    nlohmann::ordered_json j;
    j["epoch"] = s.epoch;
    j["loss"] = s.loss;
    j["tau"] = s.tau;
    j["val_ndcg"] = s.val_ndcg;
    j["val_recall"] = s.val_recall;
    j["val_precision"] = s.val_precision;
    j["gate_linear_ratio"] = s.gate_linear;
    return j;
}

} // namespace hmlet
