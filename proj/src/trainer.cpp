#include "hmlet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmlet/checkpoint.hpp"

namespace hmlet {

std::vector<Triplet> sample_batch(const InteractionGraph& graph, std::size_t batch_size,
                                  Rng& rng) {
    std::vector<std::size_t> prefix(graph.num_users + 1, 0);
    for (std::size_t u = 0; u < graph.num_users; ++u) {
        prefix[u + 1] = prefix[u] + graph.train[u].size();
    }
    const std::size_t total = prefix.back();
    if (total == 0) throw DataError("sample_batch: empty training set");

    std::vector<Triplet> batch;
    batch.reserve(batch_size);
    std::size_t consecutive_skips = 0;
    while (batch.size() < batch_size) {
        const std::size_t r = rng.next_below(total);
        const std::size_t u =
            static_cast<std::size_t>(std::upper_bound(prefix.begin(), prefix.end(), r) -
                                     prefix.begin()) -
            1;
        const auto& pos_items = graph.train[u];
        if (pos_items.size() >= graph.num_items) {
            // Cannot sample a negative for this user.
            if (++consecutive_skips > 10000) {
                throw DataError("sample_batch: no user admits a negative item");
            }
            continue;
        }
        consecutive_skips = 0;
        const std::int32_t pos = pos_items[r - prefix[u]];
        std::int32_t neg;
        do {
            neg = static_cast<std::int32_t>(rng.next_below(graph.num_items));
        } while (std::binary_search(pos_items.begin(), pos_items.end(), neg));
        batch.push_back({static_cast<std::int32_t>(u), pos, neg});
    }
    return batch;
}

BprTerm bpr_term(double score_pos, double score_neg) {
    const double delta = score_pos - score_neg;
    // -ln sigmoid(delta) = softplus(-delta), in overflow-safe form.
    const double loss = std::max(-delta, 0.0) + std::log1p(std::exp(-std::abs(delta)));
    const double sig_neg = 1.0 / (1.0 + std::exp(delta)); // sigmoid(-delta)
    return {loss, -sig_neg, sig_neg};
}

double l2_term(const ModelParams& params, std::span<const Triplet> batch, double lambda) {
    if (lambda == 0.0 || batch.empty()) return 0.0;
    const std::size_t dim = params.dim;
    double ego = 0.0;
    for (const auto& t : batch) {
        const double* ru = params.embeddings.row(t.user);
        const double* ri = params.embeddings.row(params.num_users + t.pos_item);
        const double* rj = params.embeddings.row(params.num_users + t.neg_item);
        for (std::size_t c = 0; c < dim; ++c) {
            ego += ru[c] * ru[c] + ri[c] * ri[c] + rj[c] * rj[c];
        }
    }
    ego /= static_cast<double>(batch.size());
    double gating = 0.0;
    for (const auto& mlp : params.gating) {
        for (double w : mlp.w1.data) gating += w * w;
        for (double b : mlp.b1) gating += b * b;
        for (double w : mlp.w2.data) gating += w * w;
        for (double b : mlp.b2) gating += b * b;
    }
    return lambda * (ego + gating);
}

BatchLoss bpr_batch_loss(const ForwardTrace& trace, const ModelParams& params,
                         std::span<const Triplet> batch, double lambda) {
    BatchLoss out;
    out.grads.reserve(batch.size());
    double rank = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& t : batch) {
        const double sp = score_pair(trace, params, t.user, t.pos_item);
        const double sn = score_pair(trace, params, t.user, t.neg_item);
        const BprTerm term = bpr_term(sp, sn);
        rank += term.loss;
        out.grads.push_back(
            {t.user, t.pos_item, t.neg_item, term.d_pos * inv_b, term.d_neg * inv_b});
    }
    out.rank = rank * inv_b;
    out.reg = l2_term(params, batch, lambda);
    out.total = out.rank + out.reg;
    return out;
}

void add_l2_grads(ParamGrads& grads, const ModelParams& params, std::span<const Triplet> batch,
                  double lambda) {
    if (lambda == 0.0 || batch.empty()) return;
    const std::size_t dim = params.dim;
    const double coef = 2.0 * lambda / static_cast<double>(batch.size());
    for (const auto& t : batch) {
        const std::size_t rows[3] = {static_cast<std::size_t>(t.user),
                                     params.num_users + static_cast<std::size_t>(t.pos_item),
                                     params.num_users + static_cast<std::size_t>(t.neg_item)};
        for (const std::size_t r : rows) {
            const double* src = params.embeddings.row(r);
            double* dst = grads.embeddings.row(r);
            for (std::size_t c = 0; c < dim; ++c) dst[c] += coef * src[c];
        }
    }
    for (std::size_t g = 0; g < params.gating.size(); ++g) {
        const auto& mlp = params.gating[g];
        auto& mg = grads.gating[g];
        for (std::size_t k = 0; k < mlp.w1.data.size(); ++k) {
            mg.w1.data[k] += 2.0 * lambda * mlp.w1.data[k];
        }
        for (std::size_t k = 0; k < mlp.b1.size(); ++k) mg.b1[k] += 2.0 * lambda * mlp.b1[k];
        for (std::size_t k = 0; k < mlp.w2.data.size(); ++k) {
            mg.w2.data[k] += 2.0 * lambda * mlp.w2.data[k];
        }
        for (std::size_t k = 0; k < mlp.b2.size(); ++k) mg.b2[k] += 2.0 * lambda * mlp.b2[k];
    }
}

double temperature(std::size_t epoch, const TrainConfig& cfg) {
    return std::max(cfg.tau_min,
                    cfg.tau0 * std::pow(cfg.tau_decay, static_cast<double>(epoch)));
}

double temperature_iter_exp(std::size_t iteration) {
    return std::exp(-0.001 * static_cast<double>(iteration));
}

Csr edge_dropout(const Csr& adj, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("edge_dropout: rate in [0,1)");
    if (rate == 0.0) return adj;
    const double scale = 1.0 / (1.0 - rate);

    // Every undirected edge appears once with row < col (users precede
    // items), so one sequential sweep decides both directions together.
    std::vector<std::vector<std::pair<std::int32_t, double>>> kept(adj.n);
    for (std::size_t r = 0; r < adj.n; ++r) {
        for (std::int64_t k = adj.row_ptr[r]; k < adj.row_ptr[r + 1]; ++k) {
            const std::int32_t c = adj.col_idx[k];
            if (c <= static_cast<std::int32_t>(r)) continue;
            if (rng.next_double() < rate) continue;
            const double w = adj.values[k] * scale;
            kept[r].emplace_back(c, w);
            kept[c].emplace_back(static_cast<std::int32_t>(r), w);
        }
    }

    Csr out;
    out.n = adj.n;
    out.row_ptr.assign(adj.n + 1, 0);
    for (std::size_t r = 0; r < adj.n; ++r) {
        out.row_ptr[r + 1] = out.row_ptr[r] + static_cast<std::int64_t>(kept[r].size());
    }
    out.col_idx.resize(out.row_ptr.back());
    out.values.resize(out.row_ptr.back());
    for (std::size_t r = 0; r < adj.n; ++r) {
        std::int64_t k = out.row_ptr[r];
        for (const auto& [c, w] : kept[r]) {
            out.col_idx[k] = c;
            out.values[k] = w;
            ++k;
        }
    }
    return out;
}

AdamState::AdamState(const ModelParams& params) {
    emb_.m.assign(params.embeddings.data.size(), 0.0);
    emb_.v.assign(params.embeddings.data.size(), 0.0);
    mlp_.resize(params.gating.size());
    for (std::size_t g = 0; g < params.gating.size(); ++g) {
        const auto& mlp = params.gating[g];
        mlp_[g][0].m.assign(mlp.w1.data.size(), 0.0);
        mlp_[g][0].v.assign(mlp.w1.data.size(), 0.0);
        mlp_[g][1].m.assign(mlp.b1.size(), 0.0);
        mlp_[g][1].v.assign(mlp.b1.size(), 0.0);
        mlp_[g][2].m.assign(mlp.w2.data.size(), 0.0);
        mlp_[g][2].v.assign(mlp.w2.data.size(), 0.0);
        mlp_[g][3].m.assign(mlp.b2.size(), 0.0);
        mlp_[g][3].v.assign(mlp.b2.size(), 0.0);
    }
}

void AdamState::step_tensor(std::vector<double>& x, const std::vector<double>& g, Moments& mom,
                            double lr) const {
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < x.size(); ++k) {
        mom.m[k] = kBeta1 * mom.m[k] + (1.0 - kBeta1) * g[k];
        mom.v[k] = kBeta2 * mom.v[k] + (1.0 - kBeta2) * g[k] * g[k];
        const double mhat = mom.m[k] / bc1;
        const double vhat = mom.v[k] / bc2;
        x[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
}

void AdamState::step(ModelParams& params, const ParamGrads& grads, double lr) {
    ++t_;
    step_tensor(params.embeddings.data, grads.embeddings.data, emb_, lr);
    for (std::size_t g = 0; g < params.gating.size(); ++g) {
        step_tensor(params.gating[g].w1.data, grads.gating[g].w1.data, mlp_[g][0], lr);
        step_tensor(params.gating[g].b1, grads.gating[g].b1, mlp_[g][1], lr);
        step_tensor(params.gating[g].w2.data, grads.gating[g].w2.data, mlp_[g][2], lr);
        step_tensor(params.gating[g].b2, grads.gating[g].b2, mlp_[g][3], lr);
    }
}

TrainResult train(const InteractionGraph& graph, const TrainConfig& cfg,
                  const VariantSpec& variant, const std::string& checkpoint_path,
                  const EpochCallback& on_epoch) {
    const Csr adj_full = build_adjacency(graph);
    ModelParams params = init_params(graph.num_users, graph.num_items, cfg.dim, variant,
                                     cfg.seed, cfg.mlp_hidden);
    AdamState adam(params);
    Rng neg_rng(derive_stream(cfg.seed, "negatives"));

    const std::size_t pairs = graph.num_train_pairs();
    const std::size_t num_batches = std::max<std::size_t>(1, (pairs + cfg.batch_size - 1) / cfg.batch_size);

    TrainResult result;
    result.best_val_ndcg = -std::numeric_limits<double>::infinity();
    std::size_t epochs_since_best = 0;
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::array<double, kNumLayers> ratio_acc{};
        double tau = cfg.tau_schedule == TauSchedule::EpochDecay ? temperature(epoch, cfg)
                                                                 : temperature_iter_exp(step);

        for (std::size_t b = 0; b < num_batches; ++b) {
            if (cfg.tau_schedule == TauSchedule::IterExp) tau = temperature_iter_exp(step);
            const std::vector<Triplet> batch = sample_batch(graph, cfg.batch_size, neg_rng);

            Csr dropped;
            const Csr* adj = &adj_full;
            if (cfg.dropout_rate > 0.0) {
                Rng drop_rng(derive_stream(cfg.seed, "dropout", step, 0, 0));
                dropped = edge_dropout(adj_full, cfg.dropout_rate, drop_rng);
                adj = &dropped;
            }

            ForwardOptions opts;
            opts.tau = tau;
            opts.mode = RunMode::Train;
            opts.phi = cfg.phi;
            opts.seed = cfg.seed;
            opts.step = step;
            const ForwardTrace trace = forward(*adj, params, variant, opts);

            const BatchLoss loss = bpr_batch_loss(trace, params, batch, cfg.lambda_l2);
            if (!std::isfinite(loss.total)) {
                throw TrainingDiverged("loss is not finite at epoch " + std::to_string(epoch) +
                                       ", step " + std::to_string(step));
            }

            ParamGrads grads = backward(trace, *adj, params, variant, loss.grads);
            add_l2_grads(grads, params, batch, cfg.lambda_l2);
            adam.step(params, grads, cfg.learning_rate);

            epoch_loss += loss.total;
            const auto ratios = gate_linear_ratios(trace, variant);
            for (std::size_t i = 0; i < kNumLayers; ++i) ratio_acc[i] += ratios[i];
            ++step;
        }

        const MetricsReport val =
            evaluate(params, graph, adj_full, EvalSplit::Val, cfg.eval_k, cfg.phi);

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = epoch_loss / static_cast<double>(num_batches);
        stats.tau = tau;
        stats.val_ndcg = val.ndcg;
        stats.val_recall = val.recall;
        stats.val_precision = val.precision;
        for (std::size_t i = 0; i < kNumLayers; ++i) {
            stats.gate_linear[i] = ratio_acc[i] / static_cast<double>(num_batches);
        }
        result.log.push_back(stats);
        if (on_epoch) on_epoch(stats, params);

        if (val.ndcg > result.best_val_ndcg) {
            result.best_val_ndcg = val.ndcg;
            result.best_epoch = epoch;
            result.best = params;
            epochs_since_best = 0;
            if (!checkpoint_path.empty()) save_checkpoint(params, checkpoint_path);
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= cfg.patience) break;
        }
    }

    if (result.log.empty()) throw ConfigError("train: max_epochs must be >= 1");
    if (result.best.embeddings.data.empty()) result.best = params;
    return result;
}

} // namespace hmlet
