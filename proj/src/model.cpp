#include "hmlet/model.hpp"

#include <cassert>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace hmlet {

std::size_t VariantSpec::num_gated_layers() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (l.gate == GateType::Gating) ++n;
    }
    return n;
}

VariantSpec layer_plan(Variant name) {
    const LayerPlan pg{NonlinearMode::Propagate, GateType::Gating};
    const LayerPlan bl{NonlinearMode::Bypass, GateType::Linear};
    const LayerPlan pn{NonlinearMode::Propagate, GateType::Nonlinear};
    switch (name) {
        case Variant::All:
            return {name, {pg, pg, pg, pg}};
        case Variant::Front:
            return {name, {pg, pg, bl, bl}};
        case Variant::Middle:
            return {name, {bl, pg, pg, bl}};
        case Variant::End:
            return {name, {bl, bl, pg, pg}};
        case Variant::ForcedLinear:
            return {name, {bl, bl, bl, bl}};
        case Variant::ForcedNonlinear:
            return {name, {pn, pn, pn, pn}};
    }
    throw ConfigError("unknown variant");
}

VariantSpec layer_plan(const std::string& name) {
    if (name == "All") return layer_plan(Variant::All);
    if (name == "Front") return layer_plan(Variant::Front);
    if (name == "Middle") return layer_plan(Variant::Middle);
    if (name == "End") return layer_plan(Variant::End);
    if (name == "forced-linear") return layer_plan(Variant::ForcedLinear);
    if (name == "forced-nonlinear") return layer_plan(Variant::ForcedNonlinear);
    throw ConfigError("unknown variant '" + name +
                      "' (expected All, Front, Middle, End, forced-linear, forced-nonlinear)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::All: return "All";
        case Variant::Front: return "Front";
        case Variant::Middle: return "Middle";
        case Variant::End: return "End";
        case Variant::ForcedLinear: return "forced-linear";
        case Variant::ForcedNonlinear: return "forced-nonlinear";
    }
    return "?";
}

namespace {

void fill_xavier_uniform(DenseMatrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : w.data) x = (2.0 * rng.next_double() - 1.0) * limit;
}

} // namespace

ModelParams init_params(std::size_t num_users, std::size_t num_items, std::size_t dim,
                        const VariantSpec& variant, std::uint64_t seed, bool mlp_hidden) {
    if (dim < 1) throw ConfigError("init_params: dim must be >= 1");
    ModelParams p;
    p.num_users = num_users;
    p.num_items = num_items;
    p.dim = dim;
    p.variant = variant.name;
    p.mlp_hidden = mlp_hidden;

    Rng emb_rng(derive_stream(seed, "init"));
    p.embeddings = DenseMatrix(num_users + num_items, dim);
    for (auto& x : p.embeddings.data) x = 0.1 * emb_rng.next_normal();

    const std::size_t gated = variant.num_gated_layers();
    p.gating.resize(gated);
    for (std::size_t g = 0; g < gated; ++g) {
        Rng mlp_rng(derive_stream(seed, "init_mlp", g, 0, 0));
        auto& mlp = p.gating[g];
        mlp.hidden = mlp_hidden;
        if (mlp_hidden) {
            mlp.w1 = DenseMatrix(2 * dim, dim);
            fill_xavier_uniform(mlp.w1, 2 * dim, dim, mlp_rng);
            mlp.b1.assign(dim, 0.0);
            mlp.w2 = DenseMatrix(dim, 2);
            fill_xavier_uniform(mlp.w2, dim, 2, mlp_rng);
            mlp.b2.assign(2, 0.0);
        } else {
            mlp.w1 = DenseMatrix(2 * dim, 2);
            fill_xavier_uniform(mlp.w1, 2 * dim, 2, mlp_rng);
            mlp.b1.assign(2, 0.0);
        }
    }
    return p;
}

namespace {

// Logits for one node from the concatenated (e_l, e_n) input. For the hidden
// network the pre-activation is written to h_pre (length D).
void mlp_logits(const GatingMlp& mlp, const double* el, const double* en, std::size_t dim,
                double* h_pre, std::array<double, 2>& logits) {
    if (!mlp.hidden) {
        for (int a = 0; a < 2; ++a) {
            double s = mlp.b1[a];
            for (std::size_t k = 0; k < dim; ++k) s += el[k] * mlp.w1.at(k, a);
            for (std::size_t k = 0; k < dim; ++k) s += en[k] * mlp.w1.at(dim + k, a);
            logits[a] = s;
        }
        return;
    }
    for (std::size_t h = 0; h < dim; ++h) {
        double s = mlp.b1[h];
        for (std::size_t k = 0; k < dim; ++k) s += el[k] * mlp.w1.at(k, h);
        for (std::size_t k = 0; k < dim; ++k) s += en[k] * mlp.w1.at(dim + k, h);
        h_pre[h] = s;
    }
    for (int a = 0; a < 2; ++a) {
        double s = mlp.b2[a];
        for (std::size_t h = 0; h < dim; ++h) {
            s += activate(h_pre[h], Activation::LeakyRelu) * mlp.w2.at(h, a);
        }
        logits[a] = s;
    }
}

// Gradient of the logits path for one node: given d loss/d logits, fills
// d loss/d input (length 2D) and stores per-node values that the serial
// weight-accumulation pass needs (dl itself and, when hidden, dh_pre).
void mlp_input_grad(const GatingMlp& mlp, std::size_t dim, const double* h_pre,
                    const std::array<double, 2>& dl, double* dh_pre, double* dc) {
    if (!mlp.hidden) {
        for (std::size_t k = 0; k < 2 * dim; ++k) {
            dc[k] = mlp.w1.at(k, 0) * dl[0] + mlp.w1.at(k, 1) * dl[1];
        }
        return;
    }
    for (std::size_t h = 0; h < dim; ++h) {
        const double dh = mlp.w2.at(h, 0) * dl[0] + mlp.w2.at(h, 1) * dl[1];
        dh_pre[h] = dh * activate_grad(h_pre[h], Activation::LeakyRelu);
    }
    for (std::size_t k = 0; k < 2 * dim; ++k) {
        double s = 0.0;
        for (std::size_t h = 0; h < dim; ++h) s += mlp.w1.at(k, h) * dh_pre[h];
        dc[k] = s;
    }
}

} // namespace

const GateLayerTrace* ForwardTrace::gate_at(std::size_t layer) const {
    for (const auto& g : gates) {
        if (g.layer == layer) return &g;
    }
    return nullptr;
}

namespace {

// Non-linear branch state at layer i: the last propagated value at or below
// i, falling back to e0. Bypass layers do not materialize a copy.
const DenseMatrix& nonlinear_at(const ForwardTrace& trace, const ModelParams& params,
                                std::size_t i) {
    for (std::size_t j = i; j >= 1; --j) {
        if (!trace.e_n[j].data.empty()) return trace.e_n[j];
    }
    return params.embeddings;
}

const DenseMatrix& gated_at(const ForwardTrace& trace, const ModelParams& params,
                            std::size_t i) {
    if (i == 0) return params.embeddings;
    return trace.e_g[i];
}

enum class ReplayKind { None, Relaxed };

ForwardTrace run_forward(const Csr& adj, const ModelParams& params, const VariantSpec& variant,
                         const ForwardOptions& options, ReplayKind replay,
                         const ForwardTrace* base) {
    const std::size_t n = params.num_nodes();
    const std::size_t dim = params.dim;
    if (adj.n != n) {
        throw std::invalid_argument("forward: adjacency node count does not match params");
    }
    if (options.mode == RunMode::Train && !(options.tau > 0.0)) {
        throw ConfigError("forward: train mode requires tau > 0");
    }

    ForwardTrace trace;
    trace.options = options;
    trace.e_g.resize(kNumLayers + 1);
    trace.e_n.resize(kNumLayers + 1);
    trace.z_pre.resize(kNumLayers + 1);

    std::size_t gate_index = 0;
    for (std::size_t i = 1; i <= kNumLayers; ++i) {
        const LayerPlan plan = variant.layers[i - 1];
        DenseMatrix z = spmm(adj, gated_at(trace, params, i - 1));

        if (plan.mode == NonlinearMode::Propagate) {
            trace.e_n[i] = activation(z, options.phi);
        }

        const bool keep_z = plan.mode == NonlinearMode::Propagate || plan.gate == GateType::Gating;

        switch (plan.gate) {
            case GateType::Linear:
                if (keep_z) {
                    trace.z_pre[i] = z;
                    trace.e_g[i] = std::move(z);
                } else {
                    trace.e_g[i] = std::move(z);
                }
                break;
            case GateType::Nonlinear:
                if (keep_z) trace.z_pre[i] = std::move(z);
                trace.e_g[i] = nonlinear_at(trace, params, i);
                break;
            case GateType::Gating: {
                trace.z_pre[i] = std::move(z);
                const DenseMatrix& el = trace.z_pre[i];
                const DenseMatrix& en = nonlinear_at(trace, params, i);
                const GatingMlp& mlp = params.gating[gate_index];

                GateLayerTrace gt;
                gt.layer = i;
                gt.selected.resize(n);
                gt.logits = DenseMatrix(n, 2);
                const bool train = options.mode == RunMode::Train;
                if (train || replay == ReplayKind::Relaxed) {
                    gt.soft = DenseMatrix(n, 2);
                    gt.noise = DenseMatrix(n, 2);
                }
                if (mlp.hidden) gt.hidden_pre = DenseMatrix(n, dim);

                const GateLayerTrace* base_gt = nullptr;
                if (replay == ReplayKind::Relaxed) {
                    base_gt = base->gate_at(i);
                    if (base_gt == nullptr || base_gt->soft.data.empty()) {
                        throw std::logic_error("relaxed replay needs a train-mode base trace");
                    }
                }

                trace.e_g[i] = DenseMatrix(n, dim);
#pragma omp parallel for schedule(static)
                for (std::size_t r = 0; r < n; ++r) {
                    std::array<double, 2> logits;
                    double* hp = mlp.hidden ? gt.hidden_pre.row(r) : nullptr;
                    mlp_logits(mlp, el.row(r), en.row(r), dim, hp, logits);
                    gt.logits.at(r, 0) = logits[0];
                    gt.logits.at(r, 1) = logits[1];

                    double* out = trace.e_g[i].row(r);
                    if (replay == ReplayKind::Relaxed) {
                        // weights = frozen (hard - soft) + soft(current logits),
                        // with the recorded noise.
                        const double g0 = base_gt->noise.at(r, 0);
                        const double g1 = base_gt->noise.at(r, 1);
                        const std::array<double, 2> scaled = {(logits[0] + g0) / options.tau,
                                                              (logits[1] + g1) / options.tau};
                        std::array<double, 2> soft;
                        softmax(scaled, soft);
                        const double hard0 = base_gt->selected[r] == kLinearBranch ? 1.0 : 0.0;
                        const double off0 = hard0 - base_gt->soft.at(r, 0);
                        const double off1 = (1.0 - hard0) - base_gt->soft.at(r, 1);
                        const double w0 = off0 + soft[0];
                        const double w1 = off1 + soft[1];
                        const double* lrow = el.row(r);
                        const double* nrow = en.row(r);
                        for (std::size_t c = 0; c < dim; ++c) {
                            out[c] = w0 * lrow[c] + w1 * nrow[c];
                        }
                        gt.selected[r] = base_gt->selected[r];
                        gt.soft.at(r, 0) = soft[0];
                        gt.soft.at(r, 1) = soft[1];
                        gt.noise.at(r, 0) = g0;
                        gt.noise.at(r, 1) = g1;
                    } else if (train) {
                        Rng node_rng(derive_stream(options.seed, "gumbel", options.step, i, r));
                        const GateSample s = stgs(logits, options.tau, node_rng);
                        gt.selected[r] = static_cast<std::int8_t>(s.selected());
                        gt.soft.at(r, 0) = s.soft[0];
                        gt.soft.at(r, 1) = s.soft[1];
                        gt.noise.at(r, 0) = s.noise[0];
                        gt.noise.at(r, 1) = s.noise[1];
                        const double* src = s.selected() == kLinearBranch ? el.row(r) : en.row(r);
                        std::memcpy(out, src, dim * sizeof(double));
                    } else {
                        // Eval: noiseless argmax; ties go to the linear branch.
                        const int sel = logits[0] >= logits[1] ? kLinearBranch : kNonlinearBranch;
                        gt.selected[r] = static_cast<std::int8_t>(sel);
                        const double* src = sel == kLinearBranch ? el.row(r) : en.row(r);
                        std::memcpy(out, src, dim * sizeof(double));
                    }
                }
                trace.gates.push_back(std::move(gt));
                ++gate_index;
                break;
            }
        }
    }
    return trace;
}

} // namespace

ForwardTrace forward(const Csr& adj, const ModelParams& params, const VariantSpec& variant,
                     const ForwardOptions& options) {
    if (variant.num_gated_layers() != params.gating.size()) {
        throw ConfigError("forward: params carry " + std::to_string(params.gating.size()) +
                          " gating networks but the variant has " +
                          std::to_string(variant.num_gated_layers()) + " gated layers");
    }
    return run_forward(adj, params, variant, options, ReplayKind::None, nullptr);
}

ForwardTrace forward_relaxed_replay(const Csr& adj, const ModelParams& params,
                                    const VariantSpec& variant, const ForwardTrace& base) {
    ForwardOptions opts = base.options;
    return run_forward(adj, params, variant, opts, ReplayKind::Relaxed, &base);
}

const DenseMatrix& gated_embedding(const ForwardTrace& trace, const ModelParams& params,
                                   std::size_t layer) {
    return gated_at(trace, params, layer);
}

DenseMatrix residual_mean_embedding(const ForwardTrace& trace, const ModelParams& params) {
    DenseMatrix out(params.num_nodes(), params.dim);
    for (std::size_t i = 0; i <= kNumLayers; ++i) {
        const DenseMatrix& eg = gated_at(trace, params, i);
        for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += eg.data[k];
    }
    const double beta = 1.0 / static_cast<double>(kNumLayers + 1);
    for (auto& x : out.data) x *= beta;
    return out;
}

double score_pair(const ForwardTrace& trace, const ModelParams& params, std::size_t user,
                  std::size_t item) {
    const double beta = 1.0 / static_cast<double>(kNumLayers + 1);
    const std::size_t item_row = params.num_users + item;
    double s = 0.0;
    for (std::size_t i = 0; i <= kNumLayers; ++i) {
        const DenseMatrix& eg = gated_at(trace, params, i);
        s += dot(std::span(eg.row(user), params.dim), std::span(eg.row(item_row), params.dim));
    }
    return beta * s;
}

void score_row(const ForwardTrace& trace, const ModelParams& params, std::size_t user,
               std::span<double> out) {
    assert(out.size() == params.num_items);
    const double beta = 1.0 / static_cast<double>(kNumLayers + 1);
    for (auto& o : out) o = 0.0;
    for (std::size_t i = 0; i <= kNumLayers; ++i) {
        const DenseMatrix& eg = gated_at(trace, params, i);
        const double* urow = eg.row(user);
        for (std::size_t v = 0; v < params.num_items; ++v) {
            const double* vrow = eg.row(params.num_users + v);
            double s = 0.0;
            for (std::size_t c = 0; c < params.dim; ++c) s += urow[c] * vrow[c];
            out[v] += s;
        }
    }
    for (auto& o : out) o *= beta;
}

ParamGrads zero_grads(const ModelParams& params) {
    ParamGrads g;
    g.embeddings = DenseMatrix(params.num_nodes(), params.dim);
    g.gating.resize(params.gating.size());
    for (std::size_t i = 0; i < params.gating.size(); ++i) {
        const auto& mlp = params.gating[i];
        g.gating[i].w1 = DenseMatrix(mlp.w1.rows, mlp.w1.cols);
        g.gating[i].b1.assign(mlp.b1.size(), 0.0);
        if (mlp.hidden) {
            g.gating[i].w2 = DenseMatrix(mlp.w2.rows, mlp.w2.cols);
            g.gating[i].b2.assign(mlp.b2.size(), 0.0);
        }
    }
    return g;
}

namespace {

// d loss / d e_g[layer] coming from the residual score terms.
void add_score_grads(DenseMatrix& acc, const ForwardTrace& trace, const ModelParams& params,
                     std::size_t layer, std::span<const TripletGrad> grads) {
    const double beta = 1.0 / static_cast<double>(kNumLayers + 1);
    const DenseMatrix& eg = gated_at(trace, params, layer);
    const std::size_t dim = params.dim;
    const std::size_t nu = params.num_users;
    // Serial: triplets may share rows.
    for (const auto& t : grads) {
        const double* urow = eg.row(t.user);
        const double* prow = eg.row(nu + t.pos_item);
        const double* nrow = eg.row(nu + t.neg_item);
        double* du = acc.row(t.user);
        double* dp = acc.row(nu + t.pos_item);
        double* dn = acc.row(nu + t.neg_item);
        const double cp = beta * t.d_pos;
        const double cn = beta * t.d_neg;
        for (std::size_t c = 0; c < dim; ++c) {
            du[c] += cp * prow[c] + cn * nrow[c];
            dp[c] += cp * urow[c];
            dn[c] += cn * urow[c];
        }
    }
}

} // namespace

ParamGrads backward(const ForwardTrace& trace, const Csr& adj, const ModelParams& params,
                    const VariantSpec& variant, std::span<const TripletGrad> grads) {
    const std::size_t n = params.num_nodes();
    const std::size_t dim = params.dim;
    if (trace.e_g.size() != kNumLayers + 1) {
        throw std::logic_error("backward: trace does not match a " +
                               std::to_string(kNumLayers) + "-layer forward");
    }

    ParamGrads out = zero_grads(params);

    DenseMatrix carried(n, dim); // d loss / d e_g[i] at the current layer
    add_score_grads(carried, trace, params, kNumLayers, grads);

    DenseMatrix d_en(n, dim); // d loss / d e_n[i], flows through bypasses
    DenseMatrix d_el(n, dim);
    DenseMatrix dl_all;      // per-node logit grads, filled per gated layer
    DenseMatrix dhp_all;     // per-node hidden pre-activation grads

    std::size_t gate_index = params.gating.size();
    for (std::size_t i = kNumLayers; i >= 1; --i) {
        const LayerPlan plan = variant.layers[i - 1];
        d_el.zero();

        switch (plan.gate) {
            case GateType::Linear:
                std::swap(d_el, carried);
                break;
            case GateType::Nonlinear:
                for (std::size_t k = 0; k < d_en.data.size(); ++k) {
                    d_en.data[k] += carried.data[k];
                }
                break;
            case GateType::Gating: {
                --gate_index;
                const GateLayerTrace* gt = trace.gate_at(i);
                if (gt == nullptr || gt->soft.data.empty()) {
                    throw std::logic_error(
                        "backward: layer " + std::to_string(i) +
                        " has no train-mode gate record; trace/params mismatch");
                }
                const GatingMlp& mlp = params.gating[gate_index];
                const DenseMatrix& el = trace.z_pre[i];
                const DenseMatrix& en = nonlinear_at(trace, params, i);
                const double tau = trace.options.tau;

                dl_all = DenseMatrix(n, 2);
                if (mlp.hidden) dhp_all = DenseMatrix(n, dim);

#pragma omp parallel for schedule(static)
                for (std::size_t r = 0; r < n; ++r) {
                    const double* gbar = carried.row(r);
                    const double* lrow = el.row(r);
                    const double* nrow = en.row(r);

                    // Hard path: the selected branch gets the full gradient.
                    double* target = gt->selected[r] == kLinearBranch ? d_el.row(r) : d_en.row(r);
                    for (std::size_t c = 0; c < dim; ++c) target[c] += gbar[c];

                    // Soft path: d y -> d logits via (diag(y) - y y^T)/tau.
                    const double dy0 = dot(std::span(gbar, dim), std::span(lrow, dim));
                    const double dy1 = dot(std::span(gbar, dim), std::span(nrow, dim));
                    const double y0 = gt->soft.at(r, 0);
                    const double y1 = gt->soft.at(r, 1);
                    const double mix = y0 * dy0 + y1 * dy1;
                    const std::array<double, 2> dl = {y0 * (dy0 - mix) / tau,
                                                      y1 * (dy1 - mix) / tau};
                    dl_all.at(r, 0) = dl[0];
                    dl_all.at(r, 1) = dl[1];

                    std::vector<double> dc(2 * dim);
                    mlp_input_grad(mlp, dim, mlp.hidden ? gt->hidden_pre.row(r) : nullptr, dl,
                                   mlp.hidden ? dhp_all.row(r) : nullptr, dc.data());
                    double* del = d_el.row(r);
                    double* den = d_en.row(r);
                    for (std::size_t c = 0; c < dim; ++c) {
                        del[c] += dc[c];
                        den[c] += dc[dim + c];
                    }
                }

                // Weight accumulation, serial so results do not depend on
                // the thread count.
                auto& mg = out.gating[gate_index];
                for (std::size_t r = 0; r < n; ++r) {
                    const double* lrow = el.row(r);
                    const double* nrow = en.row(r);
                    if (!mlp.hidden) {
                        for (int a = 0; a < 2; ++a) {
                            const double d = dl_all.at(r, a);
                            if (d == 0.0) continue;
                            for (std::size_t k = 0; k < dim; ++k) {
                                mg.w1.at(k, a) += lrow[k] * d;
                                mg.w1.at(dim + k, a) += nrow[k] * d;
                            }
                            mg.b1[a] += d;
                        }
                    } else {
                        const double* hp = gt->hidden_pre.row(r);
                        for (int a = 0; a < 2; ++a) {
                            const double d = dl_all.at(r, a);
                            for (std::size_t h = 0; h < dim; ++h) {
                                mg.w2.at(h, a) += activate(hp[h], Activation::LeakyRelu) * d;
                            }
                            mg.b2[a] += d;
                        }
                        const double* dhp = dhp_all.row(r);
                        for (std::size_t h = 0; h < dim; ++h) {
                            const double d = dhp[h];
                            if (d == 0.0) continue;
                            for (std::size_t k = 0; k < dim; ++k) {
                                mg.w1.at(k, h) += lrow[k] * d;
                                mg.w1.at(dim + k, h) += nrow[k] * d;
                            }
                            mg.b1[h] += d;
                        }
                    }
                }
                break;
            }
        }

        if (plan.mode == NonlinearMode::Propagate) {
            // e_n[i] = phi(z); fold into the shared aggregation gradient.
            const DenseMatrix& z = trace.z_pre[i];
#pragma omp parallel for schedule(static)
            for (std::size_t k = 0; k < d_en.data.size(); ++k) {
                d_el.data[k] += d_en.data[k] * activate_grad(z.data[k], trace.options.phi);
            }
            d_en.zero();
        }

        // z = adj * e_g[i-1]; the adjacency is symmetric.
        spmm(adj, d_el, carried);
        add_score_grads(carried, trace, params, i - 1, grads);
    }

    for (std::size_t k = 0; k < out.embeddings.data.size(); ++k) {
        out.embeddings.data[k] = carried.data[k] + d_en.data[k];
    }
    return out;
}

GateDecisionLog extract_decisions(const ForwardTrace& trace) {
    GateDecisionLog log;
    for (const auto& g : trace.gates) {
        log.layers.push_back(g.layer);
        log.decisions.push_back(g.selected);
    }
    return log;
}

std::array<double, kNumLayers> gate_linear_ratios(const ForwardTrace& trace,
                                                  const VariantSpec& variant) {
    std::array<double, kNumLayers> ratios{};
    for (std::size_t i = 1; i <= kNumLayers; ++i) {
        switch (variant.layers[i - 1].gate) {
            case GateType::Linear:
                ratios[i - 1] = 1.0;
                break;
            case GateType::Nonlinear:
                ratios[i - 1] = 0.0;
                break;
            case GateType::Gating: {
                const GateLayerTrace* gt = trace.gate_at(i);
                std::size_t linear = 0;
                for (auto s : gt->selected) {
                    if (s == kLinearBranch) ++linear;
                }
                ratios[i - 1] = gt->selected.empty()
                                    ? 0.0
                                    : static_cast<double>(linear) /
                                          static_cast<double>(gt->selected.size());
                break;
            }
        }
    }
    return ratios;
}

} // namespace hmlet
