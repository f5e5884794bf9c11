#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmlet/csr.hpp"
#include "hmlet/dense.hpp"
#include "hmlet/gumbel.hpp"
#include "hmlet/rng.hpp"

namespace hmlet {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Branch indices are fixed project-wide: 0 = linear, 1 = non-linear.
inline constexpr int kLinearBranch = 0;
inline constexpr int kNonlinearBranch = 1;
inline constexpr std::size_t kNumLayers = 4;

enum class Variant : std::uint8_t {
    All = 0,
    Front = 1,
    Middle = 2,
    End = 3,
    ForcedLinear = 4,
    ForcedNonlinear = 5,
};

enum class GateType : std::uint8_t { Linear, Nonlinear, Gating };
enum class NonlinearMode : std::uint8_t { Bypass, Propagate };

struct LayerPlan {
    NonlinearMode mode;
    GateType gate;
};

struct VariantSpec {
    Variant name;
    std::array<LayerPlan, kNumLayers> layers;

    std::size_t num_gated_layers() const;
    bool is_gated(std::size_t layer) const { return layers[layer - 1].gate == GateType::Gating; }
};

// Table of per-layer settings for each variant; layer indices run 1..4.
VariantSpec layer_plan(Variant name);
VariantSpec layer_plan(const std::string& name);
std::string variant_name(Variant v);

// Gating network: logits = W^T concat(e_l, e_n) + b, optionally with one
// leaky-ReLU hidden layer of width D in front.
struct GatingMlp {
    bool hidden = false;
    DenseMatrix w1; // hidden ? (2D x D) : (2D x 2)
    std::vector<double> b1;
    DenseMatrix w2; // hidden ? (D x 2) : unused
    std::vector<double> b2;
};

struct ModelParams {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::size_t dim = 0;
    Variant variant = Variant::End;
    bool mlp_hidden = false;
    DenseMatrix embeddings;           // (num_users+num_items) x dim, this is e0
    std::vector<GatingMlp> gating;    // one per gated layer, in layer order

    std::size_t num_nodes() const { return num_users + num_items; }
};

// Embeddings ~ Normal(0, 0.1^2); gating weights Xavier-uniform, biases 0.
ModelParams init_params(std::size_t num_users, std::size_t num_items, std::size_t dim,
                        const VariantSpec& variant, std::uint64_t seed,
                        bool mlp_hidden = false);

enum class RunMode { Train, Eval };

struct ForwardOptions {
    double tau = 0.7;
    RunMode mode = RunMode::Eval;
    Activation phi = Activation::LeakyRelu;
    std::uint64_t seed = 0; // drives the per-node Gumbel noise in train mode
    std::uint64_t step = 0; // training step, part of the noise stream id
};

// Per-gated-layer record of the gate evaluation for every node.
struct GateLayerTrace {
    std::size_t layer = 0;             // 1-based layer index
    std::vector<std::int8_t> selected; // 0 = linear, 1 = non-linear
    DenseMatrix logits;                // n x 2
    DenseMatrix soft;                  // n x 2 (train mode)
    DenseMatrix noise;                 // n x 2 (train mode)
    DenseMatrix hidden_pre;            // n x D, pre-activation (hidden MLP only)
};

// Everything the backward pass needs: per-layer gated embeddings, the raw
// aggregate before activation, the non-linear branch state, gate records.
struct ForwardTrace {
    std::vector<DenseMatrix> e_g;     // K+1 entries, e_g[0] = e0
    std::vector<DenseMatrix> e_n;     // K+1 entries, e_n[0] = e0
    std::vector<DenseMatrix> z_pre;   // K+1; z_pre[i] = adj * e_g[i-1], i >= 1
    std::vector<GateLayerTrace> gates;
    ForwardOptions options;

    const GateLayerTrace* gate_at(std::size_t layer) const;
};

ForwardTrace forward(const Csr& adj, const ModelParams& params, const VariantSpec& variant,
                     const ForwardOptions& options);

// Replays a forward pass with each gate's one-hot replaced by
// (hard - soft at the base point) + soft(current params), reusing the base
// trace's noise. The analytic backward below is the exact derivative of
// this map, which makes it the right target for finite-difference checks.
ForwardTrace forward_relaxed_replay(const Csr& adj, const ModelParams& params,
                                    const VariantSpec& variant, const ForwardTrace& base);

// Gated embedding matrix at a layer (layer 0 is e0).
const DenseMatrix& gated_embedding(const ForwardTrace& trace, const ModelParams& params,
                                   std::size_t layer);
// (1/(K+1)) * sum over layers of e_g[i], the embedding the residual
// prediction effectively scores with.
DenseMatrix residual_mean_embedding(const ForwardTrace& trace, const ModelParams& params);

// Residual prediction: beta * sum over layers of dot(e_g[i][u], e_g[i][U+v])
// with beta = 1/(K+1).
double score_pair(const ForwardTrace& trace, const ModelParams& params,
                  std::size_t user, std::size_t item);
// Scores of one user against every item.
void score_row(const ForwardTrace& trace, const ModelParams& params, std::size_t user,
               std::span<double> out);

struct TripletGrad {
    std::int32_t user;
    std::int32_t pos_item;
    std::int32_t neg_item;
    double d_pos; // d loss / d score(user, pos_item)
    double d_neg; // d loss / d score(user, neg_item)
};

struct MlpGrads {
    DenseMatrix w1;
    std::vector<double> b1;
    DenseMatrix w2;
    std::vector<double> b2;
};

struct ParamGrads {
    DenseMatrix embeddings;
    std::vector<MlpGrads> gating;
};

ParamGrads zero_grads(const ModelParams& params);

// Exact reverse-mode gradients of the triplet score terms w.r.t. e0 and the
// gating networks. Gate gradients use the straight-through rule: branch rows
// receive the hard-selected gradient, logits receive the tempered softmax
// Jacobian path. L2 terms are added by the caller.
ParamGrads backward(const ForwardTrace& trace, const Csr& adj, const ModelParams& params,
                    const VariantSpec& variant, std::span<const TripletGrad> grads);

// Branch chosen per node per gated layer in an eval-mode pass; input to the
// FNL/PNL/FL classification.
struct GateDecisionLog {
    std::vector<std::size_t> layers;            // gated layer indices
    std::vector<std::vector<std::int8_t>> decisions; // [gated layer][node]
};

GateDecisionLog extract_decisions(const ForwardTrace& trace);

// Fraction of nodes routed to the linear branch, per layer 1..K.
// Non-gated layers report 1.0 or 0.0 according to their fixed type.
std::array<double, kNumLayers> gate_linear_ratios(const ForwardTrace& trace,
                                                  const VariantSpec& variant);

} // namespace hmlet
