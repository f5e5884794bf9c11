#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hmlet/evaluator.hpp"
#include "hmlet/graph.hpp"
#include "hmlet/model.hpp"

namespace hmlet {

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TauSchedule {
    EpochDecay, // max(tau_min, tau0 * tau_decay^epoch)
    IterExp,    // 1.0 * exp(-0.001 * iteration)
};

struct TrainConfig {
    double learning_rate = 0.001;
    double lambda_l2 = 1e-4;
    std::size_t batch_size = 2048;
    double dropout_rate = 0.4;
    double tau0 = 0.7;
    double tau_min = 0.01;
    double tau_decay = 0.995;
    TauSchedule tau_schedule = TauSchedule::EpochDecay;
    std::size_t max_epochs = 1000;
    std::size_t patience = 20;
    std::size_t dim = 512;
    std::uint64_t seed = 2021;
    Activation phi = Activation::LeakyRelu;
    bool mlp_hidden = false;
    std::size_t eval_k = 20;
};

struct Triplet {
    std::int32_t user;
    std::int32_t pos_item; // in the user's train set
    std::int32_t neg_item; // not in the user's train set
};

// Uniform (user, positive) over all training pairs; the negative is drawn
// uniformly over items and rejected while it lies in the user's train set.
// Users whose train set covers every item are skipped.
std::vector<Triplet> sample_batch(const InteractionGraph& graph, std::size_t batch_size,
                                  Rng& rng);

// Pairwise ranking term of one triplet: -ln sigmoid(pos - neg), evaluated in
// the stable softplus form, plus its derivatives w.r.t. the two scores.
struct BprTerm {
    double loss;
    double d_pos;
    double d_neg;
};
BprTerm bpr_term(double score_pos, double score_neg);

// L2 part of the objective: lambda * (batch mean of the squared e0 rows of
// u, i, j) + lambda * squared gating parameters.
double l2_term(const ModelParams& params, std::span<const Triplet> batch, double lambda);

// Full batch objective for a given trace; used by training and by the
// finite-difference checks.
struct BatchLoss {
    double total;
    double rank;
    double reg;
    std::vector<TripletGrad> grads; // d rank / d scores, mean-reduced
};
BatchLoss bpr_batch_loss(const ForwardTrace& trace, const ModelParams& params,
                         std::span<const Triplet> batch, double lambda);

// Adds the L2 gradients (2 lambda / B on batch e0 rows, 2 lambda on gating
// parameters) to grads.
void add_l2_grads(ParamGrads& grads, const ModelParams& params, std::span<const Triplet> batch,
                  double lambda);

double temperature(std::size_t epoch, const TrainConfig& cfg);
double temperature_iter_exp(std::size_t iteration);

// Symmetric edge dropout: each undirected edge is kept with probability
// 1-rate, both directions together, kept weights scaled by 1/(1-rate).
Csr edge_dropout(const Csr& adj, double rate, Rng& rng);

// Adam over the embedding table and the gating networks
// (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamState {
public:
    explicit AdamState(const ModelParams& params);
    void step(ModelParams& params, const ParamGrads& grads, double lr);
    std::size_t steps_taken() const { return t_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    void step_tensor(std::vector<double>& x, const std::vector<double>& g, Moments& mom,
                     double lr) const;
    std::size_t t_ = 0;
    Moments emb_;
    std::vector<std::array<Moments, 4>> mlp_; // w1, b1, w2, b2 per gated layer
};

struct EpochStats {
    std::size_t epoch;
    double loss;
    double tau;
    double val_ndcg;
    double val_recall;
    double val_precision;
    std::array<double, kNumLayers> gate_linear; // training-time linear share
};

struct TrainResult {
    ModelParams best;
    std::size_t best_epoch = 0;
    double best_val_ndcg = 0.0;
    std::vector<EpochStats> log;
};

// Observer invoked after each epoch's validation pass.
using EpochCallback = std::function<void(const EpochStats&, const ModelParams&)>;

// Full training loop: per epoch anneal tau, then for every batch resample
// the dropped adjacency, forward in train mode, BPR loss, backward, Adam.
// Early-stops after `patience` epochs without val-NDCG improvement and
// returns the best-validation parameters. If checkpoint_path is nonempty the
// best parameters are rewritten there at every improvement.
TrainResult train(const InteractionGraph& graph, const TrainConfig& cfg,
                  const VariantSpec& variant, const std::string& checkpoint_path = "",
                  const EpochCallback& on_epoch = {});

} // namespace hmlet
