#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rosch/network.hpp"
#include "rosch/sampling.hpp"

namespace rosch {

/// Gradient with the shapes of a TwoLayerNet's parameters.
struct NetGradient {
    Eigen::MatrixXd W1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd W2;
    Eigen::VectorXd b2;

    static NetGradient zeros_like(const TwoLayerNet& net);
};

/// Weighted misfit: per sample dx |y - psi|^2 + mu sum_l dx |D_h (y - psi)_l|^2
/// over the output segments l, averaged over the batch.
struct LossSpec {
    double mu = 1e-3;
    double dx = 1.0;
    /// Segment lengths of the output; empty means one segment.
    std::vector<std::size_t> segments;
};

/// Segment lengths of patch m's output in canonical neighbor order.
std::vector<std::size_t> output_segments(const Decomposition& decomp, PatchIndex m);

/// Batch loss; fills grad (exact reverse mode, ReLU'(0) = 0) when non-null.
/// Inputs are d x B, targets p x B. Throws DomainError on an empty batch.
double loss(const TwoLayerNet& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
            const Eigen::Ref<const Eigen::MatrixXd>& targets, const LossSpec& spec, NetGradient* grad = nullptr);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update of theta in place at step t >= 1.
void adam_update(Eigen::Ref<Eigen::ArrayXd> theta, Eigen::Ref<Eigen::ArrayXd> m, Eigen::Ref<Eigen::ArrayXd> v,
                 const Eigen::Ref<const Eigen::ArrayXd>& g, int t, double lr, const AdamParams& params);

struct AdamState {
    NetGradient m;
    NetGradient v;
    int t = 0;

    static AdamState for_net(const TwoLayerNet& net);
};

/// Advances state.t and applies one Adam step to every parameter block.
void adam_step(TwoLayerNet& net, AdamState& state, const NetGradient& grad, double lr, const AdamParams& params);

struct TrainConfig {
    int epochs = 5000;
    double batch_fraction = 0.05;
    double lr = 1e-3;
    AdamParams adam;
    double decay_rate = 0.9;
    int decay_every = 200;
    double mu = 1e-3;
    std::uint64_t seed = 1;
    /// Test loss is evaluated every eval_every epochs (and at the last one).
    int eval_every = 1;

    void validate() const;
};

struct LossRecord {
    int epoch = 0;
    double train_loss = 0.0;
    /// NaN when not evaluated at this epoch or without a test set.
    double test_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    TwoLayerNet net;
    /// Entry 0 holds the losses of the initial net.
    std::vector<LossRecord> curve;
};

/// Shuffled mini-batch Adam. Deterministic for fixed inputs and seed. Throws
/// DivergenceError when a loss becomes non-finite.
TrainResult train(TwoLayerNet net, const TrainingSet& train_set, const TrainingSet& test_set, const LossSpec& spec,
                  const TrainConfig& config);

/// Learning rate used during epoch e (1-based).
double learning_rate(const TrainConfig& config, int epoch);

} // namespace rosch
