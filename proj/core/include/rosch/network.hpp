#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rosch/decomposition.hpp"
#include "rosch/grid.hpp"

namespace rosch {

/// Two-layer ReLU surrogate W2 relu(W1 x + b1) + b2 for one patch's
/// boundary-to-boundary map.
struct TwoLayerNet {
    Eigen::MatrixXd W1; // h x d
    Eigen::VectorXd b1; // h
    Eigen::MatrixXd W2; // p x h
    Eigen::VectorXd b2; // p

    /// Wraps the net in the input/output normalization layers.
    bool normalize = false;
    double eps1 = 1e-8;
    /// Mesh width used by the normalization norm |phi|^2 = dx sum phi_i^2.
    double dx = 1.0;

    PatchIndex patch;
    std::string init = "none";

    int input_dim() const noexcept { return static_cast<int>(W1.cols()); }
    int hidden_dim() const noexcept { return static_cast<int>(W1.rows()); }
    int output_dim() const noexcept { return static_cast<int>(W2.rows()); }

    /// Throws DimensionError on inconsistent shapes and DomainError on
    /// non-finite entries.
    void validate() const;
};

/// Per-sample normalization statistics: mean of the entries and
/// max(|phi|_2, eps1).
struct NormStats {
    double mean = 0.0;
    double scale = 1.0;
};

NormStats norm_stats(const Eigen::Ref<const Eigen::VectorXd>& phi, double dx, double eps1);

Eigen::VectorXd forward(const TwoLayerNet& net, const Eigen::Ref<const Eigen::VectorXd>& phi);
std::vector<double> forward(const TwoLayerNet& net, const BoundaryTrace& phi);

/// Column-wise forward pass over a d x B batch.
Eigen::MatrixXd forward_batch(const TwoLayerNet& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
TwoLayerNet init_random(int d, int h, int p, std::uint64_t seed);

/// Split-rail construction W1 = [V sqrt(S), -V sqrt(S)]^T,
/// W2 = [U sqrt(S), -U sqrt(S)], zero biases; reproduces U S V^T exactly.
TwoLayerNet init_from_svd(const Eigen::MatrixXd& U, const Eigen::VectorXd& S, const Eigen::MatrixXd& V);

} // namespace rosch
