#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rosch/decomposition.hpp"
#include "rosch/local_solver.hpp"
#include "rosch/problems.hpp"

namespace rosch {

/// Matrix of the linearized boundary-to-boundary map of one patch (p x d).
struct LinearBtB {
    PatchIndex patch;
    Eigen::MatrixXd Q;
};

struct TruncatedSvd {
    Eigen::MatrixXd U;  // p x r
    Eigen::VectorXd S;  // r, nonincreasing
    Eigen::MatrixXd V;  // d x r
    /// All singular values of the decomposed matrix.
    Eigen::VectorXd spectrum;

    int rank() const noexcept { return static_cast<int>(S.size()); }
};

/// Column j is the restricted response to the nodal hat trace at position j.
/// The two copies of a corner node share the response of the corner hat
/// equally, so Q phi is the exact linear response for every trace with
/// consistent corners. Uses problem.linearized(); columns are solved on
/// `threads` workers against one factorization.
LinearBtB q_linear_matrix(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m, int threads = 1);

/// Keeps the singular triplets with sigma_k / sigma_1 > delta1. Throws
/// DomainError for delta1 <= 0 and NumericalError for a zero matrix.
TruncatedSvd svd_truncate(const Eigen::MatrixXd& Q, double delta1);

/// sigma_k / sigma_1 of Q, nonincreasing.
std::vector<double> svd_spectrum(const Eigen::MatrixXd& Q);
std::vector<double> svd_spectrum(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m);

} // namespace rosch
