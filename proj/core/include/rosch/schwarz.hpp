#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rosch/decomposition.hpp"
#include "rosch/grid.hpp"
#include "rosch/local_solver.hpp"
#include "rosch/network.hpp"
#include "rosch/problems.hpp"

namespace rosch {

enum class SchwarzMode { Classical, Surrogate, Oracle, Linear };

std::string to_string(SchwarzMode mode);
SchwarzMode schwarz_mode_from_string(const std::string& name);

struct SchwarzConfig {
    double delta0 = 1e-4;
    int max_iter = 500;
    int threads = 1;

    void validate() const;
};

struct SchwarzTiming {
    double local_solve = 0.0;
    double surrogate = 0.0;
    double bookkeeping = 0.0;
    double assembly = 0.0;
    /// Interior-patch work (solve + restrict, or surrogate forward) summed over iterations.
    double interior_update = 0.0;
    double total = 0.0;
};

struct RelativeErrors {
    double l2 = 0.0;
    double h1 = 0.0;
    double linf = 0.0;
};

struct SchwarzResult {
    SchwarzMode mode = SchwarzMode::Classical;
    int iterations = 0;
    std::vector<double> residual_history;
    Field2D global;
    std::vector<Field2D> local_fields;
    /// Final boundary data of every patch, in decomposition id order.
    std::vector<BoundaryTrace> traces;
    SchwarzTiming timing;

    double mean_interior_update() const { return iterations > 0 ? timing.interior_update / iterations : 0.0; }
};

/// Replacement of solve + restrict on one interior patch.
struct PatchSurrogate {
    std::function<std::vector<double>(const BoundaryTrace&)> apply;
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
};

PatchSurrogate surrogate_from_net(TwoLayerNet net);
PatchSurrogate surrogate_from_matrix(Eigen::MatrixXd Q);

using SurrogateSet = std::map<PatchIndex, PatchSurrogate>;

/// Exact maps (prebuilt solver + restriction) for every interior patch.
SurrogateSet oracle_surrogates(const ProblemSpec& problem, const Decomposition& decomp, const SolveOptions& opts);

/// Boundary data of patch m for the next iteration. segments[k] is the
/// output that the k-th neighbor of m (canonical order) produced for m.
/// Sides on the domain boundary take the physical values, including their
/// corners; other corners get the mean of their two copies. Throws
/// CoverageError for a side that is neither physical nor shared.
BoundaryTrace update_bc(const Decomposition& decomp, PatchIndex m, const std::vector<std::vector<double>>& segments,
                        const Field2D& physical);

/// Initial data: physical values on the domain boundary, the mean of the
/// physical trace elsewhere.
BoundaryTrace initial_trace(const Decomposition& decomp, PatchIndex m, const Field2D& physical);

/// Jacobi Schwarz iteration with exact local solves. Throws
/// NonConvergenceError when max_iter is reached.
SchwarzResult run_classical(const ProblemSpec& problem, const Decomposition& decomp, const BoundaryCondition& bc,
                            const SchwarzConfig& config, const SolveOptions& opts);

/// Same iteration with surrogates on the interior patches in `nets`; every
/// other patch is solved exactly. All patches are solved exactly once at the
/// end for assembly.
SchwarzResult run_nn(const ProblemSpec& problem, const Decomposition& decomp, const SurrogateSet& surrogates,
                     const BoundaryCondition& bc, const SchwarzConfig& config, const SolveOptions& opts,
                     SchwarzMode mode = SchwarzMode::Surrogate);

/// Solve on the whole domain with the physical boundary condition.
Field2D monodomain_solve(const ProblemSpec& problem, const GridSpec& global, const BoundaryCondition& bc,
                         const SolveOptions& opts);

/// |u - ref| / |ref| in the L2, H1 and max norms.
RelativeErrors compute_errors(const Field2D& u, const Field2D& reference);

} // namespace rosch
