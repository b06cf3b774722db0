#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rosch/decomposition.hpp"
#include "rosch/grid.hpp"
#include "rosch/local_solver.hpp"
#include "rosch/problems.hpp"

namespace rosch {

/// Radial-angular law for random Dirichlet data: direction uniform (Gaussian
/// then normalized in the discrete H^{1/2} norm), radius with density
/// (D+1) r^D / R^{D+1} on [0, R].
struct SampleLaw {
    double R = 1000.0;
    double D = 3.0;
    std::uint64_t seed = 1;

    void validate() const;
};

using Rng = std::mt19937_64;

/// Independent stream for sample i of a run seeded with seed.
Rng sample_stream(std::uint64_t seed, std::uint64_t i);

struct BoundarySample {
    BoundaryTrace trace;
    double radius = 0.0;
};

BoundarySample sample_boundary(const SampleLaw& law, const TraceLayout& layout, Rng& rng);

/// Input/output pairs of one patch's boundary-to-boundary map. Column i of
/// inputs (d x N) and outputs (p x N) is sample i.
struct TrainingSet {
    PatchIndex patch;
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd outputs;
    SampleLaw law;
    ProblemKind problem = ProblemKind::Semilinear;
    double buffer = 0.0;
    int skipped = 0;

    int size() const noexcept { return static_cast<int>(inputs.cols()); }
    int input_dim() const noexcept { return static_cast<int>(inputs.rows()); }
    int output_dim() const noexcept { return static_cast<int>(outputs.rows()); }
};

struct GenOptions {
    /// Margin added around the patch for the solves; negative means the
    /// decomposition's dx_b.
    double buffer = -1.0;
    int threads = 1;
    /// Largest tolerated fraction of failed solves.
    double max_skip_fraction = 0.05;
};

/// Draws N Dirichlet conditions on the buffered patch, solves, and records
/// (trace on the patch, restriction onto the neighbor sides). Throws
/// DatasetError when more than max_skip_fraction of the solves fail.
TrainingSet gen_dataset(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m, int N,
                        const SampleLaw& law, const SolveOptions& opts, const GenOptions& gen = {});

/// Disjoint random split; the test part has round(fraction * N) samples.
std::pair<TrainingSet, TrainingSet> split_dataset(const TrainingSet& set, double test_fraction, Rng& rng);

} // namespace rosch
