#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "rosch/grid.hpp"
#include "rosch/problems.hpp"

namespace rosch {

struct ArmijoParams {
    double c1 = 1e-4;
    double factor = 0.5;
    double initial_step = 1.0;
};

/// Metric of the p-Laplace descent direction: the Hessian of the energy
/// (Newton) or the fixed kappa-weighted linear stiffness matrix.
enum class DescentPreconditioner { Hessian, Stiffness };

struct SolveOptions {
    double newton_tol = 1e-10;
    int newton_max_iter = 50;
    double pgd_tol = 1e-8;
    int pgd_max_iter = 2000;
    ArmijoParams armijo;
    DescentPreconditioner pgd_preconditioner = DescentPreconditioner::Hessian;

    /// Throws DomainError on non-positive tolerances or caps.
    void validate() const;
};

struct LocalSolution {
    Field2D field;
    int iterations = 0;
    double final_residual = 0.0;
    /// Newton: residual before each step. PGD: energy after each accepted step.
    std::vector<double> history;
};

/// Dirichlet boundary-value solver bound to one patch grid and medium.
/// Implementations are immutable after construction, so one instance may
/// serve concurrent solves.
class LocalSolver {
public:
    virtual ~LocalSolver() = default;

    virtual LocalSolution solve(const BoundaryTrace& trace) const = 0;
    virtual const GridSpec& grid() const noexcept = 0;
};

/// Interior-node numbering shared by the structured solvers.
class InteriorIndex {
public:
    explicit InteriorIndex(const GridSpec& g) : nx_(g.nx()), ny_(g.ny()) {}

    int size() const noexcept { return nx_ > 1 && ny_ > 1 ? (nx_ - 1) * (ny_ - 1) : 0; }
    int operator()(int i, int j) const noexcept { return (j - 1) * (nx_ - 1) + (i - 1); }

private:
    int nx_;
    int ny_;
};

/// Cell-face coefficients kappa at face midpoints for the 5-point
/// finite-volume scheme. east(i, j) couples (i, j)-(i+1, j); north(i, j)
/// couples (i, j)-(i, j+1).
class FaceCoefficients {
public:
    FaceCoefficients(const GridSpec& g, const Medium& kappa);

    double east(int i, int j) const noexcept { return east_[static_cast<std::size_t>(j) * nx_ + i]; }
    double north(int i, int j) const noexcept { return north_[static_cast<std::size_t>(j) * (nx_ + 1) + i]; }

private:
    int nx_;
    std::vector<double> east_;
    std::vector<double> north_;
};

/// Bilinear transfinite interpolation of a trace into the interior.
Field2D transfinite_interpolation(const GridSpec& g, const BoundaryTrace& trace);

/// Finite-volume solver for -div(kappa grad u) = 0 by a sparse Cholesky
/// factorization computed once at construction.
class LinearSolver final : public LocalSolver {
public:
    LinearSolver(const GridSpec& g, const Medium& kappa);

    LocalSolution solve(const BoundaryTrace& trace) const override;
    const GridSpec& grid() const noexcept override { return grid_; }

private:
    GridSpec grid_;
    FaceCoefficients faces_;
    InteriorIndex index_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
};

/// Finite-volume + Newton solver for -div(kappa grad u) + c u^3 = 0
/// (c = reaction, 1 for the semilinear problem).
class SemilinearSolver final : public LocalSolver {
public:
    SemilinearSolver(const GridSpec& g, const Medium& kappa, SolveOptions opts, double reaction = 1.0);

    LocalSolution solve(const BoundaryTrace& trace) const override;
    const GridSpec& grid() const noexcept override { return grid_; }

private:
    GridSpec grid_;
    FaceCoefficients faces_;
    InteriorIndex index_;
    SolveOptions opts_;
    double reaction_;
    Eigen::SparseMatrix<double> stiffness_;
};

/// P1 finite elements on the diagonal-split triangulation, minimizing
/// sum_T |T| kappa_T / p |grad u_T|^p by preconditioned gradient descent with
/// an Armijo backtracking line search. Convergence is measured by
/// |K^{-1} grad E|_inf with K the kappa-weighted linear stiffness matrix
/// (factorized once); the descent metric is chosen by SolveOptions.
class PLaplaceSolver final : public LocalSolver {
public:
    PLaplaceSolver(const GridSpec& g, const Medium& kappa, double p, SolveOptions opts);

    LocalSolution solve(const BoundaryTrace& trace) const override;
    const GridSpec& grid() const noexcept override { return grid_; }

    /// Discrete energy of a full nodal field (with the gradient floor).
    double energy(const Field2D& u) const;

private:
    struct Triangle {
        std::array<std::size_t, 3> node; // field index
        std::array<int, 3> slot;         // interior unknown, -1 on the boundary
        std::array<double, 3> bx;        // h * d(grad_x)/du
        std::array<double, 3> by;        // h * d(grad_y)/du
        double kappa;                    // at the centroid
    };

    double energy_gradient(const Field2D& u, double p, Eigen::VectorXd& grad) const;
    /// Energy Hessian on interior unknowns; u == nullptr gives the p = 2 stiffness.
    Eigen::SparseMatrix<double> assemble_hessian(const Field2D* u, double p) const;

    GridSpec grid_;
    InteriorIndex index_;
    double p_;
    SolveOptions opts_;
    std::vector<Triangle> triangles_;
    Eigen::SparseMatrix<double> stiffness_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> precond_;
};

/// Regularization inside |grad u|^{p-2}.
inline constexpr double kGradientFloor = 1e-14;

std::unique_ptr<LocalSolver> make_local_solver(const ProblemSpec& problem, const GridSpec& g,
                                               const SolveOptions& opts);

LocalSolution solve_linear(const GridSpec& g, const Medium& kappa, const BoundaryTrace& trace);
LocalSolution solve_semilinear(const GridSpec& g, const Medium& kappa, const BoundaryTrace& trace,
                               const SolveOptions& opts);
LocalSolution solve_plaplace(const GridSpec& g, const Medium& kappa, double p, const BoundaryTrace& trace,
                             const SolveOptions& opts);

} // namespace rosch
