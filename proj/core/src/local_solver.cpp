#include "rosch/local_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rosch/errors.hpp"

namespace rosch {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

void check_trace(const GridSpec& g, const BoundaryTrace& trace) {
    if (!(trace.layout == TraceLayout::of(g)) || trace.values.size() != g.trace_length()) {
        throw DimensionError("boundary trace of length " + std::to_string(trace.values.size()) +
                             " does not match the patch perimeter (" + std::to_string(g.trace_length()) + ")");
    }
}

Field2D boundary_field(const GridSpec& g, const BoundaryTrace& trace) {
    check_trace(g, trace);
    Field2D u(g);
    impose_trace(u, trace);
    return u;
}

/// 5-point finite-volume operator on interior unknowns (Dirichlet rows
/// eliminated).
SpMat assemble_fv(const GridSpec& g, const FaceCoefficients& faces, const InteriorIndex& idx) {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(idx.size()) * 5);
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) {
            const int row = idx(i, j);
            const double ke = faces.east(i, j);
            const double kw = faces.east(i - 1, j);
            const double kn = faces.north(i, j);
            const double ks = faces.north(i, j - 1);
            trips.emplace_back(row, row, ke + kw + kn + ks);
            if (i + 1 < g.nx()) trips.emplace_back(row, idx(i + 1, j), -ke);
            if (i - 1 > 0) trips.emplace_back(row, idx(i - 1, j), -kw);
            if (j + 1 < g.ny()) trips.emplace_back(row, idx(i, j + 1), -kn);
            if (j - 1 > 0) trips.emplace_back(row, idx(i, j - 1), -ks);
        }
    }
    SpMat a(idx.size(), idx.size());
    a.setFromTriplets(trips.begin(), trips.end());
    return a;
}

/// Right-hand side contributed by the Dirichlet values of u.
Eigen::VectorXd fv_boundary_rhs(const Field2D& u, const FaceCoefficients& faces, const InteriorIndex& idx) {
    const GridSpec& g = u.grid;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(idx.size());
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) {
            double s = 0.0;
            if (i + 1 == g.nx()) s += faces.east(i, j) * u.at(i + 1, j);
            if (i - 1 == 0) s += faces.east(i - 1, j) * u.at(i - 1, j);
            if (j + 1 == g.ny()) s += faces.north(i, j) * u.at(i, j + 1);
            if (j - 1 == 0) s += faces.north(i, j - 1) * u.at(i, j - 1);
            b[idx(i, j)] = s;
        }
    }
    return b;
}

Eigen::VectorXd gather_interior(const Field2D& u, const InteriorIndex& idx) {
    const GridSpec& g = u.grid;
    Eigen::VectorXd v(idx.size());
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) {
            v[idx(i, j)] = u.at(i, j);
        }
    }
    return v;
}

void scatter_interior(Field2D& u, const InteriorIndex& idx, const Eigen::VectorXd& v) {
    const GridSpec& g = u.grid;
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) {
            u.at(i, j) = v[idx(i, j)];
        }
    }
}

} // namespace

void SolveOptions::validate() const {
    if (!(newton_tol > 0.0) || !(pgd_tol > 0.0)) {
        throw DomainError("solver tolerances must be positive");
    }
    if (newton_max_iter < 1 || pgd_max_iter < 1) {
        throw DomainError("solver iteration caps must be at least 1");
    }
    if (!(armijo.c1 > 0.0 && armijo.c1 < 1.0) || !(armijo.factor > 0.0 && armijo.factor < 1.0) ||
        !(armijo.initial_step > 0.0)) {
        throw DomainError("invalid Armijo line-search parameters");
    }
}

FaceCoefficients::FaceCoefficients(const GridSpec& g, const Medium& kappa)
    : nx_(g.nx()),
      east_(static_cast<std::size_t>(g.nx()) * static_cast<std::size_t>(g.ny() + 1)),
      north_(static_cast<std::size_t>(g.nx() + 1) * static_cast<std::size_t>(g.ny())) {
    const double h = 0.5 * g.dx();
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            east_[static_cast<std::size_t>(j) * nx_ + i] = kappa(g.x(i) + h, g.y(j));
        }
    }
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            north_[static_cast<std::size_t>(j) * (nx_ + 1) + i] = kappa(g.x(i), g.y(j) + h);
        }
    }
}

Field2D transfinite_interpolation(const GridSpec& g, const BoundaryTrace& trace) {
    Field2D u = boundary_field(g, trace);
    const int nx = g.nx();
    const int ny = g.ny();
    for (int j = 1; j < ny; ++j) {
        const double t = static_cast<double>(j) / ny;
        for (int i = 1; i < nx; ++i) {
            const double s = static_cast<double>(i) / nx;
            u.at(i, j) = (1 - s) * u.at(0, j) + s * u.at(nx, j) + (1 - t) * u.at(i, 0) + t * u.at(i, ny) -
                         ((1 - s) * (1 - t) * u.at(0, 0) + s * (1 - t) * u.at(nx, 0) + (1 - s) * t * u.at(0, ny) +
                          s * t * u.at(nx, ny));
        }
    }
    return u;
}

// ---------------------------------------------------------------------------

LinearSolver::LinearSolver(const GridSpec& g, const Medium& kappa) : grid_(g), faces_(g, kappa), index_(g) {
    if (index_.size() > 0) {
        factor_.compute(assemble_fv(grid_, faces_, index_));
        if (factor_.info() != Eigen::Success) {
            throw LinearAlgebraError("finite-volume diffusion matrix is not positive definite");
        }
    }
}

LocalSolution LinearSolver::solve(const BoundaryTrace& trace) const {
    LocalSolution out{boundary_field(grid_, trace), 1, 0.0, {}};
    if (index_.size() == 0) {
        return out;
    }
    const Eigen::VectorXd b = fv_boundary_rhs(out.field, faces_, index_);
    const Eigen::VectorXd x = factor_.solve(b);
    if (factor_.info() != Eigen::Success || !x.allFinite()) {
        throw LinearAlgebraError("linear Dirichlet solve failed");
    }
    scatter_interior(out.field, index_, x);
    return out;
}

// ---------------------------------------------------------------------------

SemilinearSolver::SemilinearSolver(const GridSpec& g, const Medium& kappa, SolveOptions opts, double reaction)
    : grid_(g), faces_(g, kappa), index_(g), opts_(opts), reaction_(reaction) {
    opts_.validate();
    stiffness_ = assemble_fv(grid_, faces_, index_);
}

LocalSolution SemilinearSolver::solve(const BoundaryTrace& trace) const {
    LocalSolution out{transfinite_interpolation(grid_, trace), 0, 0.0, {}};
    const int n = index_.size();
    if (n == 0) {
        return out;
    }
    const double c = reaction_ * grid_.dx() * grid_.dx();
    const Eigen::VectorXd b = fv_boundary_rhs(out.field, faces_, index_);
    Eigen::VectorXd u = gather_interior(out.field, index_);

    auto residual = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd r = stiffness_ * v - b;
        r.array() += c * v.array().cube();
        return r;
    };

    Eigen::SimplicialLDLT<SpMat> solver;
    solver.analyzePattern(stiffness_);
    SpMat jac = stiffness_;

    Eigen::VectorXd r = residual(u);
    double rnorm = r.lpNorm<Eigen::Infinity>();
    out.history.push_back(rnorm);
    int it = 0;
    while (rnorm > opts_.newton_tol) {
        if (it >= opts_.newton_max_iter) {
            throw IterationLimitError("Newton did not converge in " + std::to_string(opts_.newton_max_iter) +
                                          " iterations (residual " + std::to_string(rnorm) + ")",
                                      rnorm);
        }
        jac = stiffness_;
        for (int k = 0; k < n; ++k) {
            jac.coeffRef(k, k) += 3.0 * c * u[k] * u[k];
        }
        solver.factorize(jac);
        if (solver.info() != Eigen::Success) {
            throw LinearAlgebraError("Newton Jacobian factorization failed");
        }
        const Eigen::VectorXd step = solver.solve(r);
        if (!step.allFinite()) {
            throw LinearAlgebraError("Newton step is not finite");
        }
        // Backtrack on the residual norm; the full step is accepted in the
        // asymptotic regime.
        double lambda = 1.0;
        Eigen::VectorXd trial = u - step;
        Eigen::VectorXd rt = residual(trial);
        double rt_norm = rt.lpNorm<Eigen::Infinity>();
        while (!(rt_norm < rnorm) && lambda > 1e-4) {
            lambda *= 0.5;
            trial = u - lambda * step;
            rt = residual(trial);
            rt_norm = rt.lpNorm<Eigen::Infinity>();
        }
        ++it;
        if (!(rt_norm < rnorm)) {
            // No decrease even for tiny steps: the residual sits at the
            // round-off floor of the full step.
            u = u - step;
            r = residual(u);
            rnorm = r.lpNorm<Eigen::Infinity>();
            out.history.push_back(rnorm);
            if (rnorm > opts_.newton_tol) {
                throw IterationLimitError("Newton stagnated at residual " + std::to_string(rnorm), rnorm);
            }
            break;
        }
        u = std::move(trial);
        r = std::move(rt);
        rnorm = rt_norm;
        out.history.push_back(rnorm);
    }
    scatter_interior(out.field, index_, u);
    out.iterations = it;
    out.final_residual = rnorm;
    return out;
}

// ---------------------------------------------------------------------------

PLaplaceSolver::PLaplaceSolver(const GridSpec& g, const Medium& kappa, double p, SolveOptions opts)
    : grid_(g), index_(g), p_(p), opts_(opts) {
    opts_.validate();
    if (!(p >= 2.0)) {
        throw DomainError("p-Laplace exponent must be at least 2");
    }
    const double h = g.dx();
    auto slot = [&](int i, int j) { return g.is_boundary(i, j) ? -1 : index_(i, j); };
    triangles_.reserve(2 * static_cast<std::size_t>(g.nx()) * static_cast<std::size_t>(g.ny()));
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            // Lower: a=(i,j), b=(i+1,j), c=(i+1,j+1); grad = ((ub-ua), (uc-ub)) / h.
            Triangle lower;
            lower.node = {g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1)};
            lower.slot = {slot(i, j), slot(i + 1, j), slot(i + 1, j + 1)};
            lower.bx = {-1.0, 1.0, 0.0};
            lower.by = {0.0, -1.0, 1.0};
            lower.kappa = kappa(g.x(i) + 2.0 * h / 3.0, g.y(j) + h / 3.0);
            triangles_.push_back(lower);
            // Upper: a=(i,j), c=(i+1,j+1), d=(i,j+1); grad = ((uc-ud), (ud-ua)) / h.
            Triangle upper;
            upper.node = {g.index(i, j), g.index(i + 1, j + 1), g.index(i, j + 1)};
            upper.slot = {slot(i, j), slot(i + 1, j + 1), slot(i, j + 1)};
            upper.bx = {0.0, 1.0, -1.0};
            upper.by = {-1.0, 0.0, 1.0};
            upper.kappa = kappa(g.x(i) + h / 3.0, g.y(j) + 2.0 * h / 3.0);
            triangles_.push_back(upper);
        }
    }
    if (index_.size() == 0) {
        return;
    }
    stiffness_ = assemble_hessian(nullptr, 2.0);
    precond_.compute(stiffness_);
    if (precond_.info() != Eigen::Success) {
        throw LinearAlgebraError("P1 stiffness preconditioner is not positive definite");
    }
}

double PLaplaceSolver::energy(const Field2D& u) const {
    const double h = grid_.dx();
    const double area = 0.5 * h * h;
    double e = 0.0;
    for (const Triangle& t : triangles_) {
        double gx = 0.0, gy = 0.0;
        for (int k = 0; k < 3; ++k) {
            gx += t.bx[k] * u.values[t.node[k]];
            gy += t.by[k] * u.values[t.node[k]];
        }
        gx /= h;
        gy /= h;
        e += t.kappa * std::pow(gx * gx + gy * gy + kGradientFloor, 0.5 * p_);
    }
    return area * e / p_;
}

double PLaplaceSolver::energy_gradient(const Field2D& u, double p, Eigen::VectorXd& grad) const {
    const double h = grid_.dx();
    const double area = 0.5 * h * h;
    grad.setZero(index_.size());
    double e = 0.0;
    for (const Triangle& t : triangles_) {
        double gx = 0.0, gy = 0.0;
        for (int k = 0; k < 3; ++k) {
            gx += t.bx[k] * u.values[t.node[k]];
            gy += t.by[k] * u.values[t.node[k]];
        }
        gx /= h;
        gy /= h;
        const double s = gx * gx + gy * gy + kGradientFloor;
        const double w = area * t.kappa * std::pow(s, 0.5 * (p - 2.0));
        e += w * s;
        for (int k = 0; k < 3; ++k) {
            if (t.slot[k] >= 0) {
                grad[t.slot[k]] += w * (gx * t.bx[k] + gy * t.by[k]) / h;
            }
        }
    }
    return e / p;
}

Eigen::SparseMatrix<double> PLaplaceSolver::assemble_hessian(const Field2D* u, double p) const {
    const double h = grid_.dx();
    const double area = 0.5 * h * h;
    std::vector<Triplet> trips;
    trips.reserve(triangles_.size() * 9);
    for (const Triangle& t : triangles_) {
        double gx = 0.0, gy = 0.0;
        if (u != nullptr) {
            for (int k = 0; k < 3; ++k) {
                gx += t.bx[k] * u->values[t.node[k]];
                gy += t.by[k] * u->values[t.node[k]];
            }
            gx /= h;
            gy /= h;
        }
        // d^2/dg^2 of (kappa/p) s^{p/2}: kappa [s^q I + (p-2) s^{q-1} g g^T], q = (p-2)/2.
        const double s = gx * gx + gy * gy + kGradientFloor;
        const double q = 0.5 * (p - 2.0);
        const double a = area * t.kappa * (p == 2.0 ? 1.0 : std::pow(s, q));
        const double c = (p == 2.0) ? 0.0 : area * t.kappa * (p - 2.0) * std::pow(s, q - 1.0);
        const double mxx = a + c * gx * gx;
        const double mxy = c * gx * gy;
        const double myy = a + c * gy * gy;
        for (int r = 0; r < 3; ++r) {
            if (t.slot[r] < 0) continue;
            for (int k = 0; k < 3; ++k) {
                if (t.slot[k] < 0) continue;
                const double v = (t.bx[r] * (mxx * t.bx[k] + mxy * t.by[k]) +
                                  t.by[r] * (mxy * t.bx[k] + myy * t.by[k])) /
                                 (h * h);
                if (v != 0.0) {
                    trips.emplace_back(t.slot[r], t.slot[k], v);
                }
            }
        }
    }
    SpMat m(index_.size(), index_.size());
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

LocalSolution PLaplaceSolver::solve(const BoundaryTrace& trace) const {
    LocalSolution out{boundary_field(grid_, trace), 0, 0.0, {}};
    const int n = index_.size();
    if (n == 0) {
        return out;
    }
    Field2D& u = out.field;

    // Start from the linear (p = 2) solution: K u_I = -K_IB u_B, where
    // K_IB u_B is the quadratic-energy gradient at u_I = 0.
    {
        Eigen::VectorXd g0(n);
        energy_gradient(u, 2.0, g0);
        scatter_interior(u, index_, -precond_.solve(g0));
    }

    Eigen::SimplicialLDLT<SpMat> newton;
    bool analyzed = false;
    auto direction = [&](const Eigen::VectorXd& grad) -> Eigen::VectorXd {
        if (opts_.pgd_preconditioner == DescentPreconditioner::Stiffness) {
            return -precond_.solve(grad);
        }
        SpMat hess = assemble_hessian(&u, p_);
        // Shift by a small multiple of K where the Hessian degenerates
        // (vanishing gradients for p > 2).
        const double scale = hess.diagonal().sum() / stiffness_.diagonal().sum();
        for (double shift = 1e-10; shift < 1.0; shift *= 100.0) {
            SpMat m = hess + (shift * scale) * stiffness_;
            if (!analyzed) {
                newton.analyzePattern(m);
                analyzed = true;
            }
            newton.factorize(m);
            if (newton.info() == Eigen::Success && (newton.vectorD().array() > 0.0).all()) {
                return -newton.solve(grad);
            }
        }
        return -precond_.solve(grad);
    };

    Eigen::VectorXd grad(n);
    double e = energy_gradient(u, p_, grad);
    double pnorm = precond_.solve(grad).lpNorm<Eigen::Infinity>();
    out.history.push_back(e);
    Eigen::VectorXd base = gather_interior(u, index_);
    Field2D trial = u;
    int it = 0;
    while (pnorm > opts_.pgd_tol) {
        if (it >= opts_.pgd_max_iter) {
            throw IterationLimitError("preconditioned gradient descent did not converge in " +
                                          std::to_string(opts_.pgd_max_iter) + " iterations (|K^-1 g| = " +
                                          std::to_string(pnorm) + ")",
                                      pnorm);
        }
        const Eigen::VectorXd dir = direction(grad);
        const double slope = grad.dot(dir);
        if (!(slope < 0.0) || !dir.allFinite()) {
            throw DescentError("no descent direction at iteration " + std::to_string(it));
        }
        double alpha = opts_.armijo.initial_step;
        double e_trial = 0.0;
        for (;;) {
            scatter_interior(trial, index_, base + alpha * dir);
            e_trial = energy(trial);
            // Energy differences below a few ulps of E are not resolvable.
            const double noise = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(e);
            if (e_trial <= e + opts_.armijo.c1 * alpha * slope + noise) {
                break;
            }
            alpha *= opts_.armijo.factor;
            if (alpha < 1e-20) {
                throw DescentError("Armijo line search underflow at iteration " + std::to_string(it) +
                                   " (|K^-1 g| = " + std::to_string(pnorm) + ", E = " + std::to_string(e) +
                                   ", slope = " + std::to_string(slope) + ")");
            }
        }
        ++it;
        base += alpha * dir;
        scatter_interior(u, index_, base);
        e = energy_gradient(u, p_, grad);
        pnorm = precond_.solve(grad).lpNorm<Eigen::Infinity>();
        out.history.push_back(e);
    }
    out.iterations = it;
    out.final_residual = pnorm;
    return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<LocalSolver> make_local_solver(const ProblemSpec& problem, const GridSpec& g,
                                               const SolveOptions& opts) {
    switch (problem.kind) {
    case ProblemKind::Semilinear: return std::make_unique<SemilinearSolver>(g, problem.medium(), opts);
    case ProblemKind::PLaplace: return std::make_unique<PLaplaceSolver>(g, problem.medium(), problem.p, opts);
    case ProblemKind::LinearDiffusion: return std::make_unique<LinearSolver>(g, problem.medium());
    }
    throw DomainError("unknown problem kind");
}

LocalSolution solve_linear(const GridSpec& g, const Medium& kappa, const BoundaryTrace& trace) {
    return LinearSolver(g, kappa).solve(trace);
}

LocalSolution solve_semilinear(const GridSpec& g, const Medium& kappa, const BoundaryTrace& trace,
                               const SolveOptions& opts) {
    return SemilinearSolver(g, kappa, opts).solve(trace);
}

LocalSolution solve_plaplace(const GridSpec& g, const Medium& kappa, double p, const BoundaryTrace& trace,
                             const SolveOptions& opts) {
    return PLaplaceSolver(g, kappa, p, opts).solve(trace);
}

} // namespace rosch
