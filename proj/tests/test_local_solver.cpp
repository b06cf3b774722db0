#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "rosch/errors.hpp"
#include "rosch/local_solver.hpp"
#include "rosch/problems.hpp"

using namespace rosch;

namespace {

double one(double, double) { return 1.0; }

Medium semilinear_medium() {
    return [](double x, double y) { return kappa_semilinear(x, y, 0.125); };
}

BoundaryTrace random_trace(const GridSpec& g, double amplitude, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    Field2D f(g);
    for (double& v : f.values) {
        v = u(rng);
    }
    return extract_trace(f);
}

// Dense residual of the five-point finite-volume operator with an optional
// cubic reaction; unknowns are interior nodes in row-major order.
struct DenseFv {
    GridSpec g;
    Medium kappa;
    double reaction;
    Field2D boundary;

    int n() const { return (g.nx() - 1) * (g.ny() - 1); }
    int id(int i, int j) const { return (j - 1) * (g.nx() - 1) + (i - 1); }

    Field2D with(const Eigen::VectorXd& u) const {
        Field2D f = boundary;
        for (int j = 1; j < g.ny(); ++j) {
            for (int i = 1; i < g.nx(); ++i) {
                f.at(i, j) = u[id(i, j)];
            }
        }
        return f;
    }

    void eval(const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd& J) const {
        const Field2D f = with(u);
        const double h = g.dx();
        r.setZero(n());
        J.setZero(n(), n());
        for (int j = 1; j < g.ny(); ++j) {
            for (int i = 1; i < g.nx(); ++i) {
                const int k = id(i, j);
                const int di[4] = {1, -1, 0, 0};
                const int dj[4] = {0, 0, 1, -1};
                for (int s = 0; s < 4; ++s) {
                    const int a = i + di[s];
                    const int b = j + dj[s];
                    const double kf = kappa(g.x(i) + 0.5 * di[s] * h, g.y(j) + 0.5 * dj[s] * h);
                    r[k] += kf * (f.at(i, j) - f.at(a, b));
                    J(k, k) += kf;
                    if (!g.is_boundary(a, b)) {
                        J(k, id(a, b)) -= kf;
                    }
                }
                r[k] += reaction * h * h * std::pow(f.at(i, j), 3);
                J(k, k) += 3.0 * reaction * h * h * f.at(i, j) * f.at(i, j);
            }
        }
    }

    Field2D solve() const {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(n());
        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        for (int it = 0; it < 200; ++it) {
            eval(u, r, J);
            if (r.lpNorm<Eigen::Infinity>() < 1e-13) {
                break;
            }
            const Eigen::VectorXd step = J.fullPivLu().solve(r);
            double t = 1.0;
            const double r0 = r.norm();
            Eigen::VectorXd trial;
            for (;;) {
                trial = u - t * step;
                Eigen::VectorXd rt;
                Eigen::MatrixXd Jt;
                eval(trial, rt, Jt);
                if (rt.norm() < r0 || t < 1e-6) {
                    break;
                }
                t *= 0.5;
            }
            u = trial;
        }
        return with(u);
    }
};

double max_abs_diff(const Field2D& a, const Field2D& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        m = std::max(m, std::abs(a.values[k] - b.values[k]));
    }
    return m;
}

Field2D with_boundary(const GridSpec& g, const BoundaryTrace& t) {
    Field2D f(g);
    impose_trace(f, t);
    return f;
}

// P1 energy on the diagonal-split triangulation, minimized by damped Newton
// with an analytic dense Hessian.
struct DensePLaplace {
    GridSpec g;
    Medium kappa;
    double p;
    Field2D boundary;

    struct Tri {
        std::array<std::array<int, 2>, 3> v;
        std::array<double, 3> gx, gy;
        double k;
    };

    std::vector<Tri> tris() const {
        std::vector<Tri> out;
        const double h = g.dx();
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                out.push_back({{{{i, j}, {i + 1, j}, {i + 1, j + 1}}},
                               {-1 / h, 1 / h, 0},
                               {0, -1 / h, 1 / h},
                               kappa(g.x(i) + 2 * h / 3, g.y(j) + h / 3)});
                out.push_back({{{{i, j}, {i + 1, j + 1}, {i, j + 1}}},
                               {0, 1 / h, -1 / h},
                               {-1 / h, 0, 1 / h},
                               kappa(g.x(i) + h / 3, g.y(j) + 2 * h / 3)});
            }
        }
        return out;
    }

    int id(int i, int j) const { return g.is_boundary(i, j) ? -1 : (j - 1) * (g.nx() - 1) + (i - 1); }

    double energy(const Field2D& f, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
        const int n = (g.nx() - 1) * (g.ny() - 1);
        const double area = 0.5 * g.dx() * g.dx();
        if (grad) grad->setZero(n);
        if (hess) hess->setZero(n, n);
        double e = 0.0;
        for (const Tri& t : tris()) {
            double ux = 0, uy = 0;
            for (int k = 0; k < 3; ++k) {
                const double u = f.at(t.v[k][0], t.v[k][1]);
                ux += t.gx[k] * u;
                uy += t.gy[k] * u;
            }
            const double s = ux * ux + uy * uy;
            e += area * t.k / p * std::pow(s, p / 2);
            for (int a = 0; a < 3; ++a) {
                const int ia = id(t.v[a][0], t.v[a][1]);
                if (ia < 0) continue;
                const double da = ux * t.gx[a] + uy * t.gy[a];
                if (grad) (*grad)[ia] += area * t.k * std::pow(s, p / 2 - 1) * da;
                if (!hess) continue;
                for (int b = 0; b < 3; ++b) {
                    const int ib = id(t.v[b][0], t.v[b][1]);
                    if (ib < 0) continue;
                    const double db = ux * t.gx[b] + uy * t.gy[b];
                    const double gg = t.gx[a] * t.gx[b] + t.gy[a] * t.gy[b];
                    (*hess)(ia, ib) += area * t.k *
                                       (std::pow(s, p / 2 - 1) * gg + (p - 2) * std::pow(s, p / 2 - 2) * da * db);
                }
            }
        }
        return e;
    }

    Field2D minimize() const {
        Field2D f = boundary;
        const int n = (g.nx() - 1) * (g.ny() - 1);
        Eigen::VectorXd grad;
        Eigen::MatrixXd hess;
        double e = energy(f, &grad, &hess);
        for (int it = 0; it < 500 && grad.norm() > 1e-15; ++it) {
            const Eigen::VectorXd step =
                (hess + 1e-12 * Eigen::MatrixXd::Identity(n, n)).ldlt().solve(grad);
            double t = 1.0;
            for (; t > 1e-12; t *= 0.5) {
                Field2D trial = f;
                for (int j = 1; j < g.ny(); ++j)
                    for (int i = 1; i < g.nx(); ++i) trial.at(i, j) -= t * step[id(i, j)];
                const double et = energy(trial, nullptr, nullptr);
                if (et <= e) {
                    f = trial;
                    break;
                }
            }
            if (t <= 1e-12) break;
            e = energy(f, &grad, &hess);
        }
        return f;
    }
};

} // namespace

TEST(LinearSolver, AffineFieldReproduced) {
    const GridSpec g = GridSpec::build({0.25, 0.5}, {0.5, 0.375}, 1.0 / 32);
    Field2D exact(g);
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            exact.at(i, j) = 1.5 - 2.0 * g.x(i) + 0.75 * g.y(j);
        }
    }
    const LocalSolution s = solve_linear(g, one, extract_trace(exact));
    EXPECT_LE(max_abs_diff(s.field, exact), 1e-12);
}

TEST(LinearSolver, MaximumPrincipleAndBoundaryExactness) {
    const GridSpec g = GridSpec::build({0, 0}, {0.5, 0.5}, 1.0 / 32);
    const BoundaryTrace t = random_trace(g, 3.0, 11);
    const LocalSolution s = solve_linear(g, semilinear_medium(), t);
    const double lo = *std::min_element(t.values.begin(), t.values.end());
    const double hi = *std::max_element(t.values.begin(), t.values.end());
    for (double v : s.field.values) {
        EXPECT_GE(v, lo - 1e-12);
        EXPECT_LE(v, hi + 1e-12);
    }
    EXPECT_EQ(extract_trace(s.field).values, t.values);
}

TEST(LinearSolver, MatchesDenseSolve) {
    const GridSpec g = GridSpec::build({0, 0}, {1, 1}, 1.0 / 8);
    const BoundaryTrace t = random_trace(g, 2.0, 5);
    DenseFv dense{g, semilinear_medium(), 0.0, with_boundary(g, t)};
    const LinearSolver solver(g, semilinear_medium());
    EXPECT_LE(max_abs_diff(solver.solve(t).field, dense.solve()), 1e-12);
}

TEST(SemilinearSolver, ZeroTraceIsImmediate) {
    const GridSpec g = GridSpec::build({0, 0}, {0.5, 0.5}, 1.0 / 16);
    const LocalSolution s = solve_semilinear(g, semilinear_medium(), BoundaryTrace(TraceLayout::of(g)), {});
    EXPECT_LE(s.iterations, 1);
    for (double v : s.field.values) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(SemilinearSolver, BilinearHarmonicWithoutReaction) {
    const GridSpec g = GridSpec::build({0, 0}, {1, 1}, 1.0 / 16);
    Field2D exact(g);
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            exact.at(i, j) = g.x(i) * g.y(j);
        }
    }
    const SemilinearSolver solver(g, one, {}, 0.0);
    EXPECT_LE(max_abs_diff(solver.solve(extract_trace(exact)).field, exact), 1e-12);
}

TEST(SemilinearSolver, MatchesDenseNewton) {
    const GridSpec g = GridSpec::build({0, 0}, {1, 1}, 1.0 / 8);
    const BoundaryTrace t = random_trace(g, 40.0, 17);
    DenseFv dense{g, semilinear_medium(), 1.0, with_boundary(g, t)};
    const LocalSolution s = solve_semilinear(g, semilinear_medium(), t, {});
    EXPECT_LE(max_abs_diff(s.field, dense.solve()), 1e-8);
    EXPECT_LE(s.final_residual, SolveOptions{}.newton_tol);
    ASSERT_GE(s.history.size(), 2u);
    EXPECT_LT(s.history.back(), s.history[s.history.size() - 2]);
}

TEST(SemilinearSolver, IterationCapReported) {
    const GridSpec g = GridSpec::build({0, 0}, {1, 1}, 1.0 / 8);
    SolveOptions opts;
    opts.newton_max_iter = 1;
    EXPECT_THROW(solve_semilinear(g, semilinear_medium(), random_trace(g, 500.0, 2), opts), IterationLimitError);
}

TEST(PLaplaceSolver, ConstantTraceGivesConstantField) {
    const GridSpec g = GridSpec::build({0, 0}, {0.5, 0.5}, 1.0 / 16);
    const PLaplaceSolver solver(g, kappa_plaplace, 6.0, {});
    const LocalSolution s = solver.solve(BoundaryTrace(TraceLayout::of(g), 0.7));
    for (double v : s.field.values) {
        EXPECT_NEAR(v, 0.7, 1e-12);
    }
    EXPECT_LE(solver.energy(s.field), 1e-12);
}

TEST(PLaplaceSolver, QuadraticCaseMatchesLinearSolve) {
    const GridSpec g = GridSpec::build({0, 0}, {1, 1}, 1.0 / 16);
    const BoundaryTrace t = random_trace(g, 1.0, 23);
    const LocalSolution a = solve_plaplace(g, one, 2.0, t, {});
    const LocalSolution b = solve_linear(g, one, t);
    EXPECT_LE(max_abs_diff(a.field, b.field), 1e-8);
}

TEST(PLaplaceSolver, MatchesDenseEnergyMinimization) {
    const GridSpec g = GridSpec::build({0, 0}, {1, 1}, 1.0 / 8);
    const BoundaryTrace t = random_trace(g, 1.0, 29);
    DensePLaplace dense{g, kappa_plaplace, 6.0, with_boundary(g, t)};
    const Field2D ref = dense.minimize();
    const PLaplaceSolver solver(g, kappa_plaplace, 6.0, {});
    const LocalSolution s = solver.solve(t);
    const double e_ref = dense.energy(ref, nullptr, nullptr);
    const double e_sol = dense.energy(s.field, nullptr, nullptr);
    EXPECT_NEAR(e_sol, e_ref, 1e-6 * e_ref);
    EXPECT_NEAR(solver.energy(s.field), e_sol, 1e-6 * e_ref);
}

TEST(PLaplaceSolver, EnergyNonIncreasing) {
    const GridSpec g = GridSpec::build({0, 0}, {0.5, 0.5}, 1.0 / 16);
    const BoundaryTrace t = random_trace(g, 5.0, 31);
    const PLaplaceSolver solver(g, kappa_plaplace, 6.0, {});
    const double e0 = solver.energy(transfinite_interpolation(g, t));
    const LocalSolution s = solver.solve(t);
    EXPECT_LE(solver.energy(s.field), e0);
}

TEST(LocalSolver, TraceShapeChecked) {
    const GridSpec g = GridSpec::build({0, 0}, {0.5, 0.5}, 1.0 / 16);
    const GridSpec other = GridSpec::build({0, 0}, {0.25, 0.5}, 1.0 / 16);
    const LinearSolver solver(g, one);
    EXPECT_THROW(solver.solve(BoundaryTrace(TraceLayout::of(other))), Error);
}

TEST(LocalSolver, FactoryDispatchesOnKind) {
    const GridSpec g = GridSpec::build({0, 0}, {0.5, 0.5}, 1.0 / 16);
    const BoundaryTrace t = random_trace(g, 2.0, 41);
    const auto lin = make_local_solver(ProblemSpec::semilinear(0.125).linearized(), g, {});
    EXPECT_LE(max_abs_diff(lin->solve(t).field, solve_linear(g, semilinear_medium(), t).field), 1e-13);
    const auto semi = make_local_solver(ProblemSpec::semilinear(0.125), g, {});
    EXPECT_LE(max_abs_diff(semi->solve(t).field, solve_semilinear(g, semilinear_medium(), t, {}).field), 1e-13);
}
