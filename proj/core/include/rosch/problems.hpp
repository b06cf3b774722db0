#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>

namespace rosch {

enum class ProblemKind { Semilinear, PLaplace, LinearDiffusion };

std::string_view to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(std::string_view name);

using Medium = std::function<double(double, double)>;

/// Oscillatory medium of the semilinear problem with scale eps.
double kappa_semilinear(double x1, double x2, double eps);

/// Six-term oscillatory medium of the p-Laplace problem (fixed scales 1/5, 1/13, 1/17, 1/31, 1/65).
double kappa_plaplace(double x, double y);

inline constexpr std::array<double, 5> kPLaplaceScales{1.0 / 5, 1.0 / 13, 1.0 / 17, 1.0 / 31, 1.0 / 65};

struct ProblemSpec {
    ProblemKind kind = ProblemKind::Semilinear;
    /// Which medium the problem uses; LinearDiffusion keeps the medium of the
    /// problem it linearizes.
    ProblemKind medium_family = ProblemKind::Semilinear;
    double epsilon = 1.0 / 16;
    double p = 6.0;

    static ProblemSpec semilinear(double eps);
    static ProblemSpec plaplace(double p = 6.0);

    /// Same medium with the nonlinearity stripped.
    ProblemSpec linearized() const;

    double kappa(double x, double y) const;
    Medium medium() const;
};

/// Dirichlet data on the unit square: one function per side.
struct BoundaryCondition {
    std::function<double(double)> south; // phi(x, 0)
    std::function<double(double)> north; // phi(x, 1)
    std::function<double(double)> west;  // phi(0, y)
    std::function<double(double)> east;  // phi(1, y)

    /// Value at a point of the unit-square boundary. Corners average the two
    /// incident sides.
    double operator()(double x, double y) const;
};

/// Tabulated global boundary conditions, index 1..3. Throws LookupError.
BoundaryCondition bc_catalog(ProblemKind kind, int index);

} // namespace rosch
