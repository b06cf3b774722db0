#include "rosch/problems.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rosch/errors.hpp"

namespace rosch {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
} // namespace

std::string_view to_string(ProblemKind kind) {
    switch (kind) {
    case ProblemKind::Semilinear: return "semilinear";
    case ProblemKind::PLaplace: return "plaplace";
    case ProblemKind::LinearDiffusion: return "linear";
    }
    return "unknown";
}

ProblemKind problem_kind_from_string(std::string_view name) {
    if (name == "semilinear") return ProblemKind::Semilinear;
    if (name == "plaplace" || name == "p-laplace") return ProblemKind::PLaplace;
    if (name == "linear") return ProblemKind::LinearDiffusion;
    throw LookupError("unknown problem kind '" + std::string(name) + "'");
}

double kappa_semilinear(double x1, double x2, double eps) {
    return 2.0 + std::sin(kTwoPi * x1) * std::cos(kTwoPi * x2) +
           (2.0 + 1.8 * std::sin(kTwoPi * x1 / eps)) / (2.0 + 1.8 * std::cos(kTwoPi * x2 / eps)) +
           (2.0 + std::sin(kTwoPi * x2 / eps)) / (2.0 + 1.8 * std::cos(kTwoPi * x1 / eps));
}

double kappa_plaplace(double x, double y) {
    const auto& e = kPLaplaceScales;
    const double t1 = (1.1 + std::sin(kTwoPi * x / e[0])) / (1.1 + std::sin(kTwoPi * y / e[0]));
    const double t2 = (1.1 + std::sin(kTwoPi * y / e[1])) / (1.1 + std::cos(kTwoPi * x / e[1]));
    const double t3 = (1.1 + std::cos(kTwoPi * x / e[2])) / (1.1 + std::sin(kTwoPi * y / e[2]));
    const double t4 = (1.1 + std::sin(kTwoPi * y / e[3])) / (1.1 + std::cos(kTwoPi * x / e[3]));
    const double t5 = (1.1 + std::cos(kTwoPi * x / e[4])) / (1.1 + std::sin(kTwoPi * y / e[4]));
    return (t1 + t2 + t3 + t4 + t5 + std::sin(4.0 * x * x * y * y) + 1.0) / 6.0;
}

ProblemSpec ProblemSpec::semilinear(double eps) {
    ProblemSpec s;
    s.kind = ProblemKind::Semilinear;
    s.medium_family = ProblemKind::Semilinear;
    s.epsilon = eps;
    return s;
}

ProblemSpec ProblemSpec::plaplace(double p) {
    ProblemSpec s;
    s.kind = ProblemKind::PLaplace;
    s.medium_family = ProblemKind::PLaplace;
    s.p = p;
    return s;
}

ProblemSpec ProblemSpec::linearized() const {
    ProblemSpec s = *this;
    s.kind = ProblemKind::LinearDiffusion;
    return s;
}

double ProblemSpec::kappa(double x, double y) const {
    return medium_family == ProblemKind::PLaplace ? kappa_plaplace(x, y) : kappa_semilinear(x, y, epsilon);
}

Medium ProblemSpec::medium() const {
    if (medium_family == ProblemKind::PLaplace) {
        return [](double x, double y) { return kappa_plaplace(x, y); };
    }
    const double eps = epsilon;
    return [eps](double x, double y) { return kappa_semilinear(x, y, eps); };
}

double BoundaryCondition::operator()(double x, double y) const {
    double sum = 0.0;
    int count = 0;
    if (y == 0.0) { sum += south(x); ++count; }
    if (y == 1.0) { sum += north(x); ++count; }
    if (x == 0.0) { sum += west(y); ++count; }
    if (x == 1.0) { sum += east(y); ++count; }
    if (count == 0) {
        throw DomainError("point is not on the boundary of the unit square");
    }
    return sum / count;
}

BoundaryCondition bc_catalog(ProblemKind kind, int index) {
    using std::sin;
    BoundaryCondition bc;
    if (kind == ProblemKind::Semilinear) {
        switch (index) {
        case 1:
            bc.south = [](double) { return 40.0; };
            bc.north = [](double) { return 40.0; };
            bc.west = [](double) { return 40.0; };
            bc.east = [](double) { return 40.0; };
            return bc;
        case 2:
            bc.south = [](double x) { return 50.0 - 50.0 * sin(kTwoPi * x); };
            bc.north = [](double x) { return 50.0 + 50.0 * sin(kTwoPi * x); };
            bc.west = [](double y) { return 50.0 + 50.0 * sin(kTwoPi * y); };
            bc.east = [](double y) { return 50.0 - 50.0 * sin(kTwoPi * y); };
            return bc;
        case 3:
            bc.south = [](double) { return 10.0; };
            bc.north = [](double) { return 35.0; };
            bc.west = [](double y) { return 10.0 + 25.0 * y; };
            bc.east = [](double y) { return 10.0 + 25.0 * y; };
            return bc;
        default: break;
        }
    } else if (kind == ProblemKind::PLaplace) {
        switch (index) {
        case 1:
            bc.south = [](double x) { return -sin(kTwoPi * x); };
            bc.north = [](double x) { return sin(kTwoPi * x); };
            bc.west = [](double y) { return sin(kTwoPi * y); };
            bc.east = [](double y) { return -sin(kTwoPi * y); };
            return bc;
        case 2:
            bc.south = [](double x) { return -sin(2.0 * kTwoPi * x); };
            bc.north = [](double x) { return sin(2.0 * kTwoPi * x); };
            bc.west = [](double y) { return sin(2.0 * kTwoPi * y); };
            bc.east = [](double y) { return -sin(2.0 * kTwoPi * y); };
            return bc;
        case 3:
            bc.south = [](double) { return -1.0; };
            bc.north = [](double) { return 1.0; };
            bc.west = [](double y) { return 2.0 * y * y - 1.0; };
            bc.east = [](double y) { return 2.0 * y * y - 1.0; };
            return bc;
        default: break;
        }
    }
    throw LookupError("no boundary condition #" + std::to_string(index) + " for problem '" +
                      std::string(to_string(kind)) + "'");
}

} // namespace rosch
