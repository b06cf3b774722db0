#include "rosch/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rosch/errors.hpp"

namespace rosch {

namespace {

int cells_of(double length, double dx, const char* what) {
    const double ratio = length / dx;
    const double rounded = std::round(ratio);
    if (rounded < 0.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, rounded)) {
        throw AlignmentError(std::string(what) + " (" + std::to_string(length) +
                             ") is not an integer multiple of the mesh width " + std::to_string(dx));
    }
    return static_cast<int>(rounded);
}

std::string name(PatchIndex m) {
    return "(" + std::to_string(m.m1) + "," + std::to_string(m.m2) + ")";
}

/// Piecewise-linear 1D weight of patch k (1-based) out of M with cell size c
/// and overlap o, at global node i.
double ramp(int k, int M, int c, int o, int i) {
    double w = 1.0;
    if (k > 1) {
        const int lo = (k - 1) * c - o;
        w *= std::clamp(static_cast<double>(i - lo) / (2.0 * o), 0.0, 1.0);
    }
    if (k < M) {
        const int hi = k * c + o;
        w *= std::clamp(static_cast<double>(hi - i) / (2.0 * o), 0.0, 1.0);
    }
    return w;
}

} // namespace

Side opposite(Side s) noexcept {
    switch (s) {
    case Side::South: return Side::North;
    case Side::North: return Side::South;
    case Side::East: return Side::West;
    case Side::West: return Side::East;
    }
    return s;
}

Decomposition Decomposition::build(int M1, int M2, double dx_o, double dx_b, const GridSpec& global) {
    if (M1 < 1 || M2 < 1) {
        throw DomainError("patch counts must be at least 1");
    }
    if (dx_o < 0.0 || dx_b < 0.0) {
        throw DomainError("overlap and buffer margins must be nonnegative");
    }
    const double dx = global.dx();
    const int c1 = cells_of(global.width() / M1, dx, "patch width 1/M1");
    const int c2 = cells_of(global.height() / M2, dx, "patch height 1/M2");
    const int o = cells_of(dx_o, dx, "overlap margin dx_o");
    cells_of(dx_b, dx, "buffer margin dx_b");
    if ((M1 > 1 || M2 > 1) && o == 0) {
        throw DomainError("a multi-patch decomposition needs a positive overlap");
    }

    Decomposition d;
    d.M1_ = M1;
    d.M2_ = M2;
    d.dx_o_ = dx_o;
    d.dx_b_ = dx_b;
    d.global_ = global;
    for (int m2 = 1; m2 <= M2; ++m2) {
        for (int m1 = 1; m1 <= M1; ++m1) {
            const int i0 = std::max((m1 - 1) * c1 - o, 0);
            const int i1 = std::min(m1 * c1 + o, global.nx());
            const int j0 = std::max((m2 - 1) * c2 - o, 0);
            const int j1 = std::min(m2 * c2 + o, global.ny());
            Patch p;
            p.grid = GridSpec::build(global.node(i0, j0), {(i1 - i0) * dx, (j1 - j0) * dx}, dx);
            p.offset = {i0, j0};
            d.patches_.push_back(p);
            const PatchIndex m{m1, m2};
            d.all_.push_back(m);
            const bool touches = i0 == 0 || j0 == 0 || i1 == global.nx() || j1 == global.ny();
            (touches ? d.boundary_ : d.interior_).push_back(m);
        }
    }
    return d;
}

std::size_t Decomposition::id(PatchIndex m) const {
    if (!valid(m)) {
        throw TopologyError("patch index " + name(m) + " is out of range");
    }
    return static_cast<std::size_t>(m.m2 - 1) * static_cast<std::size_t>(M1_) + static_cast<std::size_t>(m.m1 - 1);
}

bool Decomposition::is_interior(PatchIndex m) const {
    return std::find(interior_.begin(), interior_.end(), m) != interior_.end();
}

GridSpec Decomposition::buffered_grid(PatchIndex m) const { return enlarged_grid(m, dx_b_); }

GridSpec Decomposition::enlarged_grid(PatchIndex m, double margin) const {
    const int b = cells_of(margin, global_.dx(), "buffer margin");
    const GridSpec& g = patch_grid(m);
    const auto [i0, j0] = offset(m);
    if (i0 - b < 0 || j0 - b < 0 || i0 + g.nx() + b > global_.nx() || j0 + g.ny() + b > global_.ny()) {
        throw GeometryError("buffered patch " + name(m) + " leaves the domain");
    }
    return GridSpec::build(global_.node(i0 - b, j0 - b), {(g.nx() + 2 * b) * g.dx(), (g.ny() + 2 * b) * g.dx()},
                           g.dx());
}

bool Decomposition::has_neighbor(PatchIndex m, Side direction) const {
    switch (direction) {
    case Side::West: return m.m1 > 1;
    case Side::East: return m.m1 < M1_;
    case Side::South: return m.m2 > 1;
    case Side::North: return m.m2 < M2_;
    }
    return false;
}

PatchIndex Decomposition::neighbor(PatchIndex m, Side direction) const {
    if (!has_neighbor(m, direction)) {
        throw TopologyError("patch " + name(m) + " has no neighbor in the requested direction");
    }
    switch (direction) {
    case Side::West: return {m.m1 - 1, m.m2};
    case Side::East: return {m.m1 + 1, m.m2};
    case Side::South: return {m.m1, m.m2 - 1};
    case Side::North: return {m.m1, m.m2 + 1};
    }
    return m;
}

namespace {
constexpr std::array<Side, 4> kNeighborOrder{Side::West, Side::East, Side::South, Side::North};
}

std::vector<PatchIndex> Decomposition::neighbors(PatchIndex m) const {
    id(m);
    std::vector<PatchIndex> out;
    for (Side d : kNeighborOrder) {
        if (has_neighbor(m, d)) {
            out.push_back(neighbor(m, d));
        }
    }
    return out;
}

std::vector<SegmentInfo> Decomposition::output_layout(PatchIndex m) const {
    std::vector<SegmentInfo> out;
    std::size_t offset = 0;
    for (Side d : kNeighborOrder) {
        if (!has_neighbor(m, d)) {
            continue;
        }
        const PatchIndex l = neighbor(m, d);
        const Side s = opposite(d);
        const std::size_t len = static_cast<std::size_t>(TraceLayout::of(patch_grid(l)).side_nodes(s));
        out.push_back({l, d, s, offset, len});
        offset += len;
    }
    return out;
}

std::size_t Decomposition::output_size(PatchIndex m) const {
    std::size_t n = 0;
    for (const auto& s : output_layout(m)) {
        n += s.length;
    }
    return n;
}

bool Decomposition::on_physical_boundary(PatchIndex m, Side s) const {
    const GridSpec& g = patch_grid(m);
    const auto [i0, j0] = offset(m);
    switch (s) {
    case Side::West: return i0 == 0;
    case Side::South: return j0 == 0;
    case Side::East: return i0 + g.nx() == global_.nx();
    case Side::North: return j0 + g.ny() == global_.ny();
    }
    return false;
}

// ---------------------------------------------------------------------------

PartitionOfUnity PartitionOfUnity::build(const Decomposition& decomp) {
    const GridSpec& global = decomp.global();
    const double dx = global.dx();
    const int c1 = static_cast<int>(std::lround(global.width() / decomp.M1() / dx));
    const int c2 = static_cast<int>(std::lround(global.height() / decomp.M2() / dx));
    const int o = static_cast<int>(std::lround(decomp.dx_o() / dx));

    auto raw = [&](PatchIndex m, int gi, int gj) {
        if (decomp.M1() == 1 && decomp.M2() == 1) {
            return 1.0;
        }
        return ramp(m.m1, decomp.M1(), c1, o, gi) * ramp(m.m2, decomp.M2(), c2, o, gj);
    };

    Field2D total(global);
    for (PatchIndex m : decomp.all()) {
        const GridSpec& g = decomp.patch_grid(m);
        const auto [i0, j0] = decomp.offset(m);
        for (int j = 0; j <= g.ny(); ++j) {
            for (int i = 0; i <= g.nx(); ++i) {
                total.at(i0 + i, j0 + j) += raw(m, i0 + i, j0 + j);
            }
        }
    }
    PartitionOfUnity pou;
    for (PatchIndex m : decomp.all()) {
        const GridSpec& g = decomp.patch_grid(m);
        const auto [i0, j0] = decomp.offset(m);
        Field2D w(g);
        for (int j = 0; j <= g.ny(); ++j) {
            for (int i = 0; i <= g.nx(); ++i) {
                const double t = total.at(i0 + i, j0 + j);
                w.at(i, j) = t > 0.0 ? raw(m, i0 + i, j0 + j) / t : 0.0;
            }
        }
        pou.weights_.push_back(std::move(w));
    }
    return pou;
}

Field2D PartitionOfUnity::global_weight(const Decomposition& decomp, PatchIndex m) const {
    Field2D out(decomp.global());
    const Field2D& w = weight(decomp.id(m));
    const auto [i0, j0] = decomp.offset(m);
    for (int j = 0; j <= w.grid.ny(); ++j) {
        for (int i = 0; i <= w.grid.nx(); ++i) {
            out.at(i0 + i, j0 + j) = w.at(i, j);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<double> restrict_to(const Decomposition& decomp, PatchIndex m, const Field2D& u_m, PatchIndex l) {
    if (!(u_m.grid == decomp.patch_grid(m))) {
        throw DimensionError("local field does not live on patch " + name(m));
    }
    Side direction = Side::West;
    bool found = false;
    for (Side d : kNeighborOrder) {
        if (decomp.has_neighbor(m, d) && decomp.neighbor(m, d) == l) {
            direction = d;
            found = true;
        }
    }
    if (!found) {
        throw TopologyError("patch " + name(l) + " is not a neighbor of " + name(m));
    }
    const Side side = opposite(direction);
    const GridSpec& gl = decomp.patch_grid(l);
    const auto [li, lj] = decomp.offset(l);
    const auto [mi, mj] = decomp.offset(m);
    const TraceLayout layout = TraceLayout::of(gl);
    std::vector<double> out(static_cast<std::size_t>(layout.side_nodes(side)));
    for (std::size_t t = 0; t < out.size(); ++t) {
        const auto [i, j] = layout.node_of(layout.position(side, static_cast<int>(t)));
        const int ui = li + i - mi;
        const int uj = lj + j - mj;
        if (ui < 0 || uj < 0 || ui > u_m.grid.nx() || uj > u_m.grid.ny()) {
            throw GeometryError("segment of " + name(l) + " leaves patch " + name(m));
        }
        out[t] = u_m.at(ui, uj);
    }
    return out;
}

std::vector<double> restrict_all(const Decomposition& decomp, PatchIndex m, const Field2D& u_m) {
    std::vector<double> out;
    out.reserve(decomp.output_size(m));
    for (PatchIndex l : decomp.neighbors(m)) {
        const auto seg = restrict_to(decomp, m, u_m, l);
        out.insert(out.end(), seg.begin(), seg.end());
    }
    return out;
}

std::vector<double> q_exact(const LocalSolver& solver, const Decomposition& decomp, PatchIndex m,
                            const BoundaryTrace& phi) {
    return restrict_all(decomp, m, solver.solve(phi).field);
}

std::vector<double> q_exact(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m,
                            const BoundaryTrace& phi, const SolveOptions& opts) {
    const auto solver = make_local_solver(problem, decomp.patch_grid(m), opts);
    return q_exact(*solver, decomp, m, phi);
}

Field2D assemble_global(const Decomposition& decomp, const PartitionOfUnity& pou,
                        const std::vector<Field2D>& local_fields) {
    if (local_fields.size() != decomp.size()) {
        throw DimensionError("need one local field per patch");
    }
    Field2D u(decomp.global());
    for (std::size_t k = 0; k < decomp.size(); ++k) {
        const PatchIndex m = decomp.index(k);
        const Field2D& um = local_fields[k];
        if (!(um.grid == decomp.patch_grid(m))) {
            throw DimensionError("local field " + std::to_string(k) + " is not on its patch grid");
        }
        const Field2D& w = pou.weight(k);
        const auto [i0, j0] = decomp.offset(m);
        for (int j = 0; j <= um.grid.ny(); ++j) {
            for (int i = 0; i <= um.grid.nx(); ++i) {
                u.at(i0 + i, j0 + j) += w.at(i, j) * um.at(i, j);
            }
        }
    }
    return u;
}

Field2D physical_boundary(const GridSpec& global, const BoundaryCondition& bc) {
    Field2D f(global);
    const int nx = global.nx();
    const int ny = global.ny();
    for (int i = 0; i <= nx; ++i) {
        f.at(i, 0) = bc.south(global.x(i));
        f.at(i, ny) = bc.north(global.x(i));
    }
    for (int j = 0; j <= ny; ++j) {
        f.at(0, j) = bc.west(global.y(j));
        f.at(nx, j) = bc.east(global.y(j));
    }
    // Corners: average of the two incident sides.
    f.at(0, 0) = 0.5 * (bc.south(global.x(0)) + bc.west(global.y(0)));
    f.at(nx, 0) = 0.5 * (bc.south(global.x(nx)) + bc.east(global.y(0)));
    f.at(0, ny) = 0.5 * (bc.north(global.x(0)) + bc.west(global.y(ny)));
    f.at(nx, ny) = 0.5 * (bc.north(global.x(nx)) + bc.east(global.y(ny)));
    return f;
}

} // namespace rosch
