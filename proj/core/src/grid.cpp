#include "rosch/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rosch/errors.hpp"

namespace rosch {

namespace {

int aligned_count(double extent, double dx, const char* axis) {
    const double ratio = extent / dx;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-12 * std::max(1.0, rounded)) {
        throw AlignmentError(std::string("extent along ") + axis + " (" + std::to_string(extent) +
                             ") is not a positive integer multiple of dx (" + std::to_string(dx) + ")");
    }
    return static_cast<int>(rounded);
}

} // namespace

GridSpec GridSpec::build(Point origin, Point extent, double dx) {
    if (!(dx > 0.0) || !std::isfinite(dx)) {
        throw AlignmentError("mesh width must be positive and finite");
    }
    GridSpec g;
    g.origin_ = origin;
    g.dx_ = dx;
    g.nx_ = aligned_count(extent.x, dx, "x");
    g.ny_ = aligned_count(extent.y, dx, "y");
    return g;
}

std::size_t TraceLayout::side_offset(Side s) const noexcept {
    const auto sx = static_cast<std::size_t>(nx + 1);
    const auto sy = static_cast<std::size_t>(ny + 1);
    switch (s) {
    case Side::South: return 0;
    case Side::East: return sx;
    case Side::North: return sx + sy;
    case Side::West: return 2 * sx + sy;
    }
    return 0;
}

std::array<int, 2> TraceLayout::node_of(std::size_t k) const {
    if (k >= size()) {
        throw SizeError("trace position out of range");
    }
    for (Side s : {Side::West, Side::North, Side::East, Side::South}) {
        const std::size_t off = side_offset(s);
        if (k >= off) {
            const int t = static_cast<int>(k - off);
            switch (s) {
            case Side::South: return {t, 0};
            case Side::East: return {nx, t};
            case Side::North: return {t, ny};
            case Side::West: return {0, t};
            }
        }
    }
    return {0, 0};
}

BoundaryTrace::BoundaryTrace(const TraceLayout& l, std::vector<double> v) : layout(l), values(std::move(v)) {
    if (values.size() != layout.size()) {
        throw DimensionError("trace length " + std::to_string(values.size()) + " does not match layout length " +
                             std::to_string(layout.size()));
    }
}

std::span<double> BoundaryTrace::side(Side s) {
    return std::span<double>(values).subspan(layout.side_offset(s), static_cast<std::size_t>(layout.side_nodes(s)));
}

std::span<const double> BoundaryTrace::side(Side s) const {
    return std::span<const double>(values).subspan(layout.side_offset(s),
                                                   static_cast<std::size_t>(layout.side_nodes(s)));
}

std::array<std::array<std::size_t, 2>, 4> corner_pairs(const TraceLayout& l) {
    return {{
        {l.position(Side::South, 0), l.position(Side::West, 0)},
        {l.position(Side::South, l.nx), l.position(Side::East, 0)},
        {l.position(Side::East, l.ny), l.position(Side::North, l.nx)},
        {l.position(Side::North, 0), l.position(Side::West, l.ny)},
    }};
}

bool corners_consistent(const BoundaryTrace& t, double tol) {
    for (const auto& [a, b] : corner_pairs(t.layout)) {
        if (std::abs(t.values[a] - t.values[b]) > tol) {
            return false;
        }
    }
    return true;
}

void average_corners(BoundaryTrace& t) {
    for (const auto& [a, b] : corner_pairs(t.layout)) {
        const double mean = 0.5 * (t.values[a] + t.values[b]);
        t.values[a] = mean;
        t.values[b] = mean;
    }
}

std::vector<std::size_t> dedup_positions(const TraceLayout& l) {
    std::vector<bool> drop(l.size(), false);
    for (const auto& pair : corner_pairs(l)) {
        drop[pair[1]] = true;
    }
    std::vector<std::size_t> keep;
    keep.reserve(l.size() - 4);
    for (std::size_t k = 0; k < l.size(); ++k) {
        if (!drop[k]) {
            keep.push_back(k);
        }
    }
    return keep;
}

BoundaryTrace extract_trace(const Field2D& f) {
    BoundaryTrace t(TraceLayout::of(f.grid));
    for (std::size_t k = 0; k < t.size(); ++k) {
        const auto [i, j] = t.layout.node_of(k);
        t.values[k] = f.at(i, j);
    }
    return t;
}

Field2D crop(const Field2D& f, int i0, int j0, const GridSpec& g) {
    if (i0 < 0 || j0 < 0 || i0 + g.nx() > f.grid.nx() || j0 + g.ny() > f.grid.ny()) {
        throw GeometryError("crop window leaves the source grid");
    }
    Field2D out(g);
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) {
            out.at(i, j) = f.at(i0 + i, j0 + j);
        }
    }
    return out;
}

void impose_trace(Field2D& f, const BoundaryTrace& t) {
    if (!(t.layout == TraceLayout::of(f.grid)) || t.values.size() != t.layout.size()) {
        throw DimensionError("trace layout does not match the field grid");
    }
    if (!corners_consistent(t)) {
        throw GeometryError("trace has inconsistent corner copies");
    }
    for (std::size_t k = 0; k < t.size(); ++k) {
        const auto [i, j] = t.layout.node_of(k);
        f.at(i, j) = t.values[k];
    }
}

double norm(const Field2D& f, NormKind kind) {
    const GridSpec& g = f.grid;
    if (kind == NormKind::Linf) {
        double m = 0.0;
        for (double v : f.values) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }
    const double w = g.dx() * g.dx();
    double s = 0.0;
    for (double v : f.values) {
        s += v * v;
    }
    s *= w;
    if (kind == NormKind::H1) {
        double grad = 0.0;
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i < g.nx(); ++i) {
                const double gx = (f.at(i + 1, j) - f.at(i, j)) / g.dx();
                const double gy = (f.at(i, j + 1) - f.at(i, j)) / g.dx();
                grad += gx * gx + gy * gy;
            }
        }
        s += w * grad;
    }
    return std::sqrt(s);
}

double norm(const BoundaryTrace& t, NormKind kind) {
    if (kind == NormKind::Linf) {
        double m = 0.0;
        for (double v : t.values) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }
    const double dx = t.layout.dx;
    double s = 0.0;
    for (std::size_t k : dedup_positions(t.layout)) {
        s += t.values[k] * t.values[k];
    }
    s *= dx;
    if (kind == NormKind::H1) {
        double grad = 0.0;
        for (Side side : kAllSides) {
            for (double g : d_h(t.side(side), dx)) {
                grad += g * g;
            }
        }
        s += dx * grad;
    }
    return std::sqrt(s);
}

double h_half_norm(std::span<const double> values, std::span<const Point> nodes, double dx) {
    if (values.size() != nodes.size()) {
        throw DimensionError("h_half_norm: values and node positions differ in length");
    }
    if (values.empty()) {
        throw SizeError("h_half_norm: empty trace");
    }
    double l2 = 0.0;
    double diff = 0.0;
    const std::size_t n = values.size();
    for (std::size_t i = 0; i < n; ++i) {
        l2 += values[i] * values[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            const double ddx = nodes[i].x - nodes[j].x;
            const double ddy = nodes[i].y - nodes[j].y;
            const double dist2 = ddx * ddx + ddy * ddy;
            if (dist2 == 0.0) {
                throw GeometryError("h_half_norm: two distinct trace nodes coincide");
            }
            const double dv = values[i] - values[j];
            diff += dv * dv / dist2;
        }
    }
    // The double sum runs over ordered pairs i != j.
    return std::sqrt(dx * l2 + dx * dx * 2.0 * diff);
}

double h_half_norm(const BoundaryTrace& t) {
    const auto keep = dedup_positions(t.layout);
    std::vector<double> v;
    std::vector<Point> x;
    v.reserve(keep.size());
    x.reserve(keep.size());
    for (std::size_t k : keep) {
        const auto [i, j] = t.layout.node_of(k);
        v.push_back(t.values[k]);
        x.push_back({i * t.layout.dx, j * t.layout.dx});
    }
    return h_half_norm(v, x, t.layout.dx);
}

std::vector<double> d_h(std::span<const double> segment, double h) {
    if (segment.size() < 2) {
        throw SizeError("d_h needs a segment of at least two values");
    }
    std::vector<double> out(segment.size() - 1);
    for (std::size_t i = 0; i + 1 < segment.size(); ++i) {
        out[i] = (segment[i + 1] - segment[i]) / h;
    }
    return out;
}

} // namespace rosch
