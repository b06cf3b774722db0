#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace rosch {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Uniform grid on an axis-aligned rectangle. Nodes are (i, j) with
/// 0 <= i <= nx, 0 <= j <= ny at origin + (i, j) * dx.
class GridSpec {
public:
    GridSpec() = default;

    /// Throws AlignmentError unless both extents are integer multiples of dx
    /// (to 1e-12 relative).
    static GridSpec build(Point origin, Point extent, double dx);

    Point origin() const noexcept { return origin_; }
    double width() const noexcept { return nx_ * dx_; }
    double height() const noexcept { return ny_ * dx_; }
    double dx() const noexcept { return dx_; }
    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }

    std::size_t num_nodes() const noexcept {
        return static_cast<std::size_t>(nx_ + 1) * static_cast<std::size_t>(ny_ + 1);
    }
    std::size_t index(int i, int j) const noexcept {
        return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_ + 1) + static_cast<std::size_t>(i);
    }
    double x(int i) const noexcept { return origin_.x + i * dx_; }
    double y(int j) const noexcept { return origin_.y + j * dx_; }
    Point node(int i, int j) const noexcept { return {x(i), y(j)}; }

    bool is_boundary(int i, int j) const noexcept {
        return i == 0 || j == 0 || i == nx_ || j == ny_;
    }

    /// Length of the side-concatenated boundary trace, 2(nx+1) + 2(ny+1).
    std::size_t trace_length() const noexcept {
        return 2 * static_cast<std::size_t>(nx_ + 1) + 2 * static_cast<std::size_t>(ny_ + 1);
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;

private:
    Point origin_{};
    double dx_ = 1.0;
    int nx_ = 0;
    int ny_ = 0;
};

/// Nodal scalar field, row-major by (j, i).
struct Field2D {
    GridSpec grid;
    std::vector<double> values;

    Field2D() = default;
    explicit Field2D(const GridSpec& g, double fill = 0.0) : grid(g), values(g.num_nodes(), fill) {}

    double& at(int i, int j) { return values[grid.index(i, j)]; }
    double at(int i, int j) const { return values[grid.index(i, j)]; }
};

enum class Side { South = 0, East = 1, North = 2, West = 3 };

inline constexpr std::array<Side, 4> kAllSides{Side::South, Side::East, Side::North, Side::West};

/// Shape of a side-concatenated trace: sides in the order south, east,
/// north, west; every side lists both endpoints (corners appear twice) and
/// runs in increasing coordinate.
struct TraceLayout {
    int nx = 0;
    int ny = 0;
    double dx = 1.0;

    static TraceLayout of(const GridSpec& g) { return {g.nx(), g.ny(), g.dx()}; }

    std::size_t size() const noexcept {
        return 2 * static_cast<std::size_t>(nx + 1) + 2 * static_cast<std::size_t>(ny + 1);
    }
    int side_nodes(Side s) const noexcept {
        return (s == Side::South || s == Side::North) ? nx + 1 : ny + 1;
    }
    std::size_t side_offset(Side s) const noexcept;

    /// Grid node (i, j) of trace entry k.
    std::array<int, 2> node_of(std::size_t k) const;

    /// Trace position of the t-th node along side s.
    std::size_t position(Side s, int t) const noexcept { return side_offset(s) + static_cast<std::size_t>(t); }

    friend bool operator==(const TraceLayout&, const TraceLayout&) = default;
};

struct BoundaryTrace {
    TraceLayout layout;
    std::vector<double> values;

    BoundaryTrace() = default;
    explicit BoundaryTrace(const TraceLayout& l, double fill = 0.0) : layout(l), values(l.size(), fill) {}
    BoundaryTrace(const TraceLayout& l, std::vector<double> v);

    std::size_t size() const noexcept { return values.size(); }
    std::span<double> side(Side s);
    std::span<const double> side(Side s) const;
};

/// Pairs of trace positions holding the same corner node.
std::array<std::array<std::size_t, 2>, 4> corner_pairs(const TraceLayout& layout);

bool corners_consistent(const BoundaryTrace& t, double tol = 0.0);

/// Replaces both copies of every corner by their average.
void average_corners(BoundaryTrace& t);

/// Indices of the trace with the second copy of every corner removed.
std::vector<std::size_t> dedup_positions(const TraceLayout& layout);

BoundaryTrace extract_trace(const Field2D& f);

/// Sub-field on grid g whose (0, 0) node is node (i0, j0) of f.
Field2D crop(const Field2D& f, int i0, int j0, const GridSpec& g);

/// Writes the trace onto the boundary nodes of f. Throws DimensionError on a
/// layout mismatch and GeometryError when corner copies disagree.
void impose_trace(Field2D& f, const BoundaryTrace& t);

enum class NormKind { L2, H1, Linf };

/// Discrete norms. Fields: L2 = sqrt(dx^2 sum v^2); the H1 seminorm uses
/// forward differences at nodes with i < nx and j < ny. Traces: dx-weighted
/// over deduplicated nodes, H1 from per-side forward differences.
double norm(const Field2D& f, NormKind kind);
double norm(const BoundaryTrace& t, NormKind kind);

/// Discrete H^{1/2} norm over an explicit node set.
double h_half_norm(std::span<const double> values, std::span<const Point> nodes, double dx);

/// Discrete H^{1/2} norm of a trace; duplicated corners count once.
double h_half_norm(const BoundaryTrace& t);

/// Forward differences (v[i+1] - v[i]) / h. Throws SizeError below 2 entries.
std::vector<double> d_h(std::span<const double> segment, double h);

} // namespace rosch
