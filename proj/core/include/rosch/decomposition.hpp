#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "rosch/grid.hpp"
#include "rosch/local_solver.hpp"
#include "rosch/problems.hpp"

namespace rosch {

/// 1-based patch coordinates (m1 along x, m2 along y).
struct PatchIndex {
    int m1 = 1;
    int m2 = 1;

    friend bool operator==(const PatchIndex&, const PatchIndex&) = default;
    friend auto operator<=>(const PatchIndex&, const PatchIndex&) = default;
};

/// Direction from a patch to its neighbor; also names the side of the patch
/// that faces that neighbor.
Side opposite(Side s) noexcept;

/// One neighbor segment inside a patch's boundary-to-boundary output.
struct SegmentInfo {
    PatchIndex neighbor;
    Side direction;         // where the neighbor lies
    Side neighbor_side;     // side of the neighbor the segment lives on
    std::size_t offset = 0; // position in the concatenated output
    std::size_t length = 0;
};

/// Overlapping decomposition of the unit square into M1 x M2 patches, each
/// cell of the regular partition enlarged by dx_o on every side not on the
/// physical boundary.
class Decomposition {
public:
    static Decomposition build(int M1, int M2, double dx_o, double dx_b, const GridSpec& global);

    int M1() const noexcept { return M1_; }
    int M2() const noexcept { return M2_; }
    double dx_o() const noexcept { return dx_o_; }
    double dx_b() const noexcept { return dx_b_; }
    const GridSpec& global() const noexcept { return global_; }

    std::size_t size() const noexcept { return patches_.size(); }
    std::size_t id(PatchIndex m) const;
    PatchIndex index(std::size_t id) const { return all_.at(id); }
    bool valid(PatchIndex m) const noexcept { return m.m1 >= 1 && m.m1 <= M1_ && m.m2 >= 1 && m.m2 <= M2_; }

    const std::vector<PatchIndex>& all() const noexcept { return all_; }
    const std::vector<PatchIndex>& interior() const noexcept { return interior_; }
    const std::vector<PatchIndex>& boundary() const noexcept { return boundary_; }
    bool is_interior(PatchIndex m) const;

    const GridSpec& patch_grid(PatchIndex m) const { return patches_.at(id(m)).grid; }
    /// Global node offset of the patch's (0, 0) node.
    std::array<int, 2> offset(PatchIndex m) const { return patches_.at(id(m)).offset; }

    /// Patch enlarged by dx_b on all sides. Throws GeometryError when the
    /// enlargement leaves the unit square.
    GridSpec buffered_grid(PatchIndex m) const;
    GridSpec enlarged_grid(PatchIndex m, double margin) const;

    /// Neighbors in canonical order west, east, south, north (missing ones omitted).
    std::vector<PatchIndex> neighbors(PatchIndex m) const;
    bool has_neighbor(PatchIndex m, Side direction) const;
    PatchIndex neighbor(PatchIndex m, Side direction) const;

    /// Layout of the concatenated restriction output of patch m.
    std::vector<SegmentInfo> output_layout(PatchIndex m) const;
    std::size_t output_size(PatchIndex m) const;

    /// True when side s of patch m lies on the physical boundary.
    bool on_physical_boundary(PatchIndex m, Side s) const;

private:
    struct Patch {
        GridSpec grid;
        std::array<int, 2> offset{};
    };

    int M1_ = 1;
    int M2_ = 1;
    double dx_o_ = 0.0;
    double dx_b_ = 0.0;
    GridSpec global_;
    std::vector<Patch> patches_;
    std::vector<PatchIndex> all_;
    std::vector<PatchIndex> interior_;
    std::vector<PatchIndex> boundary_;
};

/// Per-patch blending weights chi_m stored on the patch grids (chi_m is zero
/// outside its patch).
class PartitionOfUnity {
public:
    static PartitionOfUnity build(const Decomposition& decomp);

    const Field2D& weight(std::size_t patch_id) const { return weights_.at(patch_id); }
    /// chi_m zero-extended to the global grid.
    Field2D global_weight(const Decomposition& decomp, PatchIndex m) const;

private:
    std::vector<Field2D> weights_;
};

/// Values of u_m on the side of patch l facing m (both endpoints included),
/// ordered like l's trace. Throws TopologyError unless l neighbors m.
std::vector<double> restrict_to(const Decomposition& decomp, PatchIndex m, const Field2D& u_m, PatchIndex l);

/// All segments of patch m concatenated in canonical neighbor order.
std::vector<double> restrict_all(const Decomposition& decomp, PatchIndex m, const Field2D& u_m);

/// Exact boundary-to-boundary map: local solve on patch m followed by
/// restrict_all.
std::vector<double> q_exact(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m,
                            const BoundaryTrace& phi, const SolveOptions& opts);

/// Same map with a prebuilt solver for the patch.
std::vector<double> q_exact(const LocalSolver& solver, const Decomposition& decomp, PatchIndex m,
                            const BoundaryTrace& phi);

/// u = sum_m chi_m u_m with every u_m zero-extended.
Field2D assemble_global(const Decomposition& decomp, const PartitionOfUnity& pou,
                        const std::vector<Field2D>& local_fields);

/// Values of a global boundary condition at the nodes of a grid on the unit
/// square's boundary (interior nodes are zero).
Field2D physical_boundary(const GridSpec& global, const BoundaryCondition& bc);

} // namespace rosch
