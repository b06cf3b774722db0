#include "rosch/schwarz.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <thread>

#include "rosch/errors.hpp"

namespace rosch {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    const auto t = static_cast<std::size_t>(std::clamp<int>(threads, 1, static_cast<int>(std::max<std::size_t>(n, 1))));
    if (t == 1) {
        for (std::size_t k = 0; k < n; ++k) {
            f(k);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t);
    for (std::size_t w = 0; w < t; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t k = w; k < n; k += t) {
                    f(k);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

std::size_t side_of_corner(const TraceLayout& l, std::size_t pos, Side& side) {
    for (Side s : kAllSides) {
        const std::size_t off = l.side_offset(s);
        if (pos >= off && pos < off + static_cast<std::size_t>(l.side_nodes(s))) {
            side = s;
            return pos - off;
        }
    }
    return 0;
}

} // namespace

std::string to_string(SchwarzMode mode) {
    switch (mode) {
    case SchwarzMode::Classical: return "classical";
    case SchwarzMode::Surrogate: return "surrogate";
    case SchwarzMode::Oracle: return "oracle";
    case SchwarzMode::Linear: return "linear";
    }
    return "unknown";
}

SchwarzMode schwarz_mode_from_string(const std::string& name) {
    for (SchwarzMode m : {SchwarzMode::Classical, SchwarzMode::Surrogate, SchwarzMode::Oracle, SchwarzMode::Linear}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw ConfigError("unknown Schwarz mode '" + name + "'");
}

void SchwarzConfig::validate() const {
    if (!(delta0 > 0.0)) {
        throw ConfigError("delta0 must be positive");
    }
    if (max_iter < 1) {
        throw ConfigError("max_iter must be at least 1");
    }
}

PatchSurrogate surrogate_from_net(TwoLayerNet net) {
    net.validate();
    PatchSurrogate s;
    s.input_dim = static_cast<std::size_t>(net.input_dim());
    s.output_dim = static_cast<std::size_t>(net.output_dim());
    s.apply = [n = std::move(net)](const BoundaryTrace& phi) { return forward(n, phi); };
    return s;
}

PatchSurrogate surrogate_from_matrix(Eigen::MatrixXd Q) {
    PatchSurrogate s;
    s.input_dim = static_cast<std::size_t>(Q.cols());
    s.output_dim = static_cast<std::size_t>(Q.rows());
    s.apply = [q = std::move(Q)](const BoundaryTrace& phi) {
        if (static_cast<Eigen::Index>(phi.size()) != q.cols()) {
            throw DimensionError("trace length does not match the operator");
        }
        const Eigen::VectorXd y = q * Eigen::Map<const Eigen::VectorXd>(phi.values.data(), q.cols());
        return std::vector<double>(y.data(), y.data() + y.size());
    };
    return s;
}

SurrogateSet oracle_surrogates(const ProblemSpec& problem, const Decomposition& decomp, const SolveOptions& opts) {
    SurrogateSet out;
    for (PatchIndex m : decomp.interior()) {
        std::shared_ptr<const LocalSolver> solver = make_local_solver(problem, decomp.patch_grid(m), opts);
        PatchSurrogate s;
        s.input_dim = decomp.patch_grid(m).trace_length();
        s.output_dim = decomp.output_size(m);
        s.apply = [solver, &decomp, m](const BoundaryTrace& phi) { return q_exact(*solver, decomp, m, phi); };
        out.emplace(m, std::move(s));
    }
    return out;
}

BoundaryTrace update_bc(const Decomposition& decomp, PatchIndex m, const std::vector<std::vector<double>>& segments,
                        const Field2D& physical) {
    const GridSpec& g = decomp.patch_grid(m);
    const TraceLayout layout = TraceLayout::of(g);
    const auto [i0, j0] = decomp.offset(m);
    const auto neighbors = decomp.neighbors(m);
    if (segments.size() != neighbors.size()) {
        throw DimensionError("expected " + std::to_string(neighbors.size()) + " neighbor segments, got " +
                             std::to_string(segments.size()));
    }
    BoundaryTrace t(layout);
    std::array<bool, 4> physical_side{};
    for (Side s : kAllSides) {
        auto dst = t.side(s);
        if (decomp.on_physical_boundary(m, s)) {
            physical_side[static_cast<std::size_t>(s)] = true;
            for (std::size_t k = 0; k < dst.size(); ++k) {
                const auto [i, j] = layout.node_of(layout.side_offset(s) + k);
                dst[k] = physical.at(i0 + i, j0 + j);
            }
            continue;
        }
        if (!decomp.has_neighbor(m, s)) {
            throw CoverageError("side " + std::to_string(static_cast<int>(s)) + " of patch (" +
                                std::to_string(m.m1) + "," + std::to_string(m.m2) +
                                ") is neither physical nor shared with a neighbor");
        }
        const PatchIndex l = decomp.neighbor(m, s);
        const auto k = static_cast<std::size_t>(std::find(neighbors.begin(), neighbors.end(), l) - neighbors.begin());
        const auto& seg = segments[k];
        if (seg.size() != dst.size()) {
            throw DimensionError("segment from neighbor has length " + std::to_string(seg.size()) + ", side has " +
                                 std::to_string(dst.size()));
        }
        std::copy(seg.begin(), seg.end(), dst.begin());
    }
    for (const auto& [a, b] : corner_pairs(layout)) {
        Side sa{};
        Side sb{};
        side_of_corner(layout, a, sa);
        side_of_corner(layout, b, sb);
        double v = 0.0;
        if (physical_side[static_cast<std::size_t>(sa)] || physical_side[static_cast<std::size_t>(sb)]) {
            const auto [i, j] = layout.node_of(a);
            v = physical.at(i0 + i, j0 + j);
        } else {
            v = 0.5 * (t.values[a] + t.values[b]);
        }
        t.values[a] = v;
        t.values[b] = v;
    }
    return t;
}

BoundaryTrace initial_trace(const Decomposition& decomp, PatchIndex m, const Field2D& physical) {
    const BoundaryTrace outer = extract_trace(physical);
    const auto keep = dedup_positions(outer.layout);
    double mean = 0.0;
    for (std::size_t k : keep) {
        mean += outer.values[k];
    }
    mean /= static_cast<double>(keep.size());

    std::vector<std::vector<double>> segments;
    for (PatchIndex l : decomp.neighbors(m)) {
        const GridSpec& g = decomp.patch_grid(m);
        const Side s = (l.m1 < m.m1) ? Side::West : (l.m1 > m.m1) ? Side::East : (l.m2 < m.m2) ? Side::South : Side::North;
        segments.emplace_back(static_cast<std::size_t>(TraceLayout::of(g).side_nodes(s)), mean);
    }
    return update_bc(decomp, m, segments, physical);
}

namespace {

struct Workspace {
    std::vector<std::unique_ptr<LocalSolver>> solvers;
    std::vector<const PatchSurrogate*> maps;
};

SchwarzResult iterate(const ProblemSpec& problem, const Decomposition& decomp, const SurrogateSet* surrogates,
                      const BoundaryCondition& bc, const SchwarzConfig& config, const SolveOptions& opts,
                      SchwarzMode mode) {
    config.validate();
    const auto t_start = Clock::now();
    const std::size_t P = decomp.size();
    const Field2D physical = physical_boundary(decomp.global(), bc);

    Workspace ws;
    ws.solvers.resize(P);
    ws.maps.assign(P, nullptr);
    for (std::size_t k = 0; k < P; ++k) {
        const PatchIndex m = decomp.index(k);
        ws.solvers[k] = make_local_solver(problem, decomp.patch_grid(m), opts);
        if (surrogates != nullptr) {
            const auto it = surrogates->find(m);
            if (it != surrogates->end()) {
                if (!decomp.is_interior(m)) {
                    throw ConfigError("surrogates are only used on interior patches");
                }
                if (it->second.input_dim != decomp.patch_grid(m).trace_length() ||
                    it->second.output_dim != decomp.output_size(m)) {
                    throw ConfigError("surrogate for patch (" + std::to_string(m.m1) + "," + std::to_string(m.m2) +
                                      ") has dimensions " + std::to_string(it->second.input_dim) + "->" +
                                      std::to_string(it->second.output_dim) + ", patch needs " +
                                      std::to_string(decomp.patch_grid(m).trace_length()) + "->" +
                                      std::to_string(decomp.output_size(m)));
                }
                ws.maps[k] = &it->second;
            }
        }
    }

    SchwarzResult result;
    result.mode = mode;
    result.traces.reserve(P);
    for (std::size_t k = 0; k < P; ++k) {
        result.traces.push_back(initial_trace(decomp, decomp.index(k), physical));
    }

    std::vector<std::vector<double>> outputs(P);
    std::vector<double> solve_time(P);
    std::vector<double> map_time(P);
    bool converged = false;
    while (result.iterations < config.max_iter) {
        parallel_for(P, config.threads, [&](std::size_t k) {
            const PatchIndex m = decomp.index(k);
            const auto t0 = Clock::now();
            if (ws.maps[k] != nullptr) {
                outputs[k] = ws.maps[k]->apply(result.traces[k]);
                map_time[k] = seconds_since(t0);
                solve_time[k] = 0.0;
            } else {
                outputs[k] = restrict_all(decomp, m, ws.solvers[k]->solve(result.traces[k]).field);
                solve_time[k] = seconds_since(t0);
                map_time[k] = 0.0;
            }
        });
        const auto t_book = Clock::now();
        for (std::size_t k = 0; k < P; ++k) {
            result.timing.local_solve += solve_time[k];
            result.timing.surrogate += map_time[k];
            if (decomp.is_interior(decomp.index(k))) {
                result.timing.interior_update += solve_time[k] + map_time[k];
            }
        }

        std::vector<BoundaryTrace> next(P);
        for (std::size_t k = 0; k < P; ++k) {
            const PatchIndex m = decomp.index(k);
            std::vector<std::vector<double>> segments;
            for (PatchIndex l : decomp.neighbors(m)) {
                const std::size_t kl = decomp.id(l);
                for (const SegmentInfo& s : decomp.output_layout(l)) {
                    if (s.neighbor == m) {
                        const auto begin = outputs[kl].begin() + static_cast<std::ptrdiff_t>(s.offset);
                        segments.emplace_back(begin, begin + static_cast<std::ptrdiff_t>(s.length));
                    }
                }
            }
            next[k] = update_bc(decomp, m, segments, physical);
        }
        double res = 0.0;
        for (std::size_t k = 0; k < P; ++k) {
            BoundaryTrace diff = next[k];
            for (std::size_t i = 0; i < diff.size(); ++i) {
                diff.values[i] -= result.traces[k].values[i];
            }
            res += norm(diff, NormKind::L2);
        }
        result.traces = std::move(next);
        result.residual_history.push_back(res);
        ++result.iterations;
        result.timing.bookkeeping += seconds_since(t_book);
        if (!std::isfinite(res)) {
            throw NonConvergenceError("Schwarz residual became non-finite", result.residual_history);
        }
        if (res < config.delta0) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw NonConvergenceError("Schwarz iteration did not reach delta0 = " + std::to_string(config.delta0) +
                                      " in " + std::to_string(config.max_iter) + " iterations",
                                  result.residual_history);
    }

    const auto t_asm = Clock::now();
    result.local_fields.resize(P);
    parallel_for(P, config.threads,
                 [&](std::size_t k) { result.local_fields[k] = ws.solvers[k]->solve(result.traces[k]).field; });
    result.global = assemble_global(decomp, PartitionOfUnity::build(decomp), result.local_fields);
    result.timing.assembly = seconds_since(t_asm);
    result.timing.total = seconds_since(t_start);
    return result;
}

} // namespace

SchwarzResult run_classical(const ProblemSpec& problem, const Decomposition& decomp, const BoundaryCondition& bc,
                            const SchwarzConfig& config, const SolveOptions& opts) {
    return iterate(problem, decomp, nullptr, bc, config, opts, SchwarzMode::Classical);
}

SchwarzResult run_nn(const ProblemSpec& problem, const Decomposition& decomp, const SurrogateSet& surrogates,
                     const BoundaryCondition& bc, const SchwarzConfig& config, const SolveOptions& opts,
                     SchwarzMode mode) {
    for (PatchIndex m : decomp.interior()) {
        if (surrogates.find(m) == surrogates.end()) {
            throw ConfigError("no surrogate for interior patch (" + std::to_string(m.m1) + "," +
                              std::to_string(m.m2) + ")");
        }
    }
    return iterate(problem, decomp, &surrogates, bc, config, opts, mode);
}

Field2D monodomain_solve(const ProblemSpec& problem, const GridSpec& global, const BoundaryCondition& bc,
                         const SolveOptions& opts) {
    const Field2D physical = physical_boundary(global, bc);
    return make_local_solver(problem, global, opts)->solve(extract_trace(physical)).field;
}

RelativeErrors compute_errors(const Field2D& u, const Field2D& reference) {
    if (!(u.grid == reference.grid)) {
        throw DimensionError("fields live on different grids");
    }
    Field2D diff = u;
    for (std::size_t k = 0; k < diff.values.size(); ++k) {
        diff.values[k] -= reference.values[k];
    }
    auto rel = [&](NormKind kind) {
        const double r = norm(reference, kind);
        if (r == 0.0) {
            throw DomainError("reference field has zero norm");
        }
        return norm(diff, kind) / r;
    };
    return {rel(NormKind::L2), rel(NormKind::H1), rel(NormKind::Linf)};
}

} // namespace rosch
