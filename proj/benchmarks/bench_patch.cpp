// Per-patch cost of one Schwarz interior update: a nonlinear local solve
// against one surrogate forward pass of matching shape.

#include <benchmark/benchmark.h>

#include "rosch/decomposition.hpp"
#include "rosch/local_solver.hpp"
#include "rosch/network.hpp"
#include "rosch/sampling.hpp"

namespace {

using namespace rosch;

struct PatchCase {
    ProblemSpec problem;
    Decomposition decomp;
    BoundaryTrace trace;
};

PatchCase make_case(bool plaplace) {
    const ProblemSpec problem = plaplace ? ProblemSpec::plaplace(6.0) : ProblemSpec::semilinear(0.125);
    const double dx = 1.0 / 64;
    const Decomposition d = plaplace ? Decomposition::build(4, 4, 1.0 / 32, 3.0 / 32, GridSpec::build({0, 0}, {1, 1}, dx))
                                     : Decomposition::build(4, 4, 1.0 / 16, 1.0 / 16, GridSpec::build({0, 0}, {1, 1}, dx));
    Rng rng = sample_stream(7, 0);
    const SampleLaw law{plaplace ? 10.0 : 1000.0, 3.0, 7};
    BoundaryTrace trace = sample_boundary(law, TraceLayout::of(d.patch_grid({2, 2})), rng).trace;
    return {problem, d, std::move(trace)};
}

void BM_LocalSolve(benchmark::State& state) {
    const PatchCase c = make_case(state.range(0) != 0);
    const auto solver = make_local_solver(c.problem, c.decomp.patch_grid({2, 2}), SolveOptions{});
    for (auto _ : state) {
        benchmark::DoNotOptimize(solver->solve(c.trace));
    }
}

void BM_SurrogateForward(benchmark::State& state) {
    const PatchCase c = make_case(state.range(0) != 0);
    const int d = static_cast<int>(c.trace.size());
    const int p = static_cast<int>(c.decomp.output_size({2, 2}));
    TwoLayerNet net = init_random(d, 36, p, 11);
    net.normalize = state.range(0) != 0;
    net.dx = c.decomp.global().dx();
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(net, c.trace));
    }
}

} // namespace

BENCHMARK(BM_LocalSolve)->Arg(0)->Arg(1)->ArgName("plaplace")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SurrogateForward)->Arg(0)->Arg(1)->ArgName("plaplace")->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
