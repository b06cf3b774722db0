#include "rosch/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "rosch/errors.hpp"

namespace rosch {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

void SampleLaw::validate() const {
    if (!(R > 0.0) || !std::isfinite(R)) {
        throw DomainError("sampling radius cap R must be positive");
    }
    if (!(D >= 0.0)) {
        throw DomainError("sampling exponent D must be nonnegative");
    }
}

Rng sample_stream(std::uint64_t seed, std::uint64_t i) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(i + 0x632be59bd9b4e019ULL)));
}

BoundarySample sample_boundary(const SampleLaw& law, const TraceLayout& layout, Rng& rng) {
    law.validate();
    if (layout.size() < 4) {
        throw SizeError("trace dimension must be at least 4");
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    BoundaryTrace dir(layout);
    double n = 0.0;
    do {
        for (double& v : dir.values) {
            v = gauss(rng);
        }
        average_corners(dir);
        n = h_half_norm(dir);
    } while (!(n > 0.0));
    for (double& v : dir.values) {
        v /= n;
    }
    // Inverse CDF of (D+1) r^D / R^{D+1} on [0, R].
    double u = 0.0;
    do {
        u = uniform(rng);
    } while (u == 0.0);
    const double r = law.R * std::pow(u, 1.0 / (law.D + 1.0));
    for (double& v : dir.values) {
        v *= r;
    }
    return {std::move(dir), r};
}

TrainingSet gen_dataset(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m, int N,
                        const SampleLaw& law, const SolveOptions& opts, const GenOptions& gen) {
    law.validate();
    if (N < 1) {
        throw DomainError("dataset size must be positive");
    }
    if (!decomp.is_interior(m)) {
        throw TopologyError("training data is generated for interior patches only");
    }
    const double margin = gen.buffer < 0.0 ? decomp.dx_b() : gen.buffer;
    const GridSpec big = decomp.enlarged_grid(m, margin);
    const GridSpec& small = decomp.patch_grid(m);
    const int b = (big.nx() - small.nx()) / 2;
    const auto solver = make_local_solver(problem, big, opts);

    const auto d = static_cast<Eigen::Index>(small.trace_length());
    const auto p = static_cast<Eigen::Index>(decomp.output_size(m));
    Eigen::MatrixXd inputs(d, N);
    Eigen::MatrixXd outputs(p, N);
    std::vector<char> ok(static_cast<std::size_t>(N), 0);
    std::mutex log_mutex;

    auto work = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            Rng rng = sample_stream(law.seed, static_cast<std::uint64_t>(i));
            try {
                const BoundarySample s = sample_boundary(law, TraceLayout::of(big), rng);
                const Field2D u_big = solver->solve(s.trace).field;
                const Field2D u = crop(u_big, b, b, small);
                const BoundaryTrace phi = extract_trace(u);
                const std::vector<double> psi = restrict_all(decomp, m, u);
                inputs.col(i) = Eigen::Map<const Eigen::VectorXd>(phi.values.data(), d);
                outputs.col(i) = Eigen::Map<const Eigen::VectorXd>(psi.data(), p);
                ok[static_cast<std::size_t>(i)] = 1;
            } catch (const NumericalError& e) {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::cerr << "gen_dataset: sample " << i << " skipped: " << e.what() << '\n';
            }
        }
    };

    const int threads = std::clamp(gen.threads, 1, N);
    if (threads == 1) {
        work(0, N);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(work, N * t / threads, N * (t + 1) / threads);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    const int good = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
    const int skipped = N - good;
    if (skipped > gen.max_skip_fraction * N) {
        throw DatasetError("dataset generation failed for " + std::to_string(skipped) + " of " + std::to_string(N) +
                           " samples");
    }
    TrainingSet set;
    set.patch = m;
    set.law = law;
    set.problem = problem.kind;
    set.buffer = margin;
    set.skipped = skipped;
    set.inputs.resize(d, good);
    set.outputs.resize(p, good);
    int k = 0;
    for (int i = 0; i < N; ++i) {
        if (ok[static_cast<std::size_t>(i)]) {
            set.inputs.col(k) = inputs.col(i);
            set.outputs.col(k) = outputs.col(i);
            ++k;
        }
    }
    return set;
}

std::pair<TrainingSet, TrainingSet> split_dataset(const TrainingSet& set, double test_fraction, Rng& rng) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
        throw DomainError("test fraction must lie in [0, 1]");
    }
    const int n = set.size();
    const int n_test = static_cast<int>(std::lround(test_fraction * n));
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    auto take = [&](int begin, int end) {
        TrainingSet out = set;
        out.inputs.resize(set.inputs.rows(), end - begin);
        out.outputs.resize(set.outputs.rows(), end - begin);
        for (int k = begin; k < end; ++k) {
            out.inputs.col(k - begin) = set.inputs.col(perm[static_cast<std::size_t>(k)]);
            out.outputs.col(k - begin) = set.outputs.col(perm[static_cast<std::size_t>(k)]);
        }
        return out;
    };
    TrainingSet test = take(0, n_test);
    TrainingSet train = take(n_test, n);
    return {std::move(train), std::move(test)};
}

} // namespace rosch
