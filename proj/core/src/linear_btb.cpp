#include "rosch/linear_btb.hpp"

#include <algorithm>
#include <thread>

#include <Eigen/SVD>

#include "rosch/errors.hpp"

namespace rosch {

LinearBtB q_linear_matrix(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m, int threads) {
    const GridSpec& g = decomp.patch_grid(m);
    const ProblemSpec lin = problem.linearized();
    const LinearSolver solver(g, lin.medium());
    const TraceLayout layout = TraceLayout::of(g);
    const auto d = static_cast<Eigen::Index>(layout.size());
    const auto p = static_cast<Eigen::Index>(decomp.output_size(m));

    std::vector<std::size_t> partner(layout.size(), layout.size());
    for (const auto& [a, b] : corner_pairs(layout)) {
        partner[a] = b;
        partner[b] = a;
    }

    LinearBtB out;
    out.patch = m;
    out.Q.resize(p, d);
    auto work = [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index j = begin; j < end; ++j) {
            const auto k = static_cast<std::size_t>(j);
            BoundaryTrace e(layout);
            e.values[k] = 1.0;
            double share = 1.0;
            if (partner[k] < layout.size()) {
                e.values[partner[k]] = 1.0;
                share = 0.5;
            }
            const std::vector<double> col = q_exact(solver, decomp, m, e);
            out.Q.col(j) = share * Eigen::Map<const Eigen::VectorXd>(col.data(), p);
        }
    };
    const int n = std::clamp<int>(threads, 1, static_cast<int>(d));
    if (n == 1) {
        work(0, d);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) {
            pool.emplace_back(work, d * t / n, d * (t + 1) / n);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    return out;
}

TruncatedSvd svd_truncate(const Eigen::MatrixXd& Q, double delta1) {
    if (!(delta1 > 0.0)) {
        throw DomainError("truncation tolerance must be positive");
    }
    if (Q.size() == 0) {
        throw DimensionError("cannot decompose an empty matrix");
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Q, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    if (!(s(0) > 0.0)) {
        throw NumericalError("matrix is zero; truncated rank would be 0");
    }
    Eigen::Index r = 0;
    while (r < s.size() && s(r) / s(0) > delta1) {
        ++r;
    }
    TruncatedSvd out;
    out.U = svd.matrixU().leftCols(r);
    out.V = svd.matrixV().leftCols(r);
    out.S = s.head(r);
    out.spectrum = s;
    return out;
}

std::vector<double> svd_spectrum(const Eigen::MatrixXd& Q) {
    if (Q.size() == 0) {
        throw DimensionError("cannot decompose an empty matrix");
    }
    const Eigen::VectorXd s = Eigen::BDCSVD<Eigen::MatrixXd>(Q).singularValues();
    if (!(s(0) > 0.0)) {
        throw NumericalError("matrix is zero");
    }
    std::vector<double> out(static_cast<std::size_t>(s.size()));
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        out[static_cast<std::size_t>(k)] = s(k) / s(0);
    }
    return out;
}

std::vector<double> svd_spectrum(const ProblemSpec& problem, const Decomposition& decomp, PatchIndex m) {
    return svd_spectrum(q_linear_matrix(problem, decomp, m).Q);
}

} // namespace rosch
