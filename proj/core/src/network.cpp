#include "rosch/network.hpp"

#include <cmath>
#include <random>

#include "rosch/errors.hpp"

namespace rosch {

void TwoLayerNet::validate() const {
    if (b1.size() != W1.rows() || W2.cols() != W1.rows() || b2.size() != W2.rows()) {
        throw DimensionError("network shapes are inconsistent: W1 " + std::to_string(W1.rows()) + "x" +
                             std::to_string(W1.cols()) + ", b1 " + std::to_string(b1.size()) + ", W2 " +
                             std::to_string(W2.rows()) + "x" + std::to_string(W2.cols()) + ", b2 " +
                             std::to_string(b2.size()));
    }
    if (!W1.allFinite() || !b1.allFinite() || !W2.allFinite() || !b2.allFinite()) {
        throw DomainError("network has non-finite parameters");
    }
    if (normalize && !(eps1 > 0.0 && dx > 0.0)) {
        throw DomainError("normalization needs positive eps1 and dx");
    }
}

NormStats norm_stats(const Eigen::Ref<const Eigen::VectorXd>& phi, double dx, double eps1) {
    NormStats s;
    s.mean = phi.mean();
    s.scale = std::max(std::sqrt(dx * phi.squaredNorm()), eps1);
    return s;
}

Eigen::VectorXd forward(const TwoLayerNet& net, const Eigen::Ref<const Eigen::VectorXd>& phi) {
    if (phi.size() != net.W1.cols()) {
        throw DimensionError("input has length " + std::to_string(phi.size()) + ", net expects " +
                             std::to_string(net.W1.cols()));
    }
    if (!net.normalize) {
        return net.W2 * (net.W1 * phi + net.b1).cwiseMax(0.0) + net.b2;
    }
    const NormStats s = norm_stats(phi, net.dx, net.eps1);
    const Eigen::VectorXd x = (phi.array() - s.mean) / s.scale;
    const Eigen::VectorXd y = net.W2 * (net.W1 * x + net.b1).cwiseMax(0.0) + net.b2;
    return (s.scale * y.array() + s.mean).matrix();
}

std::vector<double> forward(const TwoLayerNet& net, const BoundaryTrace& phi) {
    const Eigen::VectorXd y = forward(net, Eigen::Map<const Eigen::VectorXd>(phi.values.data(),
                                                                             static_cast<Eigen::Index>(phi.size())));
    return {y.data(), y.data() + y.size()};
}

Eigen::MatrixXd forward_batch(const TwoLayerNet& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
    if (inputs.rows() != net.W1.cols()) {
        throw DimensionError("batch rows do not match the network input dimension");
    }
    if (!net.normalize) {
        Eigen::MatrixXd z = net.W1 * inputs;
        z.colwise() += net.b1;
        Eigen::MatrixXd y = net.W2 * z.cwiseMax(0.0);
        y.colwise() += net.b2;
        return y;
    }
    Eigen::MatrixXd y(net.W2.rows(), inputs.cols());
    for (Eigen::Index k = 0; k < inputs.cols(); ++k) {
        y.col(k) = forward(net, inputs.col(k));
    }
    return y;
}

TwoLayerNet init_random(int d, int h, int p, std::uint64_t seed) {
    if (d < 1 || h < 1 || p < 1) {
        throw DimensionError("network dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    auto fill = [&](auto& a, int fan_in) {
        std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            a.data()[k] = dist(rng);
        }
    };
    TwoLayerNet net;
    net.W1.resize(h, d);
    net.b1.resize(h);
    net.W2.resize(p, h);
    net.b2.resize(p);
    fill(net.W1, d);
    fill(net.b1, d);
    fill(net.W2, h);
    fill(net.b2, h);
    net.init = "random";
    return net;
}

TwoLayerNet init_from_svd(const Eigen::MatrixXd& U, const Eigen::VectorXd& S, const Eigen::MatrixXd& V) {
    const Eigen::Index r = S.size();
    if (U.cols() != r || V.cols() != r) {
        throw DimensionError("singular triplets have inconsistent rank");
    }
    if ((S.array() < 0.0).any()) {
        throw DomainError("singular values must be nonnegative");
    }
    const Eigen::VectorXd root = S.cwiseSqrt();
    const Eigen::MatrixXd vs = V * root.asDiagonal();
    const Eigen::MatrixXd us = U * root.asDiagonal();

    TwoLayerNet net;
    net.W1.resize(2 * r, V.rows());
    net.W1.topRows(r) = vs.transpose();
    net.W1.bottomRows(r) = -vs.transpose();
    net.W2.resize(U.rows(), 2 * r);
    net.W2.leftCols(r) = us;
    net.W2.rightCols(r) = -us;
    net.b1 = Eigen::VectorXd::Zero(2 * r);
    net.b2 = Eigen::VectorXd::Zero(U.rows());
    net.init = "svd";
    return net;
}

} // namespace rosch
