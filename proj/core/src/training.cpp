#include "rosch/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rosch/errors.hpp"

namespace rosch {

NetGradient NetGradient::zeros_like(const TwoLayerNet& net) {
    return {Eigen::MatrixXd::Zero(net.W1.rows(), net.W1.cols()), Eigen::VectorXd::Zero(net.b1.size()),
            Eigen::MatrixXd::Zero(net.W2.rows(), net.W2.cols()), Eigen::VectorXd::Zero(net.b2.size())};
}

std::vector<std::size_t> output_segments(const Decomposition& decomp, PatchIndex m) {
    std::vector<std::size_t> out;
    for (const auto& s : decomp.output_layout(m)) {
        out.push_back(s.length);
    }
    return out;
}

namespace {

std::vector<std::size_t> resolve_segments(const LossSpec& spec, Eigen::Index p) {
    if (spec.segments.empty()) {
        return {static_cast<std::size_t>(p)};
    }
    if (std::accumulate(spec.segments.begin(), spec.segments.end(), std::size_t{0}) != static_cast<std::size_t>(p)) {
        throw DimensionError("loss segments do not cover the output");
    }
    return spec.segments;
}

} // namespace

double loss(const TwoLayerNet& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
            const Eigen::Ref<const Eigen::MatrixXd>& targets, const LossSpec& spec, NetGradient* grad) {
    const Eigen::Index B = inputs.cols();
    if (B == 0) {
        throw DomainError("loss of an empty batch");
    }
    if (inputs.rows() != net.W1.cols() || targets.rows() != net.W2.rows() || targets.cols() != B) {
        throw DimensionError("batch shapes do not match the network");
    }
    const auto segments = resolve_segments(spec, targets.rows());
    const double dx = spec.dx;

    Eigen::MatrixXd x = inputs;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(B);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(B);
    if (net.normalize) {
        for (Eigen::Index k = 0; k < B; ++k) {
            const NormStats s = norm_stats(inputs.col(k), net.dx, net.eps1);
            mean(k) = s.mean;
            scale(k) = s.scale;
            x.col(k) = (inputs.col(k).array() - s.mean) / s.scale;
        }
    }
    Eigen::MatrixXd z = net.W1 * x;
    z.colwise() += net.b1;
    const Eigen::MatrixXd a = z.cwiseMax(0.0);
    Eigen::MatrixXd y = net.W2 * a;
    y.colwise() += net.b2;
    Eigen::MatrixXd r(y.rows(), B);
    for (Eigen::Index k = 0; k < B; ++k) {
        r.col(k) = (scale(k) * y.col(k).array() + mean(k)).matrix() - targets.col(k);
    }

    double total = dx * r.squaredNorm();
    Eigen::MatrixXd dr = 2.0 * dx * r;
    std::size_t off = 0;
    for (std::size_t len : segments) {
        const auto o = static_cast<Eigen::Index>(off);
        const auto n = static_cast<Eigen::Index>(len);
        if (n >= 2 && spec.mu != 0.0) {
            const Eigen::MatrixXd diff = (r.middleRows(o + 1, n - 1) - r.middleRows(o, n - 1)) / dx;
            total += spec.mu * dx * diff.squaredNorm();
            // D_h^T (2 mu dx diff); the 1/dx of D_h^T cancels the dx weight.
            const Eigen::MatrixXd w = 2.0 * spec.mu * diff;
            dr.middleRows(o + 1, n - 1) += w;
            dr.middleRows(o, n - 1) -= w;
        }
        off += len;
    }
    const double value = total / static_cast<double>(B);
    if (grad == nullptr) {
        return value;
    }
    Eigen::MatrixXd gy = dr / static_cast<double>(B);
    if (net.normalize) {
        gy = gy * scale.asDiagonal();
    }
    grad->W2 = gy * a.transpose();
    grad->b2 = gy.rowwise().sum();
    Eigen::MatrixXd gz = net.W2.transpose() * gy;
    gz = (z.array() > 0.0).select(gz, 0.0);
    grad->W1 = gz * x.transpose();
    grad->b1 = gz.rowwise().sum();
    return value;
}

void adam_update(Eigen::Ref<Eigen::ArrayXd> theta, Eigen::Ref<Eigen::ArrayXd> m, Eigen::Ref<Eigen::ArrayXd> v,
                 const Eigen::Ref<const Eigen::ArrayXd>& g, int t, double lr, const AdamParams& params) {
    if (t < 1) {
        throw DomainError("Adam step counter starts at 1");
    }
    m = params.beta1 * m + (1.0 - params.beta1) * g;
    v = params.beta2 * v + (1.0 - params.beta2) * g.square();
    const double c1 = 1.0 - std::pow(params.beta1, t);
    const double c2 = 1.0 - std::pow(params.beta2, t);
    theta -= lr * (m / c1) / ((v / c2).sqrt() + params.eps);
}

AdamState AdamState::for_net(const TwoLayerNet& net) {
    return {NetGradient::zeros_like(net), NetGradient::zeros_like(net), 0};
}

namespace {

template <class T>
Eigen::Map<Eigen::ArrayXd> flat(T& a) {
    return {a.data(), a.size()};
}

template <class T>
Eigen::Map<const Eigen::ArrayXd> flat_c(const T& a) {
    return {a.data(), a.size()};
}

} // namespace

void adam_step(TwoLayerNet& net, AdamState& state, const NetGradient& grad, double lr, const AdamParams& params) {
    ++state.t;
    adam_update(flat(net.W1), flat(state.m.W1), flat(state.v.W1), flat_c(grad.W1), state.t, lr, params);
    adam_update(flat(net.b1), flat(state.m.b1), flat(state.v.b1), flat_c(grad.b1), state.t, lr, params);
    adam_update(flat(net.W2), flat(state.m.W2), flat(state.v.W2), flat_c(grad.W2), state.t, lr, params);
    adam_update(flat(net.b2), flat(state.m.b2), flat(state.v.b2), flat_c(grad.b2), state.t, lr, params);
}

void TrainConfig::validate() const {
    if (epochs < 0) {
        throw DomainError("epochs must be nonnegative");
    }
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) {
        throw DomainError("batch fraction must lie in (0, 1]");
    }
    if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0 && adam.beta2 > 0.0 && adam.beta2 < 1.0)) {
        throw DomainError("Adam betas must lie in (0, 1)");
    }
    if (!(lr > 0.0) || !(decay_rate > 0.0) || decay_every < 1 || eval_every < 1 || mu < 0.0) {
        throw DomainError("invalid learning-rate schedule or loss weight");
    }
}

double learning_rate(const TrainConfig& config, int epoch) {
    return config.lr * std::pow(config.decay_rate, std::max(epoch - 1, 0) / config.decay_every);
}

TrainResult train(TwoLayerNet net, const TrainingSet& train_set, const TrainingSet& test_set, const LossSpec& spec,
                  const TrainConfig& config) {
    config.validate();
    net.validate();
    const int n = train_set.size();
    if (n == 0) {
        throw DomainError("training set is empty");
    }
    const bool has_test = test_set.size() > 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto test_loss = [&] { return has_test ? loss(net, test_set.inputs, test_set.outputs, spec) : nan; };

    TrainResult result;
    result.curve.push_back({0, loss(net, train_set.inputs, train_set.outputs, spec), test_loss(), config.lr});

    const int bs = std::max(1, static_cast<int>(std::lround(config.batch_fraction * n)));
    std::mt19937_64 rng(config.seed);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    AdamState state = AdamState::for_net(net);
    NetGradient grad = NetGradient::zeros_like(net);
    Eigen::MatrixXd xb;
    Eigen::MatrixXd yb;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double lr = learning_rate(config, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        for (int start = 0; start < n; start += bs) {
            const int len = std::min(bs, n - start);
            const std::vector<int> idx(order.begin() + start, order.begin() + start + len);
            xb = train_set.inputs(Eigen::all, idx);
            yb = train_set.outputs(Eigen::all, idx);
            const double l = loss(net, xb, yb, spec, &grad);
            if (!std::isfinite(l)) {
                throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch), epoch);
            }
            sum += l * len;
            adam_step(net, state, grad, lr, config.adam);
        }
        const bool eval = epoch % config.eval_every == 0 || epoch == config.epochs;
        const double tl = eval ? test_loss() : nan;
        if (eval && has_test && !std::isfinite(tl)) {
            throw DivergenceError("test loss became non-finite at epoch " + std::to_string(epoch), epoch);
        }
        result.curve.push_back({epoch, sum / n, tl, lr});
    }
    result.net = std::move(net);
    return result;
}

} // namespace rosch
