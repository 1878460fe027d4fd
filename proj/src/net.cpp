#include "podnet/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace podnet {
namespace {

constexpr double kAdamaxEps = 1e-8;
constexpr std::uint64_t kSaltInit = 0x6e65742e696e6974ULL;
constexpr std::uint64_t kSaltTrain = 0x6e65742e74726e00ULL;

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

// Subgradient at 0 is the negative-side slope.
Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> h;  ///< h[0] = input, h[L] = output
    std::vector<Eigen::MatrixXd> z;  ///< z[l] = W h[l-1] + b, l = 1..L
};

// Raw network math on already-standardized inputs.
Eigen::MatrixXd eval_raw(const Network& net, const Eigen::MatrixXd& X, ForwardCache* cache) {
    const int L = net.n_layers();
    Eigen::MatrixXd h = X;
    if (cache) {
        cache->h.assign(1, h);
        cache->z.clear();
    }
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (net.W[static_cast<std::size_t>(l)] * h).colwise() +
                            net.b[static_cast<std::size_t>(l)];
        const bool act = l + 1 < L || net.leaky_output;
        h = act ? activate(z, net.hidden_slope) : z;
        if (cache) {
            cache->z.push_back(std::move(z));
            cache->h.push_back(h);
        }
    }
    return h;
}

// Backpropagates dLoss/dOutputRaw through the raw network.
Gradients backprop_raw(const Network& net, const ForwardCache& cache,
                       const Eigen::MatrixXd& out_grad) {
    const int L = net.n_layers();
    Gradients g;
    g.W.resize(static_cast<std::size_t>(L));
    g.b.resize(static_cast<std::size_t>(L));
    Eigen::MatrixXd delta = out_grad;
    if (net.leaky_output)
        delta = delta.cwiseProduct(
            activate_grad(cache.z[static_cast<std::size_t>(L - 1)], net.hidden_slope));
    for (int l = L - 1; l >= 0; --l) {
        g.W[static_cast<std::size_t>(l)] =
            delta * cache.h[static_cast<std::size_t>(l)].transpose();
        g.b[static_cast<std::size_t>(l)] = delta.rowwise().sum();
        if (l > 0)
            delta = (net.W[static_cast<std::size_t>(l)].transpose() * delta)
                        .cwiseProduct(activate_grad(cache.z[static_cast<std::size_t>(l - 1)],
                                                    net.hidden_slope));
    }
    return g;
}

Eigen::MatrixXd standardize_cols(const Eigen::MatrixXd& X, const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& scale) {
    return ((X.colwise() - mean).array().colwise() / scale.array()).matrix();
}

Eigen::MatrixXd unstandardize_cols(const Eigen::MatrixXd& X, const Eigen::VectorXd& mean,
                                   const Eigen::VectorXd& scale) {
    return ((X.array().colwise() * scale.array()).colwise() + mean.array()).matrix();
}

Eigen::VectorXd per_pair_weights(const Dataset& data, const LossSpec& spec) {
    const int N = data.size();
    Eigen::VectorXd w(N);
    if (!spec.weighted) {
        w.setConstant(1.0 / N);
        return w;
    }
    if (!(spec.w1 > spec.w2 && spec.w2 > 0.0))
        throw Error("weighted loss requires w1 > w2 > 0");
    if (static_cast<int>(data.tags.size()) != N)
        throw Error("weighted loss requires a provenance tag per pair");
    for (int j = 0; j < N; ++j)
        w[j] = data.tags[static_cast<std::size_t>(j)] == Provenance::observation ? spec.w1
                                                                                 : spec.w2;
    return w;
}

// Gradient of sum_j weights_j ||Y_j - inference(X_j)||^2 for pair columns.
// X must be raw (unstandardized); stats on the net are honored.
Gradients weighted_gradient(const Network& net, const Eigen::MatrixXd& X,
                            const Eigen::MatrixXd& Y, const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd Xs =
        net.has_stats() ? standardize_cols(X, net.x_mean, net.x_scale) : X;
    ForwardCache cache;
    Eigen::MatrixXd out = eval_raw(net, Xs, &cache);
    if (net.has_stats()) out = unstandardize_cols(out, net.y_mean, net.y_scale);
    Eigen::MatrixXd seed = out - Y;  // d/d(out) of ||Y - out||^2 is 2(out - Y)
    for (Eigen::Index j = 0; j < seed.cols(); ++j) seed.col(j) *= 2.0 * weights[j];
    if (net.has_stats())
        seed = (seed.array().colwise() * net.y_scale.array()).matrix();
    return backprop_raw(net, cache, seed);
}

}  // namespace

void Dataset::validate() const {
    if (X.cols() != Y.cols()) throw Error("Dataset: input/target pair count mismatch");
    if (!tags.empty() && static_cast<int>(tags.size()) != size())
        throw Error("Dataset: provenance tag count mismatch");
    if (!run_ids.empty() && static_cast<int>(run_ids.size()) != size())
        throw Error("Dataset: run id count mismatch");
    if (!step_ids.empty() && static_cast<int>(step_ids.size()) != size())
        throw Error("Dataset: step id count mismatch");
}

LossSpec LossSpec::make_weighted(double w1, double w2) {
    if (!(w1 > w2 && w2 > 0.0)) throw Error("LossSpec: weighted loss requires w1 > w2 > 0");
    LossSpec spec;
    spec.weighted = true;
    spec.w1 = w1;
    spec.w2 = w2;
    return spec;
}

Network init_network(const std::vector<int>& dims, std::uint64_t seed, double hidden_slope,
                     bool leaky_output) {
    if (dims.size() < 2) throw Error("init_network: need at least input and output dims");
    for (int d : dims)
        if (d < 1) throw Error("init_network: layer dims must be >= 1");

    Network net;
    net.dims = dims;
    net.hidden_slope = hidden_slope;
    net.leaky_output = leaky_output;
    net.seed = seed;
    std::mt19937_64 rng(mix_seed(seed, kSaltInit));
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double lim = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-lim, lim);
        Eigen::MatrixXd W(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) W(r, c) = dist(rng);
        net.W.push_back(std::move(W));
        net.b.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

long n_parameters(const Network& net) {
    long count = 0;
    for (int l = 0; l < net.n_layers(); ++l)
        count += net.W[static_cast<std::size_t>(l)].size() +
                 net.b[static_cast<std::size_t>(l)].size();
    return count;
}

Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& X) {
    if (X.rows() != net.d_in()) throw Error("forward: input dimension mismatch");
    if (!X.allFinite()) throw Error("forward: non-finite input");
    const Eigen::MatrixXd Xs =
        net.has_stats() ? standardize_cols(X, net.x_mean, net.x_scale) : X;
    Eigen::MatrixXd out = eval_raw(net, Xs, nullptr);
    if (net.has_stats()) out = unstandardize_cols(out, net.y_mean, net.y_scale);
    return out;
}

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x) {
    return forward_batch(net, x);
}

double loss_standard(const Network& net, const Dataset& data) {
    data.validate();
    if (data.size() == 0) throw Error("loss_standard: empty dataset");
    const Eigen::MatrixXd out = forward_batch(net, data.X);
    return (data.Y - out).colwise().squaredNorm().mean();
}

double loss_weighted(const Network& net, const Dataset& data, double w1, double w2) {
    data.validate();
    if (data.size() == 0) throw Error("loss_weighted: empty dataset");
    const LossSpec spec = LossSpec::make_weighted(w1, w2);
    const Eigen::VectorXd w = per_pair_weights(data, spec);
    const Eigen::MatrixXd out = forward_batch(net, data.X);
    return ((data.Y - out).colwise().squaredNorm() * w.asDiagonal()).sum();
}

Gradients gradient(const Network& net, const Dataset& data, const LossSpec& spec) {
    data.validate();
    if (data.size() == 0) throw Error("gradient: empty dataset");
    return weighted_gradient(net, data.X, data.Y, per_pair_weights(data, spec));
}

AdamaxState make_adamax_state(const Network& net) {
    AdamaxState s;
    for (int l = 0; l < net.n_layers(); ++l) {
        const auto& W = net.W[static_cast<std::size_t>(l)];
        s.mW.push_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
        s.uW.push_back(Eigen::MatrixXd::Zero(W.rows(), W.cols()));
        s.mb.push_back(Eigen::VectorXd::Zero(W.rows()));
        s.ub.push_back(Eigen::VectorXd::Zero(W.rows()));
    }
    return s;
}

double adamax_update(double& m, double& u, double g, double lr, double beta1, double beta2,
                     double bias) {
    m = beta1 * m + (1.0 - beta1) * g;
    u = std::max(beta2 * u, std::abs(g));
    return (lr / bias) * m / (u + kAdamaxEps);
}

void adamax_step(AdamaxState& state, Network& net, const Gradients& grads, double lr,
                 double beta1, double beta2) {
    if (state.mW.size() != static_cast<std::size_t>(net.n_layers()))
        throw Error("adamax_step: state does not match network");
    state.t += 1;
    const double bias = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double max_update = 0.0;
    for (int l = 0; l < net.n_layers(); ++l) {
        auto& W = net.W[static_cast<std::size_t>(l)];
        auto& bv = net.b[static_cast<std::size_t>(l)];
        const auto& gW = grads.W[static_cast<std::size_t>(l)];
        const auto& gb = grads.b[static_cast<std::size_t>(l)];
        auto& mW = state.mW[static_cast<std::size_t>(l)];
        auto& uW = state.uW[static_cast<std::size_t>(l)];
        auto& mb = state.mb[static_cast<std::size_t>(l)];
        auto& ub = state.ub[static_cast<std::size_t>(l)];
        for (Eigen::Index c = 0; c < W.cols(); ++c)
            for (Eigen::Index r = 0; r < W.rows(); ++r) {
                const double step =
                    adamax_update(mW(r, c), uW(r, c), gW(r, c), lr, beta1, beta2, bias);
                W(r, c) -= step;
                max_update = std::max(max_update, std::abs(step));
            }
        for (Eigen::Index r = 0; r < bv.size(); ++r) {
            const double step = adamax_update(mb[r], ub[r], gb[r], lr, beta1, beta2, bias);
            bv[r] -= step;
            max_update = std::max(max_update, std::abs(step));
        }
    }
    state.last_max_update = max_update;
}

std::vector<double> train(Network& net, const Dataset& data, const TrainingConfig& config) {
    data.validate();
    const int N = data.size();
    if (N == 0) throw Error("train: empty dataset");
    if (data.X.rows() != net.d_in() || data.Y.rows() != net.d_out())
        throw Error("train: dataset dimensions do not match network");
    if (config.epochs < 0) throw Error("train: epochs must be >= 0");
    if (config.batch < 1) throw Error("train: batch size must be >= 1");
    if (!(config.lr > 0.0)) throw Error("train: learning rate must be > 0");
    if (!(config.beta1 > 0.0 && config.beta1 < 1.0 && config.beta2 > 0.0 && config.beta2 < 1.0))
        throw Error("train: decay rates must lie in (0,1)");
    if (config.epochs == 0) return {};

    // Standardize once; the raw network trains on standardized pairs and the
    // stored statistics make inference accept raw inputs.
    net.x_mean = data.X.rowwise().mean();
    net.y_mean = data.Y.rowwise().mean();
    auto scale_of = [N](const Eigen::MatrixXd& M, const Eigen::VectorXd& mean) {
        Eigen::VectorXd s =
            ((M.colwise() - mean).array().square().rowwise().sum() / N).sqrt().matrix();
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s[i] < 1e-12) s[i] = 1.0;
        return s;
    };
    net.x_scale = scale_of(data.X, net.x_mean);
    net.y_scale = scale_of(data.Y, net.y_mean);
    const Eigen::MatrixXd Xs = standardize_cols(data.X, net.x_mean, net.x_scale);
    const Eigen::MatrixXd Ys = standardize_cols(data.Y, net.y_mean, net.y_scale);

    const Eigen::VectorXd w = per_pair_weights(data, config.loss);

    std::mt19937_64 rng(mix_seed(config.seed, kSaltTrain));
    std::vector<int> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    AdamaxState state = make_adamax_state(net);
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(config.epochs));

    Eigen::MatrixXd Xb, Yb;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < N; start += config.batch) {
            const int B = std::min(config.batch, N - start);
            Xb.resize(Xs.rows(), B);
            Yb.resize(Ys.rows(), B);
            Eigen::VectorXd wb(B);
            for (int j = 0; j < B; ++j) {
                const int src = order[static_cast<std::size_t>(start + j)];
                Xb.col(j) = Xs.col(src);
                Yb.col(j) = Ys.col(src);
                // Rescale so the mini-batch objective estimates the full loss.
                wb[j] = w[src] * static_cast<double>(N) / B;
            }
            ForwardCache cache;
            Eigen::MatrixXd out = eval_raw(net, Xb, &cache);
            Eigen::MatrixXd seed = out - Yb;
            for (int j = 0; j < B; ++j) seed.col(j) *= 2.0 * wb[j];
            const Gradients grads = backprop_raw(net, cache, seed);
            adamax_step(state, net, grads, config.lr, config.beta1, config.beta2);
        }
        const Eigen::MatrixXd out = eval_raw(net, Xs, nullptr);
        const double loss = ((Ys - out).colwise().squaredNorm() * w.asDiagonal()).sum();
        if (!std::isfinite(loss)) throw TrainingError("train: loss diverged", epoch);
        history.push_back(loss);
    }
    return history;
}

Eigen::MatrixXd rollout(const Network& net, const Eigen::VectorXd& c0,
                        const std::vector<Eigen::VectorXd>& inputs) {
    const int m = static_cast<int>(c0.size());
    if (net.d_out() != m) throw Error("rollout: state dimension does not match network output");
    Eigen::MatrixXd traj(m, static_cast<Eigen::Index>(inputs.size()) + 1);
    traj.col(0) = c0;
    Eigen::VectorXd x(net.d_in());
    for (std::size_t n = 0; n < inputs.size(); ++n) {
        if (m + static_cast<int>(inputs[n].size()) != net.d_in())
            throw Error("rollout: encoded input dimension mismatch");
        x.head(m) = traj.col(static_cast<Eigen::Index>(n));
        if (inputs[n].size() > 0) x.tail(inputs[n].size()) = inputs[n];
        traj.col(static_cast<Eigen::Index>(n) + 1) = forward(net, x);
    }
    return traj;
}

}  // namespace podnet
