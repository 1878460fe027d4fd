#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "podnet/common.hpp"

namespace podnet {

enum class Provenance : std::uint8_t { simulation = 0, observation = 1 };

/// Training pairs stored one per column: X holds inputs, Y targets. `tags`
/// is either empty or one provenance entry per pair (required by the
/// weighted loss). `run_ids` and `step_ids` are optional per-pair origin
/// metadata carried through to serialization.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
    std::vector<Provenance> tags;
    std::vector<int> run_ids;
    std::vector<int> step_ids;

    int size() const { return static_cast<int>(X.cols()); }
    void validate() const;
};

/// Fully connected network with leaky-ReLU hidden activations. The output
/// layer is linear unless `leaky_output` is set (the activated-output
/// variant). When the normalization vectors are nonempty, inference maps
/// raw inputs through the stored standardization and unscales the outputs;
/// training fills them from dataset statistics.
struct Network {
    std::vector<int> dims;
    std::vector<Eigen::MatrixXd> W;  ///< W[l] has shape dims[l+1] x dims[l]
    std::vector<Eigen::VectorXd> b;
    double hidden_slope = 0.01;
    bool leaky_output = false;
    std::uint64_t seed = 0;  ///< seed the weights were drawn from

    Eigen::VectorXd x_mean, x_scale, y_mean, y_scale;

    int n_layers() const { return static_cast<int>(W.size()); }
    int d_in() const { return dims.front(); }
    int d_out() const { return dims.back(); }
    bool has_stats() const { return x_mean.size() > 0; }
};

/// Per-parameter loss gradient, same shapes as Network::W and Network::b.
struct Gradients {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
};

struct LossSpec {
    bool weighted = false;
    double w1 = 0.0;  ///< weight of observation-tagged pairs
    double w2 = 0.0;  ///< weight of simulation-tagged pairs

    static LossSpec standard() { return LossSpec{}; }
    static LossSpec make_weighted(double w1, double w2);
};

struct AdamaxState {
    std::vector<Eigen::MatrixXd> mW, uW;
    std::vector<Eigen::VectorXd> mb, ub;
    long t = 0;
    double last_max_update = 0.0;  ///< max abs parameter change of the last step
};

struct TrainingConfig {
    int epochs = 500;
    int batch = 32;
    double lr = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    LossSpec loss = LossSpec::standard();
    std::uint64_t seed = 0;
};

/// He-style uniform init, U(+-sqrt(6/fan_in)) per layer, zero biases.
Network init_network(const std::vector<int>& dims, std::uint64_t seed,
                     double hidden_slope = 0.01, bool leaky_output = false);

long n_parameters(const Network& net);

Eigen::VectorXd forward(const Network& net, const Eigen::VectorXd& x);
Eigen::MatrixXd forward_batch(const Network& net, const Eigen::MatrixXd& X);

/// Mean squared residual norm over the dataset.
double loss_standard(const Network& net, const Dataset& data);
/// w1 * sum of observation residuals + w2 * sum of simulation residuals.
double loss_weighted(const Network& net, const Dataset& data, double w1, double w2);

/// Exact reverse-mode gradient of the specified loss over the whole set.
Gradients gradient(const Network& net, const Dataset& data, const LossSpec& spec);

AdamaxState make_adamax_state(const Network& net);

/// Elementwise AdaMax rule; returns the parameter decrement. `bias` is
/// 1 - beta1^t for the current step count.
double adamax_update(double& m, double& u, double g, double lr, double beta1, double beta2,
                     double bias);

/// Applies one AdaMax step to every parameter; increments state.t.
void adamax_step(AdamaxState& state, Network& net, const Gradients& grads, double lr,
                 double beta1, double beta2);

/// Mini-batch AdaMax training; stores normalization statistics on the
/// network and returns the per-epoch loss history (standardized scale).
/// epochs = 0 leaves the network untouched.
std::vector<double> train(Network& net, const Dataset& data, const TrainingConfig& config);

/// Iterates c -> net(concat(c, input_n)); returns columns c^0 ... c^k.
/// `inputs` may hold empty vectors for a state-only network.
Eigen::MatrixXd rollout(const Network& net, const Eigen::VectorXd& c0,
                        const std::vector<Eigen::VectorXd>& inputs);

}  // namespace podnet
