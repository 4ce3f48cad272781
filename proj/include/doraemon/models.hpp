#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace doraemon {

/// A regression sample: input x, target y.
using Sample = std::pair<double, double>;

struct LinearModel {
    double slope = 0.0;
    double intercept = 0.0;

    double predict(double x) const { return slope * x + intercept; }
};

/// First-stage architecture descriptor. hidden_layers == 0 means plain
/// linear regression; otherwise a ReLU MLP with `hidden_layers` hidden
/// layers of `width` units each (scalar in, scalar out).
struct ModelArch {
    int hidden_layers = 0;
    int width = 0;

    static ModelArch linear() { return {0, 0}; }
    static ModelArch nn(int layers, int width) { return {layers, width}; }

    bool is_linear() const { return hidden_layers == 0; }

    /// "LIN", "NN8", "NN2-4", ...
    std::string name() const;

    /// Total parameter-op count proxy, used for tie-breaking: simpler
    /// architectures rank lower.
    int complexity_rank() const { return hidden_layers * 1000 + width; }

    bool operator==(const ModelArch&) const = default;
};

ModelArch parse_arch(const std::string& name);

struct TrainConfig {
    int epochs = 500;
    double learning_rate = 0.1;
    int batch_size = 256;
    std::uint64_t seed = 1;
    int fine_tune_epochs = 100;
};

/// Fully-connected net, scalar input and output, ReLU hidden layers,
/// identity output. weights[l] is row-major (out x in).
struct NeuralNet {
    std::vector<int> layer_widths;  // e.g. {1, 8, 1}
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    double forward(double x) const;
    std::size_t parameter_count() const;
};

struct NetFit {
    NeuralNet net;
    double loss = 0.0;  // full-set MSE of the returned parameters
};

/// Closed-form least squares. Constant-x input degenerates to
/// slope 0 / intercept mean(y). Throws std::invalid_argument on empty input.
LinearModel fit_linear(std::span<const Sample> pairs);

inline double linear_predict(const LinearModel& m, double x) { return m.predict(x); }

/// Mini-batch gradient descent on MSE. Deterministic per cfg.seed.
/// Throws std::runtime_error("training diverged at epoch N") if the
/// epoch loss goes non-finite.
NetFit fit_nn(std::span<const Sample> pairs, const ModelArch& arch, const TrainConfig& cfg);

inline double nn_forward(const NeuralNet& m, double x) { return m.forward(x); }

/// Full-set MSE; if grad is non-null it receives dLoss/dTheta with the
/// same shapes as `m`. Shared by training and the finite-difference tests.
double nn_loss(const NeuralNet& m, std::span<const Sample> pairs, NeuralNet* grad = nullptr);

/// Runs cfg.fine_tune_epochs of gradient descent from the given
/// parameters and returns the best-loss snapshot (including the initial
/// one), so the returned loss never exceeds the starting loss.
NetFit fine_tune(const NeuralNet& m, std::span<const Sample> pairs, const TrainConfig& cfg);

/// Linear fine-tuning is an exact closed-form refit.
LinearModel fine_tune(const LinearModel& m, std::span<const Sample> pairs);

}  // namespace doraemon
