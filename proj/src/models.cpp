#include "doraemon/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace doraemon {

std::string ModelArch::name() const {
    if (is_linear()) return "LIN";
    if (hidden_layers == 1) return "NN" + std::to_string(width);
    return "NN" + std::to_string(hidden_layers) + "-" + std::to_string(width);
}

ModelArch parse_arch(const std::string& name) {
    if (name == "LIN" || name == "lin") return ModelArch::linear();
    if (name.rfind("NN", 0) != 0) throw std::invalid_argument("unknown architecture: " + name);
    std::string body = name.substr(2);
    auto dash = body.find('-');
    if (dash == std::string::npos) return ModelArch::nn(1, std::stoi(body));
    return ModelArch::nn(std::stoi(body.substr(0, dash)), std::stoi(body.substr(dash + 1)));
}

LinearModel fit_linear(std::span<const Sample> pairs) {
    if (pairs.empty()) throw std::invalid_argument("empty training set");
    const double n = static_cast<double>(pairs.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (const auto& [x, y] : pairs) {
        mean_x += x;
        mean_y += y;
    }
    mean_x /= n;
    mean_y /= n;
    // Centered normal equations; sxx == 0 covers the single-point and
    // constant-x cases.
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pairs) {
        const double dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    if (sxx <= 0.0) return {0.0, mean_y};
    const double slope = sxy / sxx;
    return {slope, mean_y - slope * mean_x};
}

double NeuralNet::forward(double x) const {
    std::vector<double> act{x};
    std::vector<double> next;
    const std::size_t layers = weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = layer_widths[l];
        const int out = layer_widths[l + 1];
        next.assign(static_cast<std::size_t>(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double z = biases[l][static_cast<std::size_t>(o)];
            for (int i = 0; i < in; ++i)
                z += weights[l][static_cast<std::size_t>(o * in + i)] * act[static_cast<std::size_t>(i)];
            if (l + 1 < layers) z = std::max(0.0, z);  // ReLU on hidden layers
            next[static_cast<std::size_t>(o)] = z;
        }
        act.swap(next);
    }
    return act[0];
}

std::size_t NeuralNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

namespace {

NeuralNet make_net(const ModelArch& arch) {
    NeuralNet net;
    net.layer_widths.push_back(1);
    for (int l = 0; l < arch.hidden_layers; ++l) net.layer_widths.push_back(arch.width);
    net.layer_widths.push_back(1);
    for (std::size_t l = 0; l + 1 < net.layer_widths.size(); ++l) {
        const auto in = static_cast<std::size_t>(net.layer_widths[l]);
        const auto out = static_cast<std::size_t>(net.layer_widths[l + 1]);
        net.weights.emplace_back(in * out, 0.0);
        net.biases.emplace_back(out, 0.0);
    }
    return net;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void init_params(NeuralNet& net, std::mt19937_64& rng) {
    for (std::size_t l = 0; l + 1 < net.layer_widths.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(net.layer_widths[l]));
        for (auto& w : net.weights[l]) w = (2.0 * uniform01(rng) - 1.0) * bound;
        for (auto& b : net.biases[l]) b = (2.0 * uniform01(rng) - 1.0) * bound;
    }
}

NeuralNet zero_like(const NeuralNet& net) {
    NeuralNet g;
    g.layer_widths = net.layer_widths;
    for (const auto& w : net.weights) g.weights.emplace_back(w.size(), 0.0);
    for (const auto& b : net.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
}

// Forward + backward for one sample; accumulates scaled gradients into
// `grad` and returns the squared error.
double backprop_sample(const NeuralNet& net, double x, double y, double grad_scale, NeuralNet& grad) {
    const std::size_t layers = net.weights.size();
    // Keep pre-activations and activations per layer for the backward pass.
    std::vector<std::vector<double>> acts(layers + 1);
    acts[0] = {x};
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = net.layer_widths[l];
        const int out = net.layer_widths[l + 1];
        acts[l + 1].assign(static_cast<std::size_t>(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double z = net.biases[l][static_cast<std::size_t>(o)];
            for (int i = 0; i < in; ++i)
                z += net.weights[l][static_cast<std::size_t>(o * in + i)] * acts[l][static_cast<std::size_t>(i)];
            if (l + 1 < layers) z = std::max(0.0, z);
            acts[l + 1][static_cast<std::size_t>(o)] = z;
        }
    }
    const double pred = acts[layers][0];
    const double err = pred - y;

    std::vector<double> delta{2.0 * err};  // dLoss/dOutput for squared error
    std::vector<double> prev_delta;
    for (std::size_t li = layers; li-- > 0;) {
        const int in = net.layer_widths[li];
        const int out = net.layer_widths[li + 1];
        prev_delta.assign(static_cast<std::size_t>(in), 0.0);
        for (int o = 0; o < out; ++o) {
            double d = delta[static_cast<std::size_t>(o)];
            // Hidden-layer ReLU: gradient gated by the stored activation.
            if (li + 1 < layers && acts[li + 1][static_cast<std::size_t>(o)] <= 0.0) d = 0.0;
            grad.biases[li][static_cast<std::size_t>(o)] += grad_scale * d;
            for (int i = 0; i < in; ++i) {
                grad.weights[li][static_cast<std::size_t>(o * in + i)] +=
                    grad_scale * d * acts[li][static_cast<std::size_t>(i)];
                prev_delta[static_cast<std::size_t>(i)] +=
                    d * net.weights[li][static_cast<std::size_t>(o * in + i)];
            }
        }
        delta.swap(prev_delta);
    }
    return err * err;
}

void apply_step(NeuralNet& net, const NeuralNet& grad, double lr) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) net.weights[l][i] -= lr * grad.weights[l][i];
        for (std::size_t i = 0; i < net.biases[l].size(); ++i) net.biases[l][i] -= lr * grad.biases[l][i];
    }
}

void zero_grad(NeuralNet& grad) {
    for (auto& w : grad.weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : grad.biases) std::fill(b.begin(), b.end(), 0.0);
}

// One epoch of shuffled mini-batch SGD; returns the mean squared error
// accumulated over the pre-update batch passes.
double run_epoch(NeuralNet& net, std::span<const Sample> pairs, std::vector<std::size_t>& perm,
                 std::mt19937_64& rng, int batch_size, double lr, NeuralNet& grad) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
        const double scale = 1.0 / static_cast<double>(end - start);
        zero_grad(grad);
        for (std::size_t k = start; k < end; ++k) {
            const auto& [x, y] = pairs[perm[k]];
            loss_sum += backprop_sample(net, x, y, scale, grad);
        }
        apply_step(net, grad, lr);
    }
    return loss_sum / static_cast<double>(pairs.size());
}

}  // namespace

double nn_loss(const NeuralNet& m, std::span<const Sample> pairs, NeuralNet* grad) {
    if (pairs.empty()) throw std::invalid_argument("empty training set");
    NeuralNet local;
    NeuralNet* g = grad;
    if (g) {
        *g = zero_like(m);
    } else {
        local = zero_like(m);
        g = &local;
    }
    const double scale = 1.0 / static_cast<double>(pairs.size());
    double loss = 0.0;
    for (const auto& [x, y] : pairs) loss += backprop_sample(m, x, y, scale, *g);
    return loss * scale;
}

NetFit fit_nn(std::span<const Sample> pairs, const ModelArch& arch, const TrainConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("empty training set");
    if (arch.is_linear()) throw std::invalid_argument("fit_nn requires an NN architecture");
    if (arch.hidden_layers < 1 || arch.hidden_layers > 2 || arch.width < 1)
        throw std::invalid_argument("unsupported architecture: " + arch.name());

    std::mt19937_64 rng(cfg.seed);
    NeuralNet net = make_net(arch);
    init_params(net, rng);
    NeuralNet grad = zero_like(net);

    std::vector<std::size_t> perm(pairs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    double last = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        last = run_epoch(net, pairs, perm, rng, cfg.batch_size, cfg.learning_rate, grad);
        if (!std::isfinite(last))
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
    }
    const double final_loss = nn_loss(net, pairs);
    return {std::move(net), final_loss};
}

NetFit fine_tune(const NeuralNet& m, std::span<const Sample> pairs, const TrainConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("empty training set");
    std::mt19937_64 rng(cfg.seed);
    NeuralNet net = m;
    NeuralNet grad = zero_like(net);
    std::vector<std::size_t> perm(pairs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});

    NetFit best{m, nn_loss(m, pairs)};
    for (int epoch = 0; epoch < cfg.fine_tune_epochs; ++epoch) {
        const double epoch_loss =
            run_epoch(net, pairs, perm, rng, cfg.batch_size, cfg.learning_rate, grad);
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
        const double loss = nn_loss(net, pairs);
        if (loss < best.loss) best = {net, loss};
    }
    return best;
}

LinearModel fine_tune(const LinearModel&, std::span<const Sample> pairs) {
    return fit_linear(pairs);
}

}  // namespace doraemon
