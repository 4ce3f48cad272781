#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "doraemon/models.hpp"

using namespace doraemon;

namespace {

std::vector<Sample> line_samples(std::size_t n, double slope, double intercept) {
    std::vector<Sample> s;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n - 1);
        s.push_back({x, slope * x + intercept});
    }
    return s;
}

}  // namespace

TEST_CASE("fit_linear recovers exact linear data") {
    const std::vector<Sample> pairs{{0, 0}, {1, 1}, {2, 2}};
    const LinearModel m = fit_linear(pairs);
    CHECK(m.slope == doctest::Approx(1.0));
    CHECK(m.intercept == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fit_linear single point degenerates to constant") {
    const std::vector<Sample> pairs{{5, 3}};
    const LinearModel m = fit_linear(pairs);
    CHECK(m.slope == 0.0);
    CHECK(m.intercept == doctest::Approx(3.0));
}

TEST_CASE("fit_linear solves the normal equations") {
    // By hand: sum x = 3, sum x^2 = 5, sum y = 1, sum xy = 1
    // slope = (3*1 - 3*1) / (3*5 - 9) = 0, intercept = 1/3.
    const std::vector<Sample> pairs{{0, 0}, {1, 1}, {2, 0}};
    const LinearModel m = fit_linear(pairs);
    CHECK(m.slope == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.intercept == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("fit_linear rejects empty input") {
    CHECK_THROWS_WITH_AS(fit_linear(std::vector<Sample>{}), "empty training set",
                         std::invalid_argument);
}

TEST_CASE("fit_linear constant-x input returns mean of y") {
    const std::vector<Sample> pairs{{2, 1}, {2, 3}, {2, 8}};
    const LinearModel m = fit_linear(pairs);
    CHECK(m.slope == 0.0);
    CHECK(m.intercept == doctest::Approx(4.0));
}

TEST_CASE("fit_linear residual orthogonality") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Sample> pairs;
        double scale = 0.0;
        for (int i = 0; i < 50; ++i) {
            const double x = static_cast<double>(rng() % 1000) / 999.0;
            const double y = 3.0 * x - 1.0 + static_cast<double>(rng() % 100) / 50.0;
            pairs.push_back({x, y});
            scale = std::max(scale, std::abs(y));
        }
        const LinearModel m = fit_linear(pairs);
        double sum_r = 0.0, sum_rx = 0.0;
        for (const auto& [x, y] : pairs) {
            const double r = y - m.predict(x);
            sum_r += r;
            sum_rx += r * x;
        }
        CHECK(std::abs(sum_r) < 1e-9 * pairs.size() * scale);
        CHECK(std::abs(sum_rx) < 1e-9 * pairs.size() * scale);
    }
}

TEST_CASE("linear_predict examples") {
    CHECK(linear_predict({1, 0}, 7) == doctest::Approx(7));
    CHECK(linear_predict({0, 3}, 123.4) == doctest::Approx(3));
    CHECK(linear_predict({2, -1}, 0.5) == doctest::Approx(0));
}

TEST_CASE("nn_forward hand-built nets") {
    NeuralNet zero;
    zero.layer_widths = {1, 2, 1};
    zero.weights = {{0, 0}, {0, 0}};
    zero.biases = {{0, 0}, {0}};
    CHECK(nn_forward(zero, 5.0) == 0.0);

    // single hidden unit passing x through, output identity
    NeuralNet pass;
    pass.layer_widths = {1, 1, 1};
    pass.weights = {{1}, {1}};
    pass.biases = {{0}, {0}};
    CHECK(nn_forward(pass, -2.0) == 0.0);  // rectifier clips
    CHECK(nn_forward(pass, 3.0) == doctest::Approx(3.0));
}

TEST_CASE("fit_nn beats the constant-mean predictor on y=x") {
    std::vector<Sample> pairs;
    for (int i = 0; i < 64; ++i) pairs.push_back({i / 63.0, i / 63.0});
    double mean = 0.0;
    for (const auto& [x, y] : pairs) mean += y;
    mean /= 64.0;
    double variance = 0.0;  // loss of the constant-mean baseline
    for (const auto& [x, y] : pairs) variance += (y - mean) * (y - mean);
    variance /= 64.0;

    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.seed = 42;
    const NetFit fit = fit_nn(pairs, ModelArch::nn(1, 8), cfg);
    CHECK(fit.loss < variance);
}

TEST_CASE("fit_nn is deterministic per seed") {
    std::vector<Sample> pairs;
    for (int i = 0; i < 64; ++i) pairs.push_back({i / 63.0, (i / 63.0) * 0.5 + 0.1});
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.seed = 42;
    const NetFit a = fit_nn(pairs, ModelArch::nn(1, 8), cfg);
    const NetFit b = fit_nn(pairs, ModelArch::nn(1, 8), cfg);
    CHECK(a.loss == b.loss);
    REQUIRE(a.net.weights.size() == b.net.weights.size());
    for (std::size_t l = 0; l < a.net.weights.size(); ++l) {
        CHECK(a.net.weights[l] == b.net.weights[l]);
        CHECK(a.net.biases[l] == b.net.biases[l]);
    }
}

TEST_CASE("fit_nn reports divergence with the epoch") {
    std::vector<Sample> pairs;
    for (int i = 0; i < 64; ++i) pairs.push_back({i / 63.0, i / 63.0});
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 1e6;
    try {
        fit_nn(pairs, ModelArch::nn(1, 8), cfg);
        FAIL("expected divergence");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("training diverged at epoch") == 0);
    }
}

TEST_CASE("fit_nn rejects a linear architecture") {
    std::vector<Sample> pairs{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(fit_nn(pairs, ModelArch::linear(), {}), std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 10; ++trial) {
        const int layers = 1 + static_cast<int>(rng() % 2);
        const int width = 2 + static_cast<int>(rng() % 4);
        std::vector<Sample> pairs;
        for (int i = 0; i < 16; ++i) {
            pairs.push_back({static_cast<double>(rng() % 1000) / 999.0,
                             static_cast<double>(rng() % 1000) / 999.0});
        }
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.seed = rng();
        NetFit fit = fit_nn(pairs, ModelArch::nn(layers, width), cfg);

        NeuralNet grad;
        nn_loss(fit.net, pairs, &grad);
        const double h = 1e-5;
        for (std::size_t l = 0; l < fit.net.weights.size(); ++l) {
            for (std::size_t i = 0; i < fit.net.weights[l].size(); ++i) {
                NeuralNet plus = fit.net, minus = fit.net;
                plus.weights[l][i] += h;
                minus.weights[l][i] -= h;
                const double numeric = (nn_loss(plus, pairs) - nn_loss(minus, pairs)) / (2 * h);
                const double analytic = grad.weights[l][i];
                const double denom = std::max({1e-6, std::abs(numeric), std::abs(analytic)});
                CHECK(std::abs(numeric - analytic) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("fine_tune never regresses on the training data") {
    std::vector<Sample> pairs = line_samples(64, 1.0, 0.0);
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.fine_tune_epochs = 20;
    cfg.seed = 5;
    const NetFit trained = fit_nn(pairs, ModelArch::nn(1, 8), cfg);
    const NetFit tuned = fine_tune(trained.net, pairs, cfg);
    CHECK(tuned.loss <= trained.loss);
}

TEST_CASE("fine_tune of a linear model is an exact refit") {
    const std::vector<Sample> pairs{{0, 0}, {1, 1}};
    const LinearModel start{-5.0, 17.0};
    const LinearModel tuned = fine_tune(start, pairs);
    CHECK(tuned.slope == doctest::Approx(1.0));
    CHECK(tuned.intercept == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fine_tune adapts to shifted targets") {
    std::vector<Sample> base = line_samples(64, 1.0, 0.0);
    std::vector<Sample> shifted = line_samples(64, 1.0, 0.1);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.fine_tune_epochs = 100;
    cfg.seed = 9;
    const NetFit trained = fit_nn(base, ModelArch::nn(1, 8), cfg);
    const double before = nn_loss(trained.net, shifted);
    const NetFit tuned = fine_tune(trained.net, shifted, cfg);
    CHECK(tuned.loss < before);
}

TEST_CASE("arch names round-trip") {
    for (const char* name : {"LIN", "NN4", "NN8", "NN16", "NN2-4", "NN2-8"}) {
        CHECK(parse_arch(name).name() == name);
    }
    CHECK_THROWS_AS(parse_arch("BTREE"), std::invalid_argument);
}
