#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "doraemon/augment.hpp"

using namespace doraemon;

namespace {

SortedDataset abc_dataset() {
    SortedDataset data;
    data.keys = {100, 200, 300};
    return data;
}

FrequencyHistogram counts_of(std::vector<std::uint64_t> counts) {
    FrequencyHistogram hist;
    hist.counts = std::move(counts);
    for (const auto c : hist.counts) hist.total += c;
    return hist;
}

// Duplication-slot oracle: materialize round(w_i) copies of each key
// and take the mean slot index per key. Exact for integer weights.
std::vector<double> slot_oracle(const std::vector<double>& weights) {
    std::vector<double> positions;
    std::size_t slot = 0;
    for (const double w : weights) {
        const auto copies = static_cast<std::size_t>(std::llround(w));
        double sum = 0.0;
        for (std::size_t c = 0; c < copies; ++c) sum += static_cast<double>(slot++);
        positions.push_back(sum / static_cast<double>(copies));
    }
    return positions;
}

}  // namespace

TEST_CASE("raw-ratio weights reproduce a 1:2:1 histogram") {
    const auto hist = counts_of({1, 2, 1});
    const WeightVector w = compute_weights(hist, 1e18, WeightMode::Raw);
    CHECK(w.weights == std::vector<double>{1.0, 2.0, 1.0});
}

TEST_CASE("smoothed weights preserve the argmax and cap blow-ups") {
    const auto smoothed = compute_weights(counts_of({1, 2, 1}), kDefaultWeightCap);
    CHECK(smoothed.weights[1] > smoothed.weights[0]);
    CHECK(smoothed.weights[0] == smoothed.weights[2]);

    const auto capped = compute_weights(counts_of({1, 100}), 16.0, WeightMode::Raw);
    CHECK(capped.weights[0] == 1.0);
    CHECK(capped.weights[1] == 100.0);  // raw mode has no cap
    const auto capped_smoothed = compute_weights(counts_of({0, 199}), 16.0);
    CHECK(capped_smoothed.weights[0] == 1.0);
    CHECK(capped_smoothed.weights[1] == 16.0);
}

TEST_CASE("equal counts give unit weights") {
    const auto w = compute_weights(counts_of({5, 5, 5, 5}), 16.0);
    for (const double wi : w.weights) CHECK(wi == 1.0);
}

TEST_CASE("all-zero histogram falls back to uniform weights") {
    const auto w = compute_weights(counts_of({0, 0, 0}), 16.0);
    CHECK(w.uniform_fallback);
    for (const double wi : w.weights) CHECK(wi == 1.0);
}

TEST_CASE("cap below one is rejected") {
    CHECK_THROWS_AS(compute_weights(counts_of({1}), 0.5), std::invalid_argument);
}

TEST_CASE("duplicate_augment doubles the hot key") {
    const auto pairs = duplicate_augment(abc_dataset(), counts_of({1, 2, 1}));
    REQUIRE(pairs.size() == 4);
    CHECK(pairs[0].key == 100);
    CHECK(pairs[0].position == 0.0);
    CHECK(pairs[1].key == 200);
    CHECK(pairs[1].position == 1.0);
    CHECK(pairs[2].key == 200);
    CHECK(pairs[2].position == 1.0);
    CHECK(pairs[3].key == 300);
    CHECK(pairs[3].position == 2.0);
}

TEST_CASE("duplicate_augment with equal frequencies is the identity") {
    const auto pairs = duplicate_augment(abc_dataset(), counts_of({3, 3, 3}));
    REQUIRE(pairs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(pairs[i].position == static_cast<double>(i));
}

TEST_CASE("duplicate_augment triples under a 1:3 ratio") {
    SortedDataset data;
    data.keys = {1, 2};
    const auto pairs = duplicate_augment(data, counts_of({1, 3}), 1e18, WeightMode::Raw);
    REQUIRE(pairs.size() == 4);
    CHECK(pairs[1].key == 2);
    CHECK(pairs[3].key == 2);
}

TEST_CASE("stretch reproduces the 1:2:1 worked example") {
    WeightVector w;
    w.weights = {1.0, 2.0, 1.0};
    const StretchedTrainingSet out = stretch(abc_dataset(), w);
    REQUIRE(out.pairs.size() == 3);
    CHECK(out.pairs[0].position == 0.0);
    CHECK(out.pairs[1].position == 1.5);
    CHECK(out.pairs[2].position == 3.0);
    CHECK(out.stretched_total == 4.0);
}

TEST_CASE("unit weights leave positions unchanged") {
    WeightVector w;
    w.weights = {1.0, 1.0, 1.0};
    const StretchedTrainingSet out = stretch(abc_dataset(), w);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out.pairs[i].position == static_cast<double>(i));
}

TEST_CASE("stretch equals the duplication-slot oracle for integer weights") {
    std::mt19937_64 rng(31);
    SortedDataset data;
    std::uint64_t key = 0;
    for (int i = 0; i < 1000; ++i) {
        key += 1 + rng() % 100;
        data.keys.push_back(key);
    }
    for (int trial = 0; trial < 100; ++trial) {
        WeightVector w;
        for (int i = 0; i < 1000; ++i) w.weights.push_back(static_cast<double>(1 + rng() % 9));
        const auto oracle = slot_oracle(w.weights);
        const StretchedTrainingSet out = stretch(data, w);
        for (std::size_t i = 0; i < 1000; ++i) CHECK(out.pairs[i].position == oracle[i]);
    }
}

TEST_CASE("stretched positions are strictly increasing with the gap law") {
    std::mt19937_64 rng(37);
    SortedDataset data;
    for (std::uint64_t i = 0; i < 500; ++i) data.keys.push_back(i * 3 + 1);
    WeightVector w;
    for (int i = 0; i < 500; ++i)
        w.weights.push_back(1.0 + static_cast<double>(rng() % 1000) / 100.0);
    const StretchedTrainingSet out = stretch(data, w);
    for (std::size_t i = 0; i + 1 < out.pairs.size(); ++i) {
        const double gap = out.pairs[i + 1].position - out.pairs[i].position;
        CHECK(gap > 0.0);
        CHECK(gap == doctest::Approx((w.weights[i] + w.weights[i + 1]) / 2.0));
    }
}

TEST_CASE("finalize on unstretched training is a near no-op") {
    SortedDataset data;
    std::mt19937_64 rng(41);
    std::uint64_t key = 0;
    for (int i = 0; i < 2000; ++i) {
        key += 1 + rng() % 20;
        data.keys.push_back(key);
    }
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 8, {});
    compute_error_bounds(index, data);
    const auto before = index.leaves;
    finalize(index, data);
    for (std::size_t l = 0; l < index.leaves.size(); ++l) {
        CHECK(index.leaves[l].model.slope ==
              doctest::Approx(before[l].model.slope).epsilon(1e-9));
        CHECK(index.leaves[l].err_lo == before[l].err_lo);
        CHECK(index.leaves[l].err_hi == before[l].err_hi);
    }
}

TEST_CASE("stretch then finalize restores exactness on a skewed scenario") {
    std::mt19937_64 rng(43);
    SortedDataset data;
    std::uint64_t key = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        key += 1 + rng() % 20;
        data.keys.push_back(key);
    }
    // 95/5-style weights: a hot run in the middle
    WeightVector w;
    w.weights.assign(n, 1.0);
    for (int i = n / 2; i < n / 2 + n / 20; ++i) w.weights[i] = 16.0;

    const StretchedTrainingSet stretched = stretch(data, w);
    auto index = train_staged(stretched.pairs, ModelArch::linear(), 100, {});
    finalize(index, data);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (lookup(index, data, data.keys[i]) == std::uint64_t{i}) ++hits;
    CHECK(hits == data.size());

    // bound soundness against the original dataset
    for (std::size_t i = 0; i < data.size(); i += 101) {
        const std::size_t l = route(index, data.keys[i]);
        const auto pred = static_cast<std::int64_t>(
            std::floor(index.leaf_predict(l, data.keys[i]) + 0.5));
        const std::int64_t err = static_cast<std::int64_t>(i) - pred;
        CHECK(err >= index.leaves[l].err_lo);
        CHECK(err <= index.leaves[l].err_hi);
    }
}

TEST_CASE("per-leaf refit of a thousand-key leaf is fast") {
    std::vector<Sample> samples;
    for (int i = 0; i < 1000; ++i) samples.push_back({i / 999.0, static_cast<double>(i)});
    const auto t0 = std::chrono::steady_clock::now();
    const LinearModel m = fit_linear(samples);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    CHECK(m.slope > 0.0);
    CHECK(ms < 1.0);
}
