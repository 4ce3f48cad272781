#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "doraemon/core_index.hpp"
#include "doraemon/workload.hpp"

using namespace doraemon;

namespace {

SortedDataset uniform_keys(std::uint64_t n) {
    SortedDataset data;
    for (std::uint64_t i = 0; i < n; ++i) data.keys.push_back(i);
    return data;
}

// Routing oracle: replays leaf selection step by step, independent of
// the index's bucketing code.
std::size_t route_oracle(const StagedIndex& index, std::uint64_t key) {
    const double t = index.root_predict(key);
    const auto m = static_cast<double>(index.leaf_count());
    const double raw = std::floor(t * m);
    if (std::isnan(raw) || raw < 0.0) return 0;
    if (raw >= m) return index.leaf_count() - 1;
    return static_cast<std::size_t>(raw);
}

}  // namespace

TEST_CASE("route with a single leaf always returns 0") {
    const SortedDataset data = uniform_keys(100);
    const auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 1, {});
    for (std::uint64_t k : {0ull, 55ull, 99ull, 12345ull}) CHECK(route(index, k) == 0);
}

TEST_CASE("route splits uniform keys evenly") {
    const SortedDataset data = uniform_keys(100);
    const auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 10, {});
    CHECK(route(index, 55) == 5);
    CHECK(route(index, 0) == 0);
    CHECK(route(index, 99) == 9);
}

TEST_CASE("route clamps adversarial root outputs") {
    StagedIndex index;
    index.arch = ModelArch::linear();
    index.leaves.resize(8);
    index.key_min = 0;
    index.key_max = 100;
    index.pos_scale = 100.0;
    index.root = LinearModel{0.0, 5.0};  // predicts far past the last leaf
    CHECK(route(index, 50) == 7);
    index.root = LinearModel{0.0, -5.0};
    CHECK(route(index, 50) == 0);
}

TEST_CASE("perfectly linear data yields zero bounds with one leaf") {
    const SortedDataset data = uniform_keys(1000);
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 1, {});
    compute_error_bounds(index, data);
    CHECK(index.leaves[0].err_lo == 0);
    CHECK(index.leaves[0].err_hi == 0);
    for (std::size_t i = 0; i < data.size(); ++i)
        CHECK(lookup(index, data, data.keys[i]) == std::uint64_t{i});
}

TEST_CASE("hand-built kinked dataset matches the routing oracle") {
    // 8 keys with a kink: dense then sparse.
    SortedDataset data;
    data.keys = {0, 1, 2, 3, 100, 200, 300, 400};
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 2, {});
    compute_error_bounds(index, data);

    // Replay routing and bound computation by hand.
    std::vector<std::int64_t> lo(2, 0), hi(2, 0);
    std::vector<bool> seen(2, false);
    std::vector<std::uint64_t> counts(2, 0);
    for (std::size_t i = 0; i < data.keys.size(); ++i) {
        const std::size_t l = route_oracle(index, data.keys[i]);
        CHECK(l == route(index, data.keys[i]));
        const auto pred = static_cast<std::int64_t>(
            std::floor(index.leaf_predict(l, data.keys[i]) + 0.5));
        const std::int64_t err = static_cast<std::int64_t>(i) - pred;
        if (!seen[l]) {
            lo[l] = hi[l] = err;
            seen[l] = true;
        } else {
            lo[l] = std::min(lo[l], err);
            hi[l] = std::max(hi[l], err);
        }
        ++counts[l];
    }
    for (std::size_t l = 0; l < 2; ++l) {
        CHECK(index.leaves[l].key_count == counts[l]);
        if (seen[l]) {
            CHECK(index.leaves[l].err_lo == lo[l]);
            CHECK(index.leaves[l].err_hi == hi[l]);
        }
    }
}

TEST_CASE("keys-per-leaf ratio follows the configured proportions") {
    DatasetSpec spec;
    spec.family = DatasetSpec::Family::Uniform;
    spec.n = 200000;
    spec.seed = 3;
    const SortedDataset data = gen_dataset(spec);
    const auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 200, {});
    double mean_count = 0.0;
    for (const auto& leaf : index.leaves) mean_count += static_cast<double>(leaf.key_count);
    mean_count /= static_cast<double>(index.leaf_count());
    CHECK(mean_count == doctest::Approx(1000.0));
}

TEST_CASE("bounds match an exhaustive per-key scan") {
    std::mt19937_64 rng(11);
    SortedDataset data;
    std::uint64_t key = 0;
    for (int i = 0; i < 2000; ++i) {
        key += 1 + rng() % 50;
        data.keys.push_back(key);
    }
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 16, {});
    compute_error_bounds(index, data);

    std::vector<std::int64_t> lo(16), hi(16);
    std::vector<bool> seen(16, false);
    for (std::size_t i = 0; i < data.keys.size(); ++i) {
        const std::size_t l = route(index, data.keys[i]);
        const auto pred = static_cast<std::int64_t>(
            std::floor(index.leaf_predict(l, data.keys[i]) + 0.5));
        const std::int64_t err = static_cast<std::int64_t>(i) - pred;
        if (!seen[l]) {
            lo[l] = hi[l] = err;
            seen[l] = true;
        } else {
            lo[l] = std::min(lo[l], err);
            hi[l] = std::max(hi[l], err);
        }
    }
    for (std::size_t l = 0; l < 16; ++l) {
        if (!seen[l]) {
            CHECK(index.leaves[l].err_lo == 0);
            CHECK(index.leaves[l].err_hi == 0);
        } else {
            CHECK(index.leaves[l].err_lo == lo[l]);
            CHECK(index.leaves[l].err_hi == hi[l]);
        }
    }
}

TEST_CASE("constant-offset predictor gets constant bounds") {
    SortedDataset data = uniform_keys(100);
    StagedIndex index;
    index.arch = ModelArch::linear();
    index.key_min = 0;
    index.key_max = 99;
    index.pos_scale = 99.0;
    index.root = LinearModel{1.0, 0.0};
    index.leaves.resize(1);
    index.leaves[0].model = {99.0, 2.0};  // predicts pos + 2 for every key
    compute_error_bounds(index, data);
    CHECK(index.leaves[0].err_lo == -2);
    CHECK(index.leaves[0].err_hi == -2);
}

TEST_CASE("lookup agrees with binary search on random probes") {
    std::mt19937_64 rng(17);
    SortedDataset data;
    std::uint64_t key = 0;
    for (int i = 0; i < 5000; ++i) {
        key += 1 + rng() % 40;
        data.keys.push_back(key);
    }
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 32, {});
    compute_error_bounds(index, data);

    for (int probe = 0; probe < 100000; ++probe) {
        const std::uint64_t q = rng() % (data.keys.back() + 100);
        const auto got = lookup(index, data, q);
        const auto expect = data.find(q);
        CHECK(got == expect);
    }
}

TEST_CASE("lookup boundary cases") {
    SortedDataset data;
    data.keys = {10, 20, 30, 40};
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 2, {});
    compute_error_bounds(index, data);
    CHECK(!lookup(index, data, 5).has_value());   // below key_min
    CHECK(!lookup(index, data, 25).has_value());  // between keys
    CHECK(!lookup(index, data, 50).has_value());  // above key_max
    CHECK(lookup(index, data, 30) == std::uint64_t{2});
}

TEST_CASE("perfect index metrics collapse to the compute constant") {
    SortedDataset data = uniform_keys(1000);
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 1, {});
    compute_error_bounds(index, data);
    const CostModel cm = CostModel::deterministic();
    const IndexMetrics m = index_metrics(index, data, nullptr, cm);
    CHECK(m.mean_width == 0.0);
    // width 0 => log2(max(2, 1)) = 1 search step plus the constant
    CHECK(m.cost_proxy == doctest::Approx(1.0 + cm.constant_for(ModelArch::linear())));
}

TEST_CASE("weighted and unweighted widths diverge under skew") {
    // Two leaves: leaf of keys 0..49 is wide, 50..99 is perfect.
    SortedDataset data = uniform_keys(100);
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 2, {});
    compute_error_bounds(index, data);
    index.leaves[0].err_lo = -8;  // force an asymmetric width
    index.leaves[0].err_hi = 8;

    FrequencyHistogram hist;
    hist.counts.assign(100, 1);
    for (std::size_t i = 50; i < 100; ++i) hist.counts[i] = 95;  // hot second half
    hist.total = 50 + 50 * 95;

    const CostModel cm = CostModel::deterministic();
    const IndexMetrics unweighted = index_metrics(index, data, nullptr, cm);
    const IndexMetrics weighted = index_metrics(index, data, &hist, cm);
    // Hand computation: widths are 16 and 0; unweighted mean over keys
    // is 8; weighted mean is 16*50/(50+4750) ~ 0.1667.
    CHECK(unweighted.weighted_width == doctest::Approx(8.0));
    CHECK(weighted.weighted_width == doctest::Approx(16.0 * 50.0 / 4800.0));
    CHECK(weighted.weighted_width < unweighted.weighted_width);
}

TEST_CASE("deterministic compute constants increase with complexity") {
    const CostModel cm = CostModel::deterministic();
    const double lin = cm.constant_for(ModelArch::linear());
    const double nn4 = cm.constant_for(ModelArch::nn(1, 4));
    const double nn8 = cm.constant_for(ModelArch::nn(1, 8));
    const double nn16 = cm.constant_for(ModelArch::nn(1, 16));
    CHECK(lin < nn4);
    CHECK(nn4 < nn8);
    CHECK(nn8 < nn16);
}

TEST_CASE("serialization round-trips both root kinds") {
    std::mt19937_64 rng(23);
    SortedDataset data;
    std::uint64_t key = 0;
    for (int i = 0; i < 1000; ++i) {
        key += 1 + rng() % 30;
        data.keys.push_back(key);
    }
    TrainConfig cfg;
    cfg.epochs = 10;
    for (const ModelArch arch : {ModelArch::linear(), ModelArch::nn(1, 4)}) {
        auto index = train_staged(dataset_pairs(data), arch, 8, cfg);
        compute_error_bounds(index, data);
        const auto blob = serialize_index(index);
        const StagedIndex back = deserialize_index(blob);
        CHECK(back.arch == index.arch);
        CHECK(back.n_keys == index.n_keys);
        CHECK(back.pos_scale == index.pos_scale);
        REQUIRE(back.leaves.size() == index.leaves.size());
        for (std::size_t l = 0; l < back.leaves.size(); ++l) {
            CHECK(back.leaves[l].model.slope == index.leaves[l].model.slope);
            CHECK(back.leaves[l].err_lo == index.leaves[l].err_lo);
            CHECK(back.leaves[l].err_hi == index.leaves[l].err_hi);
        }
        // identical blobs on re-serialization
        CHECK(serialize_index(back) == blob);
        // and identical behavior
        for (std::size_t i = 0; i < data.keys.size(); i += 37)
            CHECK(lookup(back, data, data.keys[i]) == std::uint64_t{i});
    }
}

TEST_CASE("deserialize rejects corrupt blobs") {
    SortedDataset data = uniform_keys(100);
    auto index = train_staged(dataset_pairs(data), ModelArch::linear(), 2, {});
    auto blob = serialize_index(index);
    blob[0] = 'X';
    CHECK_THROWS_AS(deserialize_index(blob), std::runtime_error);
    blob[0] = 'D';
    blob.resize(blob.size() / 2);
    CHECK_THROWS_AS(deserialize_index(blob), std::runtime_error);
}

TEST_CASE("train_staged input validation") {
    CHECK_THROWS_AS(train_staged(std::vector<TrainingPair>{}, ModelArch::linear(), 1, {}),
                    std::invalid_argument);
    SortedDataset data = uniform_keys(10);
    CHECK_THROWS_AS(train_staged(dataset_pairs(data), ModelArch::linear(), 0, {}),
                    std::invalid_argument);
}
