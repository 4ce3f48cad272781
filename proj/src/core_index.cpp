#include "doraemon/core_index.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace doraemon {

namespace {

// Round-half-up; bounds are computed under the same rounding as lookup.
std::int64_t round_position(double p) {
    return static_cast<std::int64_t>(std::floor(p + 0.5));
}

double round_position_d(double p) { return std::floor(p + 0.5); }

int arch_flops(const ModelArch& arch) {
    if (arch.is_linear()) return 2;
    int flops = 0;
    int in = 1;
    for (int l = 0; l < arch.hidden_layers; ++l) {
        flops += 2 * in * arch.width + arch.width;  // affine + ReLU
        in = arch.width;
    }
    flops += 2 * in + 1;
    return flops;
}

}  // namespace

std::optional<std::uint64_t> SortedDataset::find(std::uint64_t key) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), key);
    if (it == keys.end() || *it != key) return std::nullopt;
    return static_cast<std::uint64_t>(it - keys.begin());
}

double StagedIndex::normalize_key(std::uint64_t key) const {
    if (key_max == key_min) return 0.0;
    return (static_cast<double>(key) - static_cast<double>(key_min)) /
           (static_cast<double>(key_max) - static_cast<double>(key_min));
}

double StagedIndex::root_predict(std::uint64_t key) const {
    const double x = normalize_key(key);
    if (const auto* lin = std::get_if<LinearModel>(&root)) return lin->predict(x);
    return std::get<NeuralNet>(root).forward(x);
}

double StagedIndex::leaf_predict(std::size_t leaf, std::uint64_t key) const {
    return leaves[leaf].model.predict(normalize_key(key));
}

std::size_t route(const StagedIndex& index, std::uint64_t key) {
    const double t = index.root_predict(key);
    const double m = static_cast<double>(index.leaves.size());
    double raw = std::floor(t * m);
    if (!(raw > 0.0)) return 0;  // also catches NaN
    if (raw >= m) raw = m - 1.0;
    return static_cast<std::size_t>(raw);
}

StagedIndex train_staged(std::span<const TrainingPair> pairs, const ModelArch& arch, std::size_t M,
                         const TrainConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("empty training set");
    if (M == 0) throw std::invalid_argument("leaf count must be positive");

    StagedIndex index;
    index.arch = arch;
    index.n_keys = pairs.size();
    index.key_min = pairs.front().key;
    index.key_max = pairs.back().key;
    index.pos_scale = std::max(1.0, pairs.back().position);
    index.leaves.resize(M);

    // Root stage: normalized keys against normalized positions.
    std::vector<Sample> root_samples;
    root_samples.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double x = index.key_min == index.key_max
                             ? 0.0
                             : (static_cast<double>(p.key) - static_cast<double>(index.key_min)) /
                                   (static_cast<double>(index.key_max) - static_cast<double>(index.key_min));
        root_samples.push_back({x, p.position / index.pos_scale});
    }
    if (arch.is_linear()) {
        index.root = fit_linear(root_samples);
    } else {
        index.root = fit_nn(root_samples, arch, cfg).net;
    }

    refit_leaves(index, pairs);
    return index;
}

void refit_leaves(StagedIndex& index, std::span<const TrainingPair> pairs) {
    const std::size_t m = index.leaves.size();
    // Leaf stage: each pair lands in exactly one leaf.
    std::vector<std::vector<Sample>> buckets(m);
    for (const auto& p : pairs) {
        buckets[route(index, p.key)].push_back({index.normalize_key(p.key), p.position});
    }

    std::vector<double> bucket_min(m, 0.0), bucket_max(m, 0.0);
    for (std::size_t l = 0; l < m; ++l) {
        index.leaves[l].key_count = buckets[l].size();
        if (buckets[l].empty()) continue;
        index.leaves[l].model = fit_linear(buckets[l]);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& [x, y] : buckets[l]) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        bucket_min[l] = lo;
        bucket_max[l] = hi;
    }

    // Empty leaves predict the midpoint between the neighboring leaves'
    // position ranges; they are unreachable for training keys.
    const double pos_max = pairs.empty() ? 0.0 : pairs.back().position;
    double prev_max = 0.0;
    std::vector<double> next_min(m, pos_max);
    double running = pos_max;
    for (std::size_t l = m; l-- > 0;) {
        next_min[l] = running;
        if (index.leaves[l].key_count > 0) running = bucket_min[l];
    }
    for (std::size_t l = 0; l < m; ++l) {
        if (index.leaves[l].key_count == 0) {
            index.leaves[l].model = {0.0, (prev_max + next_min[l]) / 2.0};
        } else {
            prev_max = bucket_max[l];
        }
    }

    compute_error_bounds(index, pairs);
}

void compute_error_bounds(StagedIndex& index, const SortedDataset& data) {
    for (auto& leaf : index.leaves) {
        leaf.err_lo = 0;
        leaf.err_hi = 0;
        leaf.key_count = 0;
    }
    std::vector<bool> seen(index.leaves.size(), false);
    for (std::size_t i = 0; i < data.keys.size(); ++i) {
        const std::size_t l = route(index, data.keys[i]);
        const std::int64_t pred = round_position(index.leaf_predict(l, data.keys[i]));
        const std::int64_t err = static_cast<std::int64_t>(i) - pred;
        auto& leaf = index.leaves[l];
        if (!seen[l]) {
            leaf.err_lo = leaf.err_hi = err;
            seen[l] = true;
        } else {
            leaf.err_lo = std::min(leaf.err_lo, err);
            leaf.err_hi = std::max(leaf.err_hi, err);
        }
        ++leaf.key_count;
    }
    index.n_keys = data.keys.size();
}

void compute_error_bounds(StagedIndex& index, std::span<const TrainingPair> pairs) {
    for (auto& leaf : index.leaves) {
        leaf.err_lo = 0;
        leaf.err_hi = 0;
        leaf.key_count = 0;
    }
    std::vector<double> lo(index.leaves.size(), 0.0), hi(index.leaves.size(), 0.0);
    std::vector<bool> seen(index.leaves.size(), false);
    for (const auto& p : pairs) {
        const std::size_t l = route(index, p.key);
        const double err = p.position - round_position_d(index.leaf_predict(l, p.key));
        if (!seen[l]) {
            lo[l] = hi[l] = err;
            seen[l] = true;
        } else {
            lo[l] = std::min(lo[l], err);
            hi[l] = std::max(hi[l], err);
        }
        ++index.leaves[l].key_count;
    }
    for (std::size_t l = 0; l < index.leaves.size(); ++l) {
        if (!seen[l]) continue;
        index.leaves[l].err_lo = static_cast<std::int64_t>(std::floor(lo[l]));
        index.leaves[l].err_hi = static_cast<std::int64_t>(std::ceil(hi[l]));
    }
}

std::optional<std::uint64_t> lookup(const StagedIndex& index, const SortedDataset& data,
                                    std::uint64_t key) {
    if (data.keys.empty()) return std::nullopt;
    const std::int64_t n = static_cast<std::int64_t>(data.keys.size());
    const std::size_t l = route(index, key);
    const auto& leaf = index.leaves[l];
    const std::int64_t pred = std::clamp<std::int64_t>(
        round_position(index.leaf_predict(l, key)), 0, n - 1);
    const std::int64_t lo = std::clamp<std::int64_t>(pred + leaf.err_lo, 0, n - 1);
    const std::int64_t hi = std::clamp<std::int64_t>(pred + leaf.err_hi, 0, n - 1);
    const auto first = data.keys.begin() + lo;
    const auto last = data.keys.begin() + hi + 1;
    const auto it = std::lower_bound(first, last, key);
    if (it == last || *it != key) return std::nullopt;
    return static_cast<std::uint64_t>(it - data.keys.begin());
}

CostModel CostModel::deterministic() {
    CostModel cm;
    cm.per_flop_ = 0.0;
    return cm;
}

namespace {

double time_ns_per_call(const auto& fn, int iters) {
    volatile double sink = 0.0;
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) sink = sink + fn(i);
    const auto end = std::chrono::steady_clock::now();
    (void)sink;
    return std::chrono::duration<double, std::nano>(end - start).count() / iters;
}

}  // namespace

CostModel CostModel::calibrated() {
    // One binary-search step ~ one comparison on a cache-resident array;
    // express model compute in multiples of it.
    std::vector<std::uint64_t> arr(1 << 20);
    for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = i * 7919;
    const double search_ns = time_ns_per_call(
        [&](int i) {
            auto it = std::lower_bound(arr.begin(), arr.end(),
                                       static_cast<std::uint64_t>(i) * 131071 % arr.back());
            return static_cast<double>(it - arr.begin());
        },
        200000);
    const double step_ns = search_ns / 20.0;  // log2(2^20) comparisons per search

    TrainConfig quick;
    quick.epochs = 5;
    std::vector<Sample> samples;
    for (int i = 0; i < 64; ++i) samples.push_back({i / 63.0, i / 63.0});
    const NeuralNet probe = fit_nn(samples, ModelArch::nn(1, 8), quick).net;
    const double nn_ns = time_ns_per_call([&](int i) { return probe.forward(i * 1e-6); }, 1000000);

    const LinearModel lin{1.0, 0.0};
    const double lin_ns = time_ns_per_call([&](int i) { return lin.predict(i * 1e-6); }, 1000000);

    CostModel cm;
    const int probe_flops = arch_flops(ModelArch::nn(1, 8));
    cm.per_flop_ = std::max(1e-6, (nn_ns - lin_ns) / (probe_flops - 2) / step_ns);
    return cm;
}

double CostModel::constant_for(const ModelArch& arch) const {
    const double per_flop = per_flop_ > 0.0 ? per_flop_ : 0.016;
    return 0.45 + per_flop * arch_flops(arch);
}

namespace {

IndexMetrics metrics_impl(const StagedIndex& index, std::span<const std::uint64_t> keys,
                          const FrequencyHistogram* freq, const CostModel& cost) {
    IndexMetrics m;
    m.leaf_widths.reserve(index.leaves.size());
    double width_sum = 0.0;
    std::size_t nonempty = 0;
    for (const auto& leaf : index.leaves) {
        m.leaf_widths.push_back(static_cast<double>(leaf.width()));
        if (leaf.key_count > 0) {
            width_sum += static_cast<double>(leaf.width());
            ++nonempty;
        }
    }
    m.mean_width = nonempty ? width_sum / static_cast<double>(nonempty) : 0.0;

    const bool weighted = freq && freq->total > 0 && freq->counts.size() == keys.size();
    double wsum = 0.0, wwidth = 0.0, wsearch = 0.0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const double w = weighted ? static_cast<double>(freq->counts[i]) : 1.0;
        if (w == 0.0) continue;
        const double width = m.leaf_widths[route(index, keys[i])];
        wsum += w;
        wwidth += w * width;
        wsearch += w * std::log2(std::max(2.0, width + 1.0));
    }
    if (wsum > 0.0) {
        m.weighted_width = wwidth / wsum;
        m.search_term = wsearch / wsum;
    }
    m.compute_constant = cost.constant_for(index.arch);
    m.cost_proxy = m.search_term + m.compute_constant;
    return m;
}

}  // namespace

IndexMetrics index_metrics(const StagedIndex& index, const SortedDataset& data,
                           const FrequencyHistogram* freq, const CostModel& cost) {
    return metrics_impl(index, data.keys, freq, cost);
}

IndexMetrics index_metrics(const StagedIndex& index, std::span<const TrainingPair> pairs,
                           const FrequencyHistogram* freq, const CostModel& cost) {
    std::vector<std::uint64_t> keys;
    keys.reserve(pairs.size());
    for (const auto& p : pairs) keys.push_back(p.key);
    return metrics_impl(index, keys, freq, cost);
}

// ---- serialization -------------------------------------------------------

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_i64(std::vector<std::uint8_t>& out, std::int64_t v) {
    put_u64(out, static_cast<std::uint64_t>(v));
}
void put_f64(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("corrupt index blob: truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
};

}  // namespace

std::vector<std::uint8_t> serialize_index(const StagedIndex& index) {
    std::vector<std::uint8_t> out;
    out.push_back('D');
    out.push_back('R');
    out.push_back('M');
    out.push_back('I');
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(index.arch.hidden_layers));
    put_u32(out, static_cast<std::uint32_t>(index.arch.width));
    put_u64(out, index.n_keys);
    put_u64(out, index.key_min);
    put_u64(out, index.key_max);
    put_f64(out, index.pos_scale);

    if (index.arch.is_linear()) {
        const auto& lin = std::get<LinearModel>(index.root);
        put_f64(out, lin.slope);
        put_f64(out, lin.intercept);
    } else {
        const auto& net = std::get<NeuralNet>(index.root);
        put_u32(out, static_cast<std::uint32_t>(net.layer_widths.size()));
        for (int w : net.layer_widths) put_u32(out, static_cast<std::uint32_t>(w));
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            for (double w : net.weights[l]) put_f64(out, w);
            for (double b : net.biases[l]) put_f64(out, b);
        }
    }

    put_u64(out, index.leaves.size());
    for (const auto& leaf : index.leaves) {
        put_f64(out, leaf.model.slope);
        put_f64(out, leaf.model.intercept);
        put_i64(out, leaf.err_lo);
        put_i64(out, leaf.err_hi);
        put_u64(out, leaf.key_count);
    }
    return out;
}

StagedIndex deserialize_index(std::span<const std::uint8_t> blob) {
    Reader r{blob};
    r.need(4);
    if (blob[0] != 'D' || blob[1] != 'R' || blob[2] != 'M' || blob[3] != 'I')
        throw std::runtime_error("corrupt index blob: bad magic");
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported index format version " + std::to_string(version));

    StagedIndex index;
    index.arch.hidden_layers = static_cast<int>(r.u32());
    index.arch.width = static_cast<int>(r.u32());
    index.n_keys = r.u64();
    index.key_min = r.u64();
    index.key_max = r.u64();
    index.pos_scale = r.f64();

    if (index.arch.is_linear()) {
        LinearModel lin;
        lin.slope = r.f64();
        lin.intercept = r.f64();
        index.root = lin;
    } else {
        NeuralNet net;
        const std::uint32_t n_widths = r.u32();
        if (n_widths < 2 || n_widths > 8) throw std::runtime_error("corrupt index blob: layer widths");
        for (std::uint32_t i = 0; i < n_widths; ++i)
            net.layer_widths.push_back(static_cast<int>(r.u32()));
        for (std::size_t l = 0; l + 1 < net.layer_widths.size(); ++l) {
            const auto in = static_cast<std::size_t>(net.layer_widths[l]);
            const auto out = static_cast<std::size_t>(net.layer_widths[l + 1]);
            std::vector<double> w(in * out);
            for (auto& v : w) v = r.f64();
            std::vector<double> b(out);
            for (auto& v : b) v = r.f64();
            net.weights.push_back(std::move(w));
            net.biases.push_back(std::move(b));
        }
        index.root = std::move(net);
    }

    const std::uint64_t m = r.u64();
    index.leaves.resize(m);
    for (auto& leaf : index.leaves) {
        leaf.model.slope = r.f64();
        leaf.model.intercept = r.f64();
        leaf.err_lo = r.i64();
        leaf.err_hi = r.i64();
        leaf.key_count = r.u64();
    }
    return index;
}

}  // namespace doraemon
