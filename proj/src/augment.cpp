#include "doraemon/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace doraemon {

WeightVector compute_weights(const FrequencyHistogram& hist, double cap, WeightMode mode) {
    if (cap < 1.0) throw std::invalid_argument("cap must be >= 1");
    WeightVector w;
    w.cap = cap;
    w.mode = mode;
    w.weights.assign(hist.counts.size(), 1.0);

    double f_min = std::numeric_limits<double>::infinity();
    for (const std::uint64_t c : hist.counts) {
        const double f = mode == WeightMode::Smoothed ? static_cast<double>(c) + 1.0
                                                      : static_cast<double>(c);
        if (f > 0.0) f_min = std::min(f_min, f);
    }
    if (!std::isfinite(f_min)) {  // all-zero histogram, raw mode
        w.uniform_fallback = true;
        return w;
    }
    w.f_min = f_min;

    bool any_above_one = false;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double f = mode == WeightMode::Smoothed ? static_cast<double>(hist.counts[i]) + 1.0
                                                      : static_cast<double>(hist.counts[i]);
        double wi = f > 0.0 ? f / f_min : 1.0;
        if (mode == WeightMode::Smoothed) wi = std::min(cap, wi);
        wi = std::max(1.0, wi);
        if (wi > 1.0) any_above_one = true;
        w.weights[i] = wi;
    }
    w.uniform_fallback = !any_above_one && hist.total == 0;
    return w;
}

std::vector<TrainingPair> duplicate_augment(const SortedDataset& data,
                                            const FrequencyHistogram& hist, double cap,
                                            WeightMode mode) {
    if (hist.counts.size() != data.keys.size())
        throw std::invalid_argument("histogram not aligned to dataset");
    const WeightVector w = compute_weights(hist, cap, mode);
    std::vector<TrainingPair> pairs;
    pairs.reserve(data.keys.size());
    for (std::size_t i = 0; i < data.keys.size(); ++i) {
        const auto copies = std::max<std::int64_t>(1, std::llround(w.weights[i]));
        for (std::int64_t c = 0; c < copies; ++c)
            pairs.push_back({data.keys[i], static_cast<double>(i)});
    }
    return pairs;
}

StretchedTrainingSet stretch(const SortedDataset& data, const WeightVector& w) {
    if (w.weights.size() != data.keys.size())
        throw std::invalid_argument("weights not aligned to dataset");
    StretchedTrainingSet out;
    out.pairs.reserve(data.keys.size());
    double shift = 0.0;  // sum of weights of the preceding keys
    for (std::size_t i = 0; i < data.keys.size(); ++i) {
        const double wi = w.weights[i];
        if (wi < 1.0) throw std::invalid_argument("weights must be >= 1");
        out.pairs.push_back({data.keys[i], shift + (wi - 1.0) / 2.0});
        shift += wi;
    }
    out.stretched_total = shift;
    return out;
}

void finalize(StagedIndex& index, const SortedDataset& data) {
    const std::size_t m = index.leaves.size();
    std::vector<std::vector<Sample>> buckets(m);
    for (std::size_t i = 0; i < data.keys.size(); ++i) {
        buckets[route(index, data.keys[i])].push_back(
            {index.normalize_key(data.keys[i]), static_cast<double>(i)});
    }
    for (std::size_t l = 0; l < m; ++l) {
        if (!buckets[l].empty()) index.leaves[l].model = fit_linear(buckets[l]);
    }
    compute_error_bounds(index, data);
}

}  // namespace doraemon
