#pragma once

#include <vector>

#include "doraemon/core_index.hpp"
#include "doraemon/workload.hpp"

namespace doraemon {

/// Smoothed: counts get +1 before min-normalization and the cap bounds
/// the blow-up. Raw: plain f/f_min over the nonzero counts, no cap;
/// reproduces ratio examples verbatim.
enum class WeightMode { Smoothed, Raw };

constexpr double kDefaultWeightCap = 16.0;

struct WeightVector {
    std::vector<double> weights;  // aligned to dataset positions, all >= 1
    double f_min = 1.0;
    double cap = kDefaultWeightCap;
    WeightMode mode = WeightMode::Smoothed;
    bool uniform_fallback = false;  // all-zero histogram
};

/// weights[i] = min(cap, f_i / f_min); never-sampled keys keep weight 1.
WeightVector compute_weights(const FrequencyHistogram& hist, double cap,
                             WeightMode mode = WeightMode::Smoothed);

/// Naive augmentation: key i repeated round(weights[i]) times at its
/// original integer position. Kept as the A/B baseline.
std::vector<TrainingPair> duplicate_augment(const SortedDataset& data,
                                            const FrequencyHistogram& hist,
                                            double cap = kDefaultWeightCap,
                                            WeightMode mode = WeightMode::Smoothed);

struct StretchedTrainingSet {
    std::vector<TrainingPair> pairs;  // fractional positions, strictly increasing
    double stretched_total = 0.0;     // sum of weights
};

/// Frequency stretching: position[i] = sum(weights[0..i-1]) + (weights[i]-1)/2.
/// Keys are never added or removed.
StretchedTrainingSet stretch(const SortedDataset& data, const WeightVector& w);

/// Retrains every leaf against the original integer positions and
/// recomputes bounds; routing is untouched. Restores lookup exactness
/// after training on a stretched set.
void finalize(StagedIndex& index, const SortedDataset& data);

}  // namespace doraemon
