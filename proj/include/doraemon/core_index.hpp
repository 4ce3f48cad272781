#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "doraemon/models.hpp"

namespace doraemon {

/// Strictly ascending 64-bit keys; the position of keys[i] is i.
struct SortedDataset {
    std::vector<std::uint64_t> keys;

    std::size_t size() const { return keys.size(); }
    /// Exact position by binary search, or nullopt.
    std::optional<std::uint64_t> find(std::uint64_t key) const;
};

/// Key/position pair; positions may be fractional after stretching.
struct TrainingPair {
    std::uint64_t key = 0;
    double position = 0.0;
};

/// Per-key access counts aligned to dataset positions.
struct FrequencyHistogram {
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;
    std::uint64_t unmatched = 0;  // sampled queries not present in the dataset
};

struct LeafModel {
    LinearModel model;
    std::int64_t err_lo = 0;  // most negative signed error (true - round(pred))
    std::int64_t err_hi = 0;  // most positive
    std::uint64_t key_count = 0;

    std::int64_t width() const { return err_hi - err_lo; }
};

/// Two-stage learned index: root model routes a key to one of M leaf
/// linear models; the leaf predicts the position; err_lo/err_hi bound
/// the binary-search window.
struct StagedIndex {
    ModelArch arch;
    std::variant<LinearModel, NeuralNet> root;
    std::vector<LeafModel> leaves;
    std::uint64_t n_keys = 0;
    std::uint64_t key_min = 0;
    std::uint64_t key_max = 0;
    double pos_scale = 1.0;  // max training position; root targets are position/pos_scale

    double normalize_key(std::uint64_t key) const;
    /// Root output in normalized position units (ideally [0,1]).
    double root_predict(std::uint64_t key) const;
    std::size_t leaf_count() const { return leaves.size(); }
    /// Leaf prediction in original position units.
    double leaf_predict(std::size_t leaf, std::uint64_t key) const;
};

/// Leaf id in [0, M-1]: floor(M * root_prediction) clamped.
std::size_t route(const StagedIndex& index, std::uint64_t key);

/// Trains root on all pairs, routes them, fits one linear model per
/// leaf, and seeds the error bounds from the training positions.
/// Throws on empty input or M == 0.
StagedIndex train_staged(std::span<const TrainingPair> pairs, const ModelArch& arch, std::size_t M,
                         const TrainConfig& cfg);

/// Rebuilds the leaf stage against `pairs` keeping the root: routes
/// every pair, refits each leaf closed-form, gives empty leaves the
/// neighbor-midpoint constant model, and seeds bounds from the pairs.
void refit_leaves(StagedIndex& index, std::span<const TrainingPair> pairs);

/// Recomputes exact per-leaf signed error bounds against the dataset.
void compute_error_bounds(StagedIndex& index, const SortedDataset& data);

/// Seeds bounds from (possibly fractional) training positions; used by
/// the tuner before finalization.
void compute_error_bounds(StagedIndex& index, std::span<const TrainingPair> pairs);

/// Exact-match lookup via bounded binary search. Requires bounds
/// computed against `data`.
std::optional<std::uint64_t> lookup(const StagedIndex& index, const SortedDataset& data,
                                    std::uint64_t key);

/// Architecture compute-cost constants for the lookup-cost proxy, in
/// units of binary-search steps.
class CostModel {
public:
    /// Fixed table; reproducible, used by tests and deterministic mode.
    static CostModel deterministic();
    /// Measures forward-evaluation time per architecture against the
    /// cost of one binary-search step.
    static CostModel calibrated();

    double constant_for(const ModelArch& arch) const;

private:
    double per_flop_ = 0.0;  // calibrated ns-per-op ratio; 0 => table mode
};

struct IndexMetrics {
    double mean_width = 0.0;          // over non-empty leaves
    double weighted_width = 0.0;      // frequency-weighted over keys
    double search_term = 0.0;         // mean log2(max(2, width + 1)) over keys
    double compute_constant = 0.0;
    double cost_proxy = 0.0;          // search_term + compute_constant
    std::vector<double> leaf_widths;  // per-leaf, index-aligned
};

/// Bound-width and lookup-cost summary. `freq`, when given, must be
/// aligned to dataset positions; without it all keys weigh equally.
IndexMetrics index_metrics(const StagedIndex& index, const SortedDataset& data,
                           const FrequencyHistogram* freq, const CostModel& cost);

/// Same summary computed from training pairs (pair i carries weight
/// freq->counts[i]); scores candidates before finalization.
IndexMetrics index_metrics(const StagedIndex& index, std::span<const TrainingPair> pairs,
                           const FrequencyHistogram* freq, const CostModel& cost);

/// Versioned little-endian binary blob ("DRMI" magic).
std::vector<std::uint8_t> serialize_index(const StagedIndex& index);
StagedIndex deserialize_index(std::span<const std::uint8_t> blob);

}  // namespace doraemon
