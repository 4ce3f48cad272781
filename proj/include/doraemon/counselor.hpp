#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doraemon/core_index.hpp"

namespace doraemon {

/// Fixed-length inverse-CDF sample: normalized key values at ranks
/// floor(i * N / K). Index-aligned, so MSE between two sketches needs
/// no interpolation.
struct DistributionSketch {
    std::vector<double> quantile_keys;

    std::size_t k() const { return quantile_keys.size(); }
};

constexpr std::size_t kDefaultSketchK = 64;
constexpr double kDefaultTau = 1e-3;

/// Throws "sample larger than population" when K > N.
DistributionSketch analyze(std::span<const TrainingPair> pairs, std::size_t K);

double sketch_mse(const DistributionSketch& a, const DistributionSketch& b);

struct CacheEntry {
    std::string id;
    DistributionSketch sketch;
    ModelArch arch;
    std::size_t m = 0;
    double train_loss = 0.0;
    std::int64_t created_at = 0;  // unix seconds
    std::vector<std::uint8_t> blob;  // serialized index; loaded lazily
};

/// Disk-backed LRU map from distribution sketches to trained indexes.
/// Layout: <dir>/<id>.drmi (sketch header + index blob) plus a JSON
/// manifest with sketches and recency order.
class ModelCache {
public:
    ModelCache(std::filesystem::path dir, double tau = kDefaultTau, std::size_t capacity = 256);

    /// Nearest entry by sketch MSE, or (nullptr, +inf) when empty.
    /// A hit refreshes the entry's recency.
    std::pair<const CacheEntry*, double> lookup(const DistributionSketch& sketch);

    /// Inserts and persists; evicts the least-recently-used entry past
    /// capacity.
    void insert(CacheEntry entry);

    /// Entry blob, loading from disk on first use.
    const std::vector<std::uint8_t>& blob(const CacheEntry& entry);

    std::size_t size() const { return entries_.size(); }
    double tau() const { return tau_; }
    const std::filesystem::path& dir() const { return dir_; }
    /// Ids ordered most-recently-used first.
    std::vector<std::string> recency_order() const;

private:
    void load_manifest();
    void save_manifest() const;

    std::filesystem::path dir_;
    double tau_;
    std::size_t capacity_;
    std::vector<CacheEntry> entries_;
    std::vector<std::string> lru_;  // most recent first
    std::uint64_t next_id_ = 0;
};

struct TuneCandidate {
    ModelArch arch;
    std::size_t m = 0;
    double cost = 0.0;
    bool failed = false;
    IndexMetrics metrics;
};

struct TuneResult {
    ModelArch best_arch;
    std::size_t best_m = 0;
    StagedIndex index;
    std::vector<TuneCandidate> table;
};

/// Default grid: first-stage families of the architecture comparison.
std::vector<std::pair<ModelArch, std::size_t>> default_search_space(std::size_t m);

/// Grid search: trains every candidate, scores by the lookup-cost
/// proxy (frequency-weighted when probe is given), returns the argmin.
/// Ties break toward the simpler architecture, then smaller M.
/// Diverged candidates are skipped; throws if all fail.
TuneResult auto_tune(std::span<const TrainingPair> pairs,
                     std::span<const std::pair<ModelArch, std::size_t>> search_space,
                     const TrainConfig& cfg, const FrequencyHistogram* probe,
                     const CostModel& cost);

enum class Provenance { FineTuned, AutoTuned };

struct AdviseResult {
    StagedIndex index;
    Provenance provenance = Provenance::AutoTuned;
    double mse = 0.0;  // sketch distance to the matched entry, +inf on miss
};

struct CounselorConfig {
    std::size_t sketch_k = kDefaultSketchK;
    std::vector<std::pair<ModelArch, std::size_t>> search_space;
    TrainConfig train;
    CostModel cost = CostModel::deterministic();
    const FrequencyHistogram* probe = nullptr;
};

/// Cache hit (MSE <= tau): fine-tune the cached model on the new pairs.
/// Miss: auto-tune and insert the winner. The returned index has bounds
/// over `pairs`; run finalize against the dataset before serving.
AdviseResult advise(ModelCache& cache, std::span<const TrainingPair> pairs,
                    const CounselorConfig& cfg);

/// Degradation trigger: recent windowed cost exceeding ratio * baseline.
bool detect_shift(double recent_cost, double baseline_cost, double ratio = 1.5);

}  // namespace doraemon
