#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "doraemon/augment.hpp"
#include "doraemon/counselor.hpp"
#include "doraemon/workload.hpp"

namespace doraemon {

/// Tabular experiment output; first column is the schema tag.
struct Report {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
};

void write_csv(const Report& report, std::ostream& out);
void write_json(const Report& report, std::ostream& out);
void write_report(const Report& report, const std::filesystem::path& path,
                  const std::string& format);

struct ExperimentConfig {
    std::uint64_t n = 200000;
    std::size_t m = 200;  // paper ratio: ~1000 keys per leaf
    std::uint64_t queries = 1000000;
    std::uint64_t seed = 1;
    bool calibrated = false;  // wall-clock scoring; deterministic otherwise
    TrainConfig train{.epochs = 50, .learning_rate = 0.1, .batch_size = 256, .seed = 1,
                      .fine_tune_epochs = 10};
    std::vector<std::pair<ModelArch, std::size_t>> search_space;  // empty => default grid
    std::size_t sketch_k = kDefaultSketchK;
    double tau = kDefaultTau;
    double cap = kDefaultWeightCap;
    double sample_rate = 0.1;
    std::filesystem::path cache_dir = ".doraemon-cache";
};

struct GridOutput {
    Report rows;         // one row per (dataset, workload, arch) cell + baselines
    Report best;         // per-(dataset, workload) winner
    Report leaf_widths;  // per-leaf bound widths with key ranges
};

/// Architecture grid over the four dataset presets and four workloads
/// (three skewed ranges + uniform). Indexes are trained once per
/// (dataset, arch) and scored per workload.
GridOutput run_grid(const ExperimentConfig& cfg);

/// Augmentation A/B: none vs duplicate vs stretch+finalize on the
/// skewed scenario over the lognormal preset.
Report run_augment_ab(const ExperimentConfig& cfg);

/// Cold build, 5% key churn, degradation-based shift detection, warm
/// rebuild through the model cache.
Report run_shift(const ExperimentConfig& cfg);

/// Replaces `churn_frac` of the keys with fresh draws from the spec.
SortedDataset churn_dataset(const SortedDataset& data, const DatasetSpec& spec, double churn_frac,
                            std::uint64_t seed);

/// Fraction of present keys whose lookup returns the exact position.
double lookup_exactness(const StagedIndex& index, const SortedDataset& data);

}  // namespace doraemon
