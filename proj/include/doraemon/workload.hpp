#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "doraemon/core_index.hpp"

namespace doraemon {

/// One mixture component: `weight` of the mass lands in the key-space
/// slice [lo, hi] (fractions of key_space_max), shaped uniformly or as
/// a truncated lognormal.
struct DatasetComponent {
    enum class Kind { Uniform, Lognormal };
    Kind kind = Kind::Uniform;
    double weight = 1.0;
    double lo = 0.0;
    double hi = 1.0;
    double mu = 0.0;
    double sigma = 1.0;
};

struct DatasetSpec {
    enum class Family { Uniform, Lognormal, Mixture, Piecewise };
    Family family = Family::Uniform;
    double mu = 0.0;
    double sigma = 1.0;
    std::vector<DatasetComponent> components;         // Mixture
    std::vector<std::pair<double, double>> breakpoints;  // Piecewise: (key_frac, cdf_frac), ends at (1,1)
    std::uint64_t n = 0;
    std::uint64_t key_space_max = (std::uint64_t{1} << 40);
    std::uint64_t seed = 1;
};

/// Desk-scale dataset presets 1..4: lognormal, bimodal mixture,
/// 3-component mixture with a plateau, near-uniform with one jump.
DatasetSpec dataset_preset(int which, std::uint64_t n, std::uint64_t seed);

/// Analytic CDF of the spec's key-value distribution at key k (before
/// discretization); the oracle for distribution-shape tests.
double spec_cdf(const DatasetSpec& spec, std::uint64_t key);

/// Deterministic generation of n distinct sorted keys; collisions probe
/// to the next free integer. Throws "key space exhausted" if n exceeds
/// the key space.
SortedDataset gen_dataset(const DatasetSpec& spec);

struct WorkloadSpec {
    enum class Kind { Uniform, Skewed };
    Kind kind = Kind::Uniform;
    double hot_fraction = 0.05;
    double hot_prob = 0.95;
    double hot_range_start = 0.0;  // rank fraction where the hot run begins
    std::uint64_t num_queries = 0;
    std::uint64_t seed = 1;
};

/// Query keys drawn from the dataset; skewed draws hit a contiguous
/// rank range with probability hot_prob.
std::vector<std::uint64_t> gen_workload(const WorkloadSpec& spec, const SortedDataset& data);

/// Per-key counts over a uniformly sampled subset of the workload.
/// Queries not present in the dataset are tallied in `unmatched`.
FrequencyHistogram extract_frequencies(std::span<const std::uint64_t> workload,
                                       const SortedDataset& data, double sample_rate);

/// Training pairs with integer positions, straight from the dataset.
std::vector<TrainingPair> dataset_pairs(const SortedDataset& data);

// File formats: raw little-endian u64 sequences (.keys sorted, .qry in
// query order) plus decimal-per-line text export for debugging.
void write_u64_file(const std::filesystem::path& path, std::span<const std::uint64_t> values);
std::vector<std::uint64_t> read_u64_file(const std::filesystem::path& path);
void write_u64_text(const std::filesystem::path& path, std::span<const std::uint64_t> values);

}  // namespace doraemon
