#include "doraemon/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace doraemon {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Acklam's rational approximation of the standard normal quantile.
double normal_quantile(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Lognormal truncated at mu + sigma * kZCap and squeezed into a slice.
constexpr double kZCap = 3.0;

double lognormal_slice_sample(double u, double sigma) {
    const double p = u * normal_cdf(kZCap);
    const double z = normal_quantile(p);
    return std::exp(sigma * (z - kZCap));  // in (0, 1]
}

double lognormal_slice_cdf(double frac, double sigma) {
    if (frac <= 0.0) return 0.0;
    if (frac >= 1.0) return 1.0;
    const double z = std::log(frac) / sigma + kZCap;
    return normal_cdf(z) / normal_cdf(kZCap);
}

double component_sample(const DatasetComponent& c, double u) {
    double frac = u;
    if (c.kind == DatasetComponent::Kind::Lognormal) frac = lognormal_slice_sample(u, c.sigma);
    return c.lo + frac * (c.hi - c.lo);
}

double component_cdf(const DatasetComponent& c, double t) {
    if (t <= c.lo) return 0.0;
    if (t >= c.hi) return 1.0;
    const double frac = (t - c.lo) / (c.hi - c.lo);
    if (c.kind == DatasetComponent::Kind::Lognormal) return lognormal_slice_cdf(frac, c.sigma);
    return frac;
}

std::vector<DatasetComponent> effective_components(const DatasetSpec& spec) {
    switch (spec.family) {
        case DatasetSpec::Family::Uniform:
            return {DatasetComponent{DatasetComponent::Kind::Uniform, 1.0, 0.0, 1.0, 0.0, 1.0}};
        case DatasetSpec::Family::Lognormal:
            return {DatasetComponent{DatasetComponent::Kind::Lognormal, 1.0, 0.0, 1.0, spec.mu,
                                     spec.sigma}};
        case DatasetSpec::Family::Mixture:
            return spec.components;
        case DatasetSpec::Family::Piecewise:
            return {};
    }
    return {};
}

// Breakpoints with implicit (0,0) start; the last entry must be (1,1).
double piecewise_sample(const std::vector<std::pair<double, double>>& bps, double u) {
    double k0 = 0.0, c0 = 0.0;
    for (const auto& [k1, c1] : bps) {
        if (u <= c1 || k1 >= 1.0) {
            if (c1 <= c0) return k1;
            return k0 + (u - c0) / (c1 - c0) * (k1 - k0);
        }
        k0 = k1;
        c0 = c1;
    }
    return 1.0;
}

double piecewise_cdf(const std::vector<std::pair<double, double>>& bps, double t) {
    double k0 = 0.0, c0 = 0.0;
    for (const auto& [k1, c1] : bps) {
        if (t <= k1) {
            if (k1 <= k0) return c1;
            return c0 + (t - k0) / (k1 - k0) * (c1 - c0);
        }
        k0 = k1;
        c0 = c1;
    }
    return 1.0;
}

}  // namespace

DatasetSpec dataset_preset(int which, std::uint64_t n, std::uint64_t seed) {
    DatasetSpec spec;
    spec.n = n;
    spec.seed = seed;
    using K = DatasetComponent::Kind;
    switch (which) {
        case 1:  // smooth heavy skew
            spec.family = DatasetSpec::Family::Lognormal;
            spec.sigma = 2.0;
            break;
        case 2:  // bimodal
            spec.family = DatasetSpec::Family::Mixture;
            spec.components = {{K::Lognormal, 0.5, 0.0, 0.40, 0.0, 1.0},
                               {K::Lognormal, 0.5, 0.55, 1.0, 0.0, 1.0}};
            break;
        case 3:  // three bumps with an empty plateau
            spec.family = DatasetSpec::Family::Mixture;
            spec.components = {{K::Uniform, 0.35, 0.0, 0.20, 0.0, 1.0},
                               {K::Lognormal, 0.30, 0.25, 0.45, 0.0, 1.5},
                               {K::Uniform, 0.35, 0.75, 1.0, 0.0, 1.0}};
            break;
        case 4:  // near-uniform with one jump
            spec.family = DatasetSpec::Family::Piecewise;
            spec.breakpoints = {{0.48, 0.42}, {0.50, 0.70}, {1.0, 1.0}};
            break;
        default:
            throw std::invalid_argument("unknown dataset preset " + std::to_string(which));
    }
    return spec;
}

double spec_cdf(const DatasetSpec& spec, std::uint64_t key) {
    const double t = static_cast<double>(key) / static_cast<double>(spec.key_space_max);
    if (spec.family == DatasetSpec::Family::Piecewise) return piecewise_cdf(spec.breakpoints, t);
    const auto comps = effective_components(spec);
    double wsum = 0.0, acc = 0.0;
    for (const auto& c : comps) {
        wsum += c.weight;
        acc += c.weight * component_cdf(c, t);
    }
    return wsum > 0.0 ? acc / wsum : 0.0;
}

SortedDataset gen_dataset(const DatasetSpec& spec) {
    if (spec.n == 0) throw std::invalid_argument("dataset must contain at least one key");
    if (spec.n > spec.key_space_max) throw std::runtime_error("key space exhausted");

    const auto comps = effective_components(spec);
    double wsum = 0.0;
    for (const auto& c : comps) wsum += c.weight;

    std::mt19937_64 rng(spec.seed);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(spec.n * 2);
    const double span = static_cast<double>(spec.key_space_max);

    for (std::uint64_t i = 0; i < spec.n; ++i) {
        const double u = uniform01(rng);
        double t;
        if (spec.family == DatasetSpec::Family::Piecewise) {
            t = piecewise_sample(spec.breakpoints, u);
        } else {
            // pick a component, then sample within it
            double pick = uniform01(rng) * wsum;
            const DatasetComponent* chosen = &comps.back();
            for (const auto& c : comps) {
                if (pick < c.weight) {
                    chosen = &c;
                    break;
                }
                pick -= c.weight;
            }
            t = component_sample(*chosen, u);
        }
        auto key = static_cast<std::uint64_t>(
            std::clamp(std::floor(t * span + 0.5), 0.0, span));
        while (!seen.insert(key).second) {  // probe to the next free integer
            key = key == spec.key_space_max ? 0 : key + 1;
        }
    }

    SortedDataset data;
    data.keys.assign(seen.begin(), seen.end());
    std::sort(data.keys.begin(), data.keys.end());
    return data;
}

std::vector<std::uint64_t> gen_workload(const WorkloadSpec& spec, const SortedDataset& data) {
    if (data.keys.empty()) throw std::invalid_argument("dataset must be non-empty");
    const std::uint64_t n = data.keys.size();
    std::mt19937_64 rng(spec.seed);
    std::vector<std::uint64_t> queries;
    queries.reserve(spec.num_queries);

    if (spec.kind == WorkloadSpec::Kind::Uniform) {
        for (std::uint64_t q = 0; q < spec.num_queries; ++q) {
            const auto idx = std::min<std::uint64_t>(
                n - 1, static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)));
            queries.push_back(data.keys[idx]);
        }
        return queries;
    }

    if (spec.hot_fraction <= 0.0 || spec.hot_fraction >= 1.0 || spec.hot_prob <= 0.0 ||
        spec.hot_prob >= 1.0)
        throw std::invalid_argument("hot_fraction and hot_prob must lie in (0,1)");

    const std::uint64_t hot_len = std::min<std::uint64_t>(
        n, static_cast<std::uint64_t>(std::ceil(spec.hot_fraction * static_cast<double>(n))));
    const std::uint64_t hot_start = std::min<std::uint64_t>(
        n - hot_len, static_cast<std::uint64_t>(spec.hot_range_start * static_cast<double>(n)));
    const std::uint64_t cold_len = n - hot_len;

    for (std::uint64_t q = 0; q < spec.num_queries; ++q) {
        const double coin = uniform01(rng);
        const double u = uniform01(rng);
        std::uint64_t rank;
        if (coin < spec.hot_prob || cold_len == 0) {
            rank = hot_start + std::min<std::uint64_t>(
                                   hot_len - 1,
                                   static_cast<std::uint64_t>(u * static_cast<double>(hot_len)));
        } else {
            std::uint64_t j = std::min<std::uint64_t>(
                cold_len - 1, static_cast<std::uint64_t>(u * static_cast<double>(cold_len)));
            rank = j < hot_start ? j : j + hot_len;
        }
        queries.push_back(data.keys[rank]);
    }
    return queries;
}

FrequencyHistogram extract_frequencies(std::span<const std::uint64_t> workload,
                                       const SortedDataset& data, double sample_rate) {
    if (!(sample_rate > 0.0) || sample_rate > 1.0)
        throw std::invalid_argument("sample_rate must lie in (0,1]");
    FrequencyHistogram hist;
    hist.counts.assign(data.keys.size(), 0);
    std::mt19937_64 rng(0x5eed5eed5eed5eedULL);
    for (const std::uint64_t q : workload) {
        if (sample_rate < 1.0 && uniform01(rng) >= sample_rate) continue;
        if (const auto pos = data.find(q)) {
            ++hist.counts[*pos];
            ++hist.total;
        } else {
            ++hist.unmatched;
        }
    }
    return hist;
}

std::vector<TrainingPair> dataset_pairs(const SortedDataset& data) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(data.keys.size());
    for (std::size_t i = 0; i < data.keys.size(); ++i)
        pairs.push_back({data.keys[i], static_cast<double>(i)});
    return pairs;
}

void write_u64_file(const std::filesystem::path& path, std::span<const std::uint64_t> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const std::uint64_t v : values) {
        std::uint8_t buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
        out.write(reinterpret_cast<const char*>(buf), 8);
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::uint64_t> read_u64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::vector<std::uint64_t> values;
    std::uint8_t buf[8];
    while (in.read(reinterpret_cast<char*>(buf), 8)) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        values.push_back(v);
    }
    if (in.gcount() != 0) throw std::runtime_error("truncated u64 file: " + path.string());
    return values;
}

void write_u64_text(const std::filesystem::path& path, std::span<const std::uint64_t> values) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const std::uint64_t v : values) out << v << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace doraemon
