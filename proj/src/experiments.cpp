#include "doraemon/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace doraemon {

void Report::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::logic_error("report row width does not match its schema");
    rows.push_back(std::move(row));
}

void write_csv(const Report& report, std::ostream& out) {
    for (std::size_t c = 0; c < report.columns.size(); ++c)
        out << report.columns[c] << (c + 1 < report.columns.size() ? "," : "\n");
    for (const auto& row : report.rows)
        for (std::size_t c = 0; c < row.size(); ++c)
            out << row[c] << (c + 1 < row.size() ? "," : "\n");
}

void write_json(const Report& report, std::ostream& out) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json obj;
        for (std::size_t c = 0; c < row.size(); ++c) obj[report.columns[c]] = row[c];
        j.push_back(std::move(obj));
    }
    out << j.dump(2) << '\n';
}

void write_report(const Report& report, const std::filesystem::path& path,
                  const std::string& format) {
    const bool json = format == "json";
    if (path == "-") {
        json ? write_json(report, std::cout) : write_csv(report, std::cout);
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open report file: " + path.string());
    json ? write_json(report, out) : write_csv(report, out);
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct LatencyStats {
    double mean_ns = 0.0;
    double p99_ns = 0.0;
};

LatencyStats time_queries(const auto& probe, std::span<const std::uint64_t> queries) {
    const std::size_t n = std::min<std::size_t>(queries.size(), 100000);
    std::vector<double> ns(n);
    for (std::size_t i = 0; i < n; ++i) probe(queries[i]);  // warmup
    for (std::size_t i = 0; i < n; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        probe(queries[i]);
        ns[i] = std::chrono::duration<double, std::nano>(std::chrono::steady_clock::now() - t0)
                    .count();
    }
    LatencyStats st;
    for (double v : ns) st.mean_ns += v;
    st.mean_ns /= static_cast<double>(n);
    std::nth_element(ns.begin(), ns.begin() + static_cast<std::ptrdiff_t>(n * 99 / 100), ns.end());
    st.p99_ns = ns[n * 99 / 100];
    return st;
}

struct NamedWorkload {
    std::string name;
    WorkloadSpec spec;
};

std::vector<NamedWorkload> grid_workloads(const ExperimentConfig& cfg) {
    std::vector<NamedWorkload> out;
    for (int i = 0; i < 3; ++i) {
        WorkloadSpec w;
        w.kind = WorkloadSpec::Kind::Skewed;
        w.hot_fraction = 0.05;
        w.hot_prob = 0.95;
        w.hot_range_start = 0.05 + 0.4 * i;
        w.num_queries = cfg.queries;
        w.seed = cfg.seed + 100 + static_cast<std::uint64_t>(i);
        out.push_back({"skewed" + std::to_string(i + 1), w});
    }
    WorkloadSpec u;
    u.kind = WorkloadSpec::Kind::Uniform;
    u.num_queries = cfg.queries;
    u.seed = cfg.seed + 200;
    out.push_back({"uniform", u});
    return out;
}

}  // namespace

double lookup_exactness(const StagedIndex& index, const SortedDataset& data) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.keys.size(); ++i) {
        const auto pos = lookup(index, data, data.keys[i]);
        if (pos && *pos == i) ++hits;
    }
    return data.keys.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(data.size());
}

SortedDataset churn_dataset(const SortedDataset& data, const DatasetSpec& spec, double churn_frac,
                            std::uint64_t seed) {
    const std::size_t n = data.keys.size();
    const auto drop = static_cast<std::size_t>(std::floor(churn_frac * static_cast<double>(n)));
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    std::unordered_set<std::uint64_t> keys;
    keys.reserve(n * 2);
    for (std::size_t i = drop; i < n; ++i) keys.insert(data.keys[order[i]]);

    DatasetSpec fresh = spec;
    fresh.n = drop;
    fresh.seed = seed ^ 0x9e3779b97f4a7c15ULL;
    if (drop > 0) {
        for (std::uint64_t key : gen_dataset(fresh).keys) {
            while (!keys.insert(key).second) key = key == spec.key_space_max ? 0 : key + 1;
        }
    }
    SortedDataset out;
    out.keys.assign(keys.begin(), keys.end());
    std::sort(out.keys.begin(), out.keys.end());
    return out;
}

GridOutput run_grid(const ExperimentConfig& cfg) {
    const CostModel cost = cfg.calibrated ? CostModel::calibrated() : CostModel::deterministic();
    auto space = cfg.search_space;
    if (space.empty()) space = default_search_space(cfg.m);

    GridOutput out;
    out.rows.columns = {"schema",        "dataset",     "workload",       "variant",
                        "arch",          "m",           "cost_proxy",     "search_term",
                        "compute_const", "mean_width",  "weighted_width", "exactness",
                        "build_seconds", "mean_ns",     "p99_ns"};
    out.best.columns = {"schema", "dataset", "workload", "best_arch", "best_m", "cost_proxy"};
    out.leaf_widths.columns = {"schema", "dataset", "arch",      "leaf",
                               "key_lo", "key_hi",  "key_count", "width"};

    for (int d = 1; d <= 4; ++d) {
        const std::string dname = "d" + std::to_string(d);
        const DatasetSpec dspec = dataset_preset(d, cfg.n, cfg.seed + static_cast<std::uint64_t>(d));
        const SortedDataset data = gen_dataset(dspec);
        const auto pairs = dataset_pairs(data);

        struct Trained {
            StagedIndex index;
            double exactness;
            double build_seconds;
        };
        std::vector<Trained> trained;
        for (const auto& [arch, m] : space) {
            TrainConfig tc = cfg.train;
            const auto t0 = std::chrono::steady_clock::now();
            StagedIndex index = train_staged(pairs, arch, m, tc);
            compute_error_bounds(index, data);
            // Wall-clock fields stay zero in deterministic mode so the
            // report is byte-reproducible.
            const double build = cfg.calibrated ? seconds_since(t0) : 0.0;
            const double exact = lookup_exactness(index, data);
            trained.push_back({std::move(index), exact, build});

            // Per-leaf bound widths with key ranges (workload-independent).
            const auto& index_ref = trained.back().index;
            std::vector<std::uint64_t> key_lo(m, 0), key_hi(m, 0);
            std::vector<bool> seen(m, false);
            for (const std::uint64_t key : data.keys) {
                const std::size_t l = route(index_ref, key);
                if (!seen[l]) {
                    key_lo[l] = key_hi[l] = key;
                    seen[l] = true;
                } else {
                    key_hi[l] = key;
                }
            }
            for (std::size_t l = 0; l < m; ++l) {
                if (!seen[l]) continue;
                out.leaf_widths.add_row({"grid-leafwidths-v1", dname, arch.name(),
                                         std::to_string(l), std::to_string(key_lo[l]),
                                         std::to_string(key_hi[l]),
                                         std::to_string(index_ref.leaves[l].key_count),
                                         std::to_string(index_ref.leaves[l].width())});
            }
        }

        for (const auto& [wname, wspec] : grid_workloads(cfg)) {
            const auto queries = gen_workload(wspec, data);
            const auto hist = extract_frequencies(queries, data, cfg.sample_rate);

            double best_cost = std::numeric_limits<double>::infinity();
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < space.size(); ++i) {
                const auto& [arch, m] = space[i];
                const IndexMetrics metrics = index_metrics(trained[i].index, data, &hist, cost);
                LatencyStats lat;
                if (cfg.calibrated) {
                    lat = time_queries(
                        [&](std::uint64_t q) { return lookup(trained[i].index, data, q); },
                        queries);
                }
                out.rows.add_row({"grid-v1", dname, wname, "none", arch.name(),
                                  std::to_string(m), fmt(metrics.cost_proxy),
                                  fmt(metrics.search_term), fmt(metrics.compute_constant),
                                  fmt(metrics.mean_width), fmt(metrics.weighted_width),
                                  fmt(trained[i].exactness), fmt(trained[i].build_seconds),
                                  fmt(lat.mean_ns), fmt(lat.p99_ns)});
                const bool better =
                    metrics.cost_proxy < best_cost ||
                    (metrics.cost_proxy == best_cost &&
                     arch.complexity_rank() < space[best_i].first.complexity_rank());
                if (better) {
                    best_cost = metrics.cost_proxy;
                    best_i = i;
                }
            }
            out.best.add_row({"grid-best-v1", dname, wname, space[best_i].first.name(),
                              std::to_string(space[best_i].second), fmt(best_cost)});

            // Baselines: whole-array binary search and std::map, for context.
            const double full_search = std::log2(static_cast<double>(data.size()));
            LatencyStats bs_lat, map_lat;
            if (cfg.calibrated) {
                bs_lat = time_queries(
                    [&](std::uint64_t q) {
                        return std::lower_bound(data.keys.begin(), data.keys.end(), q) !=
                               data.keys.end();
                    },
                    queries);
                std::map<std::uint64_t, std::uint64_t> ordered;
                for (std::size_t i = 0; i < data.keys.size(); ++i) ordered[data.keys[i]] = i;
                map_lat =
                    time_queries([&](std::uint64_t q) { return ordered.find(q) != ordered.end(); },
                                 queries);
            }
            out.rows.add_row({"grid-v1", dname, wname, "baseline", "BSEARCH", "0",
                              fmt(full_search), fmt(full_search), "0", "0", "0", "1", "0",
                              fmt(bs_lat.mean_ns), fmt(bs_lat.p99_ns)});
            out.rows.add_row({"grid-v1", dname, wname, "baseline", "STDMAP", "0", fmt(full_search),
                              fmt(full_search), "0", "0", "0", "1", "0", fmt(map_lat.mean_ns),
                              fmt(map_lat.p99_ns)});
        }
    }
    return out;
}

Report run_augment_ab(const ExperimentConfig& cfg) {
    const CostModel cost = cfg.calibrated ? CostModel::calibrated() : CostModel::deterministic();
    auto space = cfg.search_space;
    if (space.empty()) space = default_search_space(cfg.m);

    const DatasetSpec dspec = dataset_preset(1, cfg.n, cfg.seed + 1);
    const SortedDataset data = gen_dataset(dspec);
    const auto pairs = dataset_pairs(data);

    WorkloadSpec wspec;
    wspec.kind = WorkloadSpec::Kind::Skewed;
    wspec.hot_fraction = 0.05;
    wspec.hot_prob = 0.95;
    wspec.hot_range_start = 0.45;
    wspec.num_queries = cfg.queries;
    wspec.seed = cfg.seed + 100;
    const auto queries = gen_workload(wspec, data);
    const auto hist = extract_frequencies(queries, data, cfg.sample_rate);

    Report report;
    report.columns = {"schema",     "dataset",        "workload",   "variant",
                      "arch",       "m",              "cost_proxy", "mean_width",
                      "weighted_width", "exactness",  "build_seconds"};

    const auto emit = [&](const std::string& variant, const StagedIndex& index, double build) {
        const IndexMetrics metrics = index_metrics(index, data, &hist, cost);
        report.add_row({"augab-v1", "d1", "skewed", variant, index.arch.name(),
                        std::to_string(index.leaf_count()), fmt(metrics.cost_proxy),
                        fmt(metrics.mean_width), fmt(metrics.weighted_width),
                        fmt(lookup_exactness(index, data)), fmt(build)});
    };

    {  // no augmentation
        const auto t0 = std::chrono::steady_clock::now();
        TuneResult tuned = auto_tune(pairs, space, cfg.train, &hist, cost);
        compute_error_bounds(tuned.index, data);
        emit("none", tuned.index, cfg.calibrated ? seconds_since(t0) : 0.0);
    }
    {  // naive duplication; positions stay integral so no finalize needed
        const auto t0 = std::chrono::steady_clock::now();
        const auto dup_pairs = duplicate_augment(data, hist, cfg.cap);
        TuneResult tuned = auto_tune(dup_pairs, space, cfg.train, nullptr, cost);
        compute_error_bounds(tuned.index, data);
        emit("duplicate", tuned.index, cfg.calibrated ? seconds_since(t0) : 0.0);
    }
    {  // stretch + finalize
        const auto t0 = std::chrono::steady_clock::now();
        const WeightVector w = compute_weights(hist, cfg.cap);
        const StretchedTrainingSet stretched = stretch(data, w);
        TuneResult tuned = auto_tune(stretched.pairs, space, cfg.train, &hist, cost);
        finalize(tuned.index, data);
        emit("stretch", tuned.index, cfg.calibrated ? seconds_since(t0) : 0.0);
    }
    return report;
}

Report run_shift(const ExperimentConfig& cfg) {
    const CostModel cost = cfg.calibrated ? CostModel::calibrated() : CostModel::deterministic();
    ModelCache cache(cfg.cache_dir, cfg.tau);
    CounselorConfig ccfg;
    ccfg.sketch_k = cfg.sketch_k;
    ccfg.search_space = cfg.search_space;
    if (ccfg.search_space.empty()) ccfg.search_space = default_search_space(cfg.m);
    ccfg.train = cfg.train;
    ccfg.cost = cost;

    Report report;
    report.columns = {"schema", "phase",      "provenance",     "seconds",        "exactness",
                      "cost_proxy", "shift_detected", "warm_cold_ratio"};

    const DatasetSpec dspec = dataset_preset(1, cfg.n, cfg.seed + 1);
    const SortedDataset data_a = gen_dataset(dspec);
    const auto pairs_a = dataset_pairs(data_a);

    const auto t0 = std::chrono::steady_clock::now();
    AdviseResult cold = advise(cache, pairs_a, ccfg);
    finalize(cold.index, data_a);
    const double cold_seconds = seconds_since(t0);
    const IndexMetrics cold_metrics = index_metrics(cold.index, data_a, nullptr, cost);
    report.add_row({"shift-v1", "cold",
                    cold.provenance == Provenance::FineTuned ? "fine_tuned" : "auto_tuned",
                    fmt(cold_seconds), fmt(lookup_exactness(cold.index, data_a)),
                    fmt(cold_metrics.cost_proxy), "", ""});

    // 5% key churn from the same generator, then degradation check: the
    // stale index's windowed proxy against the new data.
    const SortedDataset data_b = churn_dataset(data_a, dspec, 0.05, cfg.seed + 77);
    StagedIndex stale = cold.index;
    compute_error_bounds(stale, data_b);
    const IndexMetrics stale_metrics = index_metrics(stale, data_b, nullptr, cost);
    const bool shifted = detect_shift(stale_metrics.cost_proxy, cold_metrics.cost_proxy);

    const auto pairs_b = dataset_pairs(data_b);
    const auto t1 = std::chrono::steady_clock::now();
    AdviseResult warm = advise(cache, pairs_b, ccfg);
    finalize(warm.index, data_b);
    const double warm_seconds = seconds_since(t1);
    const IndexMetrics warm_metrics = index_metrics(warm.index, data_b, nullptr, cost);
    report.add_row({"shift-v1", "warm",
                    warm.provenance == Provenance::FineTuned ? "fine_tuned" : "auto_tuned",
                    fmt(warm_seconds), fmt(lookup_exactness(warm.index, data_b)),
                    fmt(warm_metrics.cost_proxy), shifted ? "1" : "0",
                    fmt(warm_seconds / cold_seconds)});
    return report;
}

}  // namespace doraemon
