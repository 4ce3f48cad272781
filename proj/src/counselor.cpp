#include "doraemon/counselor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace doraemon {

DistributionSketch analyze(std::span<const TrainingPair> pairs, std::size_t K) {
    if (K < 2) throw std::invalid_argument("sketch size must be at least 2");
    if (K > pairs.size()) throw std::runtime_error("sample larger than population");
    const std::uint64_t key_min = pairs.front().key;
    const std::uint64_t key_max = pairs.back().key;
    const double denom =
        key_max > key_min ? static_cast<double>(key_max) - static_cast<double>(key_min) : 1.0;
    DistributionSketch sketch;
    sketch.quantile_keys.reserve(K);
    const std::size_t n = pairs.size();
    for (std::size_t i = 0; i < K; ++i) {
        const std::size_t rank = i * n / K;
        sketch.quantile_keys.push_back(
            (static_cast<double>(pairs[rank].key) - static_cast<double>(key_min)) / denom);
    }
    return sketch;
}

double sketch_mse(const DistributionSketch& a, const DistributionSketch& b) {
    if (a.k() != b.k()) throw std::invalid_argument("sketch sizes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.k(); ++i) {
        const double d = a.quantile_keys[i] - b.quantile_keys[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.k());
}

// ---- cache persistence ---------------------------------------------------

namespace {

constexpr char kManifestName[] = "manifest.json";

void write_entry_file(const std::filesystem::path& path, const CacheEntry& entry) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache entry: " + path.string());
    const char magic[4] = {'D', 'R', 'S', 'K'};
    out.write(magic, 4);
    const auto k = static_cast<std::uint32_t>(entry.sketch.k());
    out.write(reinterpret_cast<const char*>(&k), 4);
    out.write(reinterpret_cast<const char*>(entry.sketch.quantile_keys.data()),
              static_cast<std::streamsize>(k * sizeof(double)));
    out.write(reinterpret_cast<const char*>(entry.blob.data()),
              static_cast<std::streamsize>(entry.blob.size()));
    if (!out) throw std::runtime_error("cache entry write failed: " + path.string());
}

std::vector<std::uint8_t> read_entry_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read cache entry: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != "DRSK")
        throw std::runtime_error("bad cache entry header: " + path.string());
    std::uint32_t k = 0;
    in.read(reinterpret_cast<char*>(&k), 4);
    in.seekg(static_cast<std::streamoff>(k) * static_cast<std::streamoff>(sizeof(double)),
             std::ios::cur);
    std::vector<std::uint8_t> blob(std::istreambuf_iterator<char>(in), {});
    if (blob.empty()) throw std::runtime_error("empty cache entry blob: " + path.string());
    return blob;
}

}  // namespace

ModelCache::ModelCache(std::filesystem::path dir, double tau, std::size_t capacity)
    : dir_(std::move(dir)), tau_(tau), capacity_(std::max<std::size_t>(1, capacity)) {
    std::filesystem::create_directories(dir_);
    load_manifest();
}

void ModelCache::load_manifest() {
    const auto path = dir_ / kManifestName;
    std::ifstream in(path);
    if (!in) return;  // fresh cache
    nlohmann::json j;
    in >> j;
    next_id_ = j.value("next_id", std::uint64_t{0});
    for (const auto& je : j.at("entries")) {
        CacheEntry e;
        e.id = je.at("id").get<std::string>();
        e.sketch.quantile_keys = je.at("sketch").get<std::vector<double>>();
        e.arch = parse_arch(je.at("arch").get<std::string>());
        e.m = je.at("m").get<std::size_t>();
        e.train_loss = je.value("train_loss", 0.0);
        e.created_at = je.value("created_at", std::int64_t{0});
        entries_.push_back(std::move(e));
    }
    lru_ = j.at("lru").get<std::vector<std::string>>();
}

void ModelCache::save_manifest() const {
    nlohmann::json j;
    j["version"] = 1;
    j["next_id"] = next_id_;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries_) {
        j["entries"].push_back({{"id", e.id},
                                {"sketch", e.sketch.quantile_keys},
                                {"arch", e.arch.name()},
                                {"m", e.m},
                                {"train_loss", e.train_loss},
                                {"created_at", e.created_at}});
    }
    j["lru"] = lru_;
    std::ofstream out(dir_ / kManifestName, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache manifest in " + dir_.string());
    out << j.dump(2) << '\n';
}

std::pair<const CacheEntry*, double> ModelCache::lookup(const DistributionSketch& sketch) {
    const CacheEntry* best = nullptr;
    double best_mse = std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) {
        if (e.sketch.k() != sketch.k()) continue;
        const double mse = sketch_mse(e.sketch, sketch);
        if (mse < best_mse) {
            best_mse = mse;
            best = &e;
        }
    }
    if (best) {
        // refresh recency
        auto it = std::find(lru_.begin(), lru_.end(), best->id);
        if (it != lru_.end()) lru_.erase(it);
        lru_.insert(lru_.begin(), best->id);
        save_manifest();
    }
    return {best, best_mse};
}

void ModelCache::insert(CacheEntry entry) {
    if (entry.id.empty()) entry.id = "entry-" + std::to_string(next_id_++);
    if (entry.created_at == 0)
        entry.created_at = std::chrono::duration_cast<std::chrono::seconds>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count();
    write_entry_file(dir_ / (entry.id + ".drmi"), entry);
    lru_.insert(lru_.begin(), entry.id);
    entries_.push_back(std::move(entry));

    while (entries_.size() > capacity_ && !lru_.empty()) {
        const std::string victim = lru_.back();
        lru_.pop_back();
        auto it = std::find_if(entries_.begin(), entries_.end(),
                               [&](const CacheEntry& e) { return e.id == victim; });
        if (it != entries_.end()) {
            std::error_code ec;
            std::filesystem::remove(dir_ / (victim + ".drmi"), ec);
            entries_.erase(it);
        }
    }
    save_manifest();
}

const std::vector<std::uint8_t>& ModelCache::blob(const CacheEntry& entry) {
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const CacheEntry& e) { return e.id == entry.id; });
    if (it == entries_.end()) throw std::runtime_error("unknown cache entry: " + entry.id);
    if (it->blob.empty()) it->blob = read_entry_blob(dir_ / (it->id + ".drmi"));
    return it->blob;
}

std::vector<std::string> ModelCache::recency_order() const { return lru_; }

// ---- tuning --------------------------------------------------------------

std::vector<std::pair<ModelArch, std::size_t>> default_search_space(std::size_t m) {
    return {{ModelArch::linear(), m},  {ModelArch::nn(1, 4), m},  {ModelArch::nn(1, 8), m},
            {ModelArch::nn(1, 16), m}, {ModelArch::nn(2, 4), m}, {ModelArch::nn(2, 8), m}};
}

namespace {

bool candidate_beats(const TuneCandidate& a, const TuneCandidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.arch.complexity_rank() != b.arch.complexity_rank())
        return a.arch.complexity_rank() < b.arch.complexity_rank();
    return a.m < b.m;
}

}  // namespace

TuneResult auto_tune(std::span<const TrainingPair> pairs,
                     std::span<const std::pair<ModelArch, std::size_t>> search_space,
                     const TrainConfig& cfg, const FrequencyHistogram* probe,
                     const CostModel& cost) {
    if (search_space.empty()) throw std::invalid_argument("empty search space");
    TuneResult result;
    bool have_best = false;
    TuneCandidate best_cand;
    for (const auto& [arch, m] : search_space) {
        TuneCandidate cand;
        cand.arch = arch;
        cand.m = m;
        try {
            StagedIndex index = train_staged(pairs, arch, m, cfg);
            cand.metrics = index_metrics(index, pairs, probe, cost);
            cand.cost = cand.metrics.cost_proxy;
            if (!have_best || candidate_beats(cand, best_cand)) {
                have_best = true;
                best_cand = cand;
                result.index = std::move(index);
            }
        } catch (const std::runtime_error&) {  // diverged candidate
            cand.failed = true;
            cand.cost = std::numeric_limits<double>::infinity();
        }
        result.table.push_back(std::move(cand));
    }
    if (!have_best) throw std::runtime_error("all tuning candidates failed");
    result.best_arch = best_cand.arch;
    result.best_m = best_cand.m;
    return result;
}

AdviseResult advise(ModelCache& cache, std::span<const TrainingPair> pairs,
                    const CounselorConfig& cfg) {
    const DistributionSketch sketch = analyze(pairs, cfg.sketch_k);
    auto [entry, mse] = cache.lookup(sketch);

    if (entry && mse <= cache.tau()) {
        const StagedIndex cached = deserialize_index(cache.blob(*entry));

        StagedIndex index;
        index.arch = cached.arch;
        index.leaves.resize(cached.leaves.size());
        index.n_keys = pairs.size();
        index.key_min = pairs.front().key;
        index.key_max = pairs.back().key;
        index.pos_scale = std::max(1.0, pairs.back().position);

        std::vector<Sample> root_samples;
        root_samples.reserve(pairs.size());
        for (const auto& p : pairs)
            root_samples.push_back({index.normalize_key(p.key), p.position / index.pos_scale});

        if (cached.arch.is_linear()) {
            // closed-form refit is the exact fine-tune for a linear root
            index.root = fine_tune(std::get<LinearModel>(cached.root), root_samples);
        } else {
            index.root = fine_tune(std::get<NeuralNet>(cached.root), root_samples, cfg.train).net;
        }
        refit_leaves(index, pairs);
        return {std::move(index), Provenance::FineTuned, mse};
    }

    std::vector<std::pair<ModelArch, std::size_t>> space(cfg.search_space.begin(),
                                                         cfg.search_space.end());
    if (space.empty())
        space = default_search_space(std::max<std::size_t>(1, pairs.size() / 1000));
    TuneResult tuned = auto_tune(pairs, space, cfg.train, cfg.probe, cfg.cost);

    CacheEntry entry_out;
    entry_out.sketch = sketch;
    entry_out.arch = tuned.best_arch;
    entry_out.m = tuned.best_m;
    entry_out.blob = serialize_index(tuned.index);
    for (const auto& c : tuned.table) {
        if (!c.failed && c.arch == tuned.best_arch && c.m == tuned.best_m)
            entry_out.train_loss = c.metrics.cost_proxy;
    }
    cache.insert(std::move(entry_out));
    return {std::move(tuned.index), Provenance::AutoTuned, mse};
}

bool detect_shift(double recent_cost, double baseline_cost, double ratio) {
    return recent_cost > ratio * baseline_cost;
}

}  // namespace doraemon
