#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "doraemon/experiments.hpp"

namespace {

using namespace doraemon;

std::vector<std::pair<ModelArch, std::size_t>> parse_space(const std::string& csv, std::size_t m) {
    if (csv.empty()) return {};
    std::vector<std::pair<ModelArch, std::size_t>> space;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const auto comma = csv.find(',', start);
        const std::string tok = csv.substr(start, comma - start);
        if (!tok.empty()) space.emplace_back(parse_arch(tok), m);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return space;
}

std::filesystem::path default_cache_dir() {
    if (const char* env = std::getenv("DORAEMON_CACHE_DIR")) return env;
    return ".doraemon-cache";
}

void add_experiment_flags(CLI::App* cmd, ExperimentConfig& cfg, std::string& out,
                          std::string& format, std::string& mode, std::string& space) {
    cmd->add_option("--out", out, "Report path, '-' for stdout");
    cmd->add_option("--format", format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--mode", mode, "deterministic (default) or calibrated")
        ->check(CLI::IsMember({"deterministic", "calibrated"}));
    cmd->add_option("--seed", cfg.seed, "Base seed");
    cmd->add_option("--n", cfg.n, "Keys per dataset");
    cmd->add_option("--m", cfg.m, "Leaf models per index");
    cmd->add_option("--queries", cfg.queries, "Queries per workload");
    cmd->add_option("--epochs", cfg.train.epochs, "NN training epochs");
    cmd->add_option("--search-space", space, "Comma-separated archs, e.g. LIN,NN8,NN16");
    cmd->add_option("--k-sketch", cfg.sketch_k, "Quantile sketch length");
    cmd->add_option("--tau", cfg.tau, "Cache similarity threshold");
    cmd->add_option("--cap", cfg.cap, "Stretch weight cap");
    cmd->add_option("--cache-dir", cfg.cache_dir, "Model cache directory");
}

int run(int argc, char** argv) {
    CLI::App app{"Learned range index benchmark harness"};
    app.require_subcommand(1);

    // gen-data
    auto* gen_data = app.add_subcommand("gen-data", "Generate a sorted key file");
    std::string gd_family = "uniform", gd_out, gd_text;
    std::uint64_t gd_n = 0, gd_max = (std::uint64_t{1} << 40), gd_seed = 1;
    double gd_mu = 0.0, gd_sigma = 1.0;
    int gd_preset = 0;
    gen_data->add_option("--family", gd_family, "uniform or lognormal")
        ->check(CLI::IsMember({"uniform", "lognormal"}));
    gen_data->add_option("--preset", gd_preset, "Dataset preset 1..4 (overrides --family)");
    gen_data->add_option("--n", gd_n, "Number of keys")->required();
    gen_data->add_option("--max", gd_max, "Key space upper bound");
    gen_data->add_option("--seed", gd_seed, "Seed");
    gen_data->add_option("--mu", gd_mu, "Lognormal mu");
    gen_data->add_option("--sigma", gd_sigma, "Lognormal sigma");
    gen_data->add_option("--out", gd_out, "Output .keys file")->required();
    gen_data->add_option("--text", gd_text, "Also write decimal-per-line text");

    // gen-workload
    auto* gen_wl = app.add_subcommand("gen-workload", "Generate a query file for a key file");
    std::string gw_kind = "uniform", gw_data, gw_out, gw_text;
    std::uint64_t gw_queries = 0, gw_seed = 1;
    double gw_hot_frac = 0.05, gw_hot_prob = 0.95, gw_hot_start = 0.0;
    gen_wl->add_option("--kind", gw_kind, "uniform or skewed")
        ->check(CLI::IsMember({"uniform", "skewed"}));
    gen_wl->add_option("--data", gw_data, "Input .keys file")->required();
    gen_wl->add_option("--queries", gw_queries, "Number of queries")->required();
    gen_wl->add_option("--seed", gw_seed, "Seed");
    gen_wl->add_option("--hot-frac", gw_hot_frac, "Hot key fraction");
    gen_wl->add_option("--hot-prob", gw_hot_prob, "Hot query probability");
    gen_wl->add_option("--hot-start", gw_hot_start, "Hot range start (rank fraction)");
    gen_wl->add_option("--out", gw_out, "Output .qry file")->required();
    gen_wl->add_option("--text", gw_text, "Also write decimal-per-line text");

    ExperimentConfig cfg;
    cfg.cache_dir = default_cache_dir();
    std::string out = "-", format = "csv", mode = "deterministic", space;

    auto* grid = app.add_subcommand("grid", "Architecture grid over presets and workloads");
    add_experiment_flags(grid, cfg, out, format, mode, space);
    auto* augab = app.add_subcommand("augment-ab", "none vs duplicate vs stretch comparison");
    add_experiment_flags(augab, cfg, out, format, mode, space);
    auto* shift = app.add_subcommand("shift", "Cold build, churn, detect, warm rebuild");
    add_experiment_flags(shift, cfg, out, format, mode, space);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (gen_data->parsed()) {
        DatasetSpec spec;
        if (gd_preset != 0) {
            spec = dataset_preset(gd_preset, gd_n, gd_seed);
        } else {
            spec.family = gd_family == "lognormal" ? DatasetSpec::Family::Lognormal
                                                   : DatasetSpec::Family::Uniform;
            spec.mu = gd_mu;
            spec.sigma = gd_sigma;
            spec.n = gd_n;
            spec.seed = gd_seed;
        }
        spec.key_space_max = gd_max;
        const SortedDataset data = gen_dataset(spec);
        write_u64_file(gd_out, data.keys);
        if (!gd_text.empty()) write_u64_text(gd_text, data.keys);
        std::cerr << "wrote " << data.size() << " keys to " << gd_out << "\n";
        return 0;
    }

    if (gen_wl->parsed()) {
        SortedDataset data;
        data.keys = read_u64_file(gw_data);
        WorkloadSpec spec;
        spec.kind = gw_kind == "skewed" ? WorkloadSpec::Kind::Skewed : WorkloadSpec::Kind::Uniform;
        spec.hot_fraction = gw_hot_frac;
        spec.hot_prob = gw_hot_prob;
        spec.hot_range_start = gw_hot_start;
        spec.num_queries = gw_queries;
        spec.seed = gw_seed;
        const auto queries = gen_workload(spec, data);
        write_u64_file(gw_out, queries);
        if (!gw_text.empty()) write_u64_text(gw_text, queries);
        std::cerr << "wrote " << queries.size() << " queries to " << gw_out << "\n";
        return 0;
    }

    cfg.calibrated = mode == "calibrated";
    cfg.search_space = parse_space(space, cfg.m);

    if (grid->parsed()) {
        const GridOutput result = run_grid(cfg);
        write_report(result.rows, out, format);
        if (out != "-") {
            write_report(result.best, std::filesystem::path(out).concat(".best"), format);
            write_report(result.leaf_widths, std::filesystem::path(out).concat(".leafwidths"),
                         format);
        }
        return 0;
    }
    if (augab->parsed()) {
        write_report(run_augment_ab(cfg), out, format);
        return 0;
    }
    if (shift->parsed()) {
        write_report(run_shift(cfg), out, format);
        return 0;
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
