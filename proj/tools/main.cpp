// Command-line front end: train policies, evaluate schemes, sweep traffic
// parameters, compare the surface optimizer against brute force, and run
// the built-in property checks.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "riscell/harness.hpp"

namespace {

namespace fs = std::filesystem;
using namespace riscell;

harness::ExperimentConfig config_from(const std::string& path, const std::string& scheme) {
    harness::ExperimentConfig cfg =
        path.empty() ? harness::parse_config("") : harness::load_config(path);
    if (!scheme.empty()) {
        env::parse_scheme(scheme);
        cfg.scheme = scheme;
    }
    return cfg;
}

int cmd_train(const std::string& config_path, const std::string& scheme, std::uint64_t seed,
              const std::string& out) {
    auto cfg = config_from(config_path, scheme);
    const fs::path dir = out.empty() ? harness::output_root(cfg) : fs::path(out);
    const auto art = harness::train_scheme(cfg, seed, dir);
    std::cout << "trained " << cfg.scheme << " (seed " << seed << ") -> " << dir.string() << "\n";
    if (!art.curve.empty()) {
        std::cout << "final smoothed reward: " << art.curve.back().smoothed_reward << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& scheme,
             const std::string& checkpoint, const std::string& out) {
    auto cfg = config_from(config_path, scheme);
    const auto scheme_id = env::parse_scheme(cfg.scheme);

    harness::TrainedArtifacts art;
    const harness::TrainedArtifacts* art_ptr = nullptr;
    if (scheme_id != env::Scheme::AA || env::scheme_uses_ris(scheme_id)) {
        if (checkpoint.empty()) {
            throw ConfigError("eval needs --checkpoint for scheme " + cfg.scheme);
        }
        art = harness::load_artifacts(cfg, checkpoint);
        art_ptr = &art;
    }
    const auto rows = harness::run_scheme(cfg, art_ptr);

    const fs::path dir = out.empty() ? harness::output_root(cfg) : fs::path(out);
    fs::create_directories(dir);
    const auto hash = harness::config_hash(cfg);
    harness::write_rows_csv(dir / ("eval_" + cfg.scheme + ".csv"), rows, hash);

    for (const auto seed : cfg.seeds) {
        double final_energy = 0.0;
        for (const auto& r : rows) {
            if (r.seed == seed) final_energy = r.cumulative_energy_j;
        }
        std::cout << cfg.scheme << " seed " << seed << ": cumulative energy " << final_energy
                  << " J over " << cfg.duration << " slots\n";
    }
    std::cout << "rows written to " << (dir / ("eval_" + cfg.scheme + ".csv")).string() << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& scheme,
              const std::string& param_name, const std::vector<double>& values, bool train_first,
              const std::string& checkpoint_dir, const std::string& out) {
    auto cfg = config_from(config_path, scheme);
    const auto param = harness::parse_sweep_param(param_name);
    const fs::path dir = out.empty() ? harness::output_root(cfg) : fs::path(out);
    fs::create_directories(dir);
    const fs::path work = checkpoint_dir.empty() ? dir : fs::path(checkpoint_dir);

    const auto rows = harness::sweep(cfg, param, values, train_first, work);
    const auto csv = dir / ("sweep_" + param_name + "_" + cfg.scheme + ".csv");
    harness::write_sweep_csv(csv, param, rows, harness::config_hash(cfg));
    std::cout << "sweep rows written to " << csv.string() << "\n";
    return 0;
}

int cmd_oracle(const std::string& config_path, int elements, int bits, int channels,
               const std::string& out) {
    auto cfg = config_from(config_path, "");
    cfg.ris_elements = elements;
    cfg.quant_bits = bits;
    cfg.dccn.capacity_samples = std::max(cfg.dccn.capacity_samples, 500);

    const auto env_cfg = cfg.build_env();
    RandomStream rng(424242);
    std::vector<int> serving(cfg.user_positions.size(), -1);
    for (size_t n = 0; n < cfg.user_positions.size(); ++n) {
        double best = 1e300;
        for (size_t m = 0; m < cfg.bs_positions.size(); ++m) {
            const double d = net::distance(cfg.bs_positions[m], cfg.user_positions[n]);
            if (d <= cfg.radii.zoom_out_m && d < best) {
                best = d;
                serving[n] = static_cast<int>(m);
            }
        }
    }

    std::cout << "training surface optimizer (" << elements << " elements, " << bits
              << "-bit phases)...\n";
    auto model = dccn::train_dccn(env_cfg.geometry, env_cfg.link, serving, cfg.dccn, rng);

    const fs::path path = out.empty() ? fs::path("oracle_ris.csv") : fs::path(out);
    std::ofstream csv(path);
    if (!csv) throw ConfigError("cannot write " + path.string());
    csv << "# config_hash=" << harness::config_hash(cfg) << "\n";
    csv << "channel,oracle_capacity_bps,dccn_capacity_bps,ratio\n";
    csv << std::setprecision(17);

    double ratio_sum = 0.0;
    for (int k = 0; k < channels; ++k) {
        const auto ch = net::sample_channels(env_cfg.geometry, env_cfg.link, true, rng);
        const auto oracle = dccn::exhaustive_phase_oracle(ch, env_cfg.link, serving,
                                                          elements, bits);
        const auto mine = dccn::sum_rate(ch, dccn::infer_phases(model, ch), env_cfg.link, serving);
        const double ratio = oracle.capacity_bps > 0.0 ? mine / oracle.capacity_bps : 1.0;
        ratio_sum += ratio;
        csv << k << ',' << oracle.capacity_bps << ',' << mine << ',' << ratio << "\n";
    }
    std::cout << "mean achieved/optimal ratio over " << channels
              << " channels: " << ratio_sum / std::max(1, channels) << "\n";
    std::cout << "pairs written to " << path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"riscell - sleep-mode / cell-zooming / RIS network simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string scheme;
    std::string out;
    std::string checkpoint;
    std::uint64_t seed = 1;

    auto* train = app.add_subcommand("train", "train the learners for a scheme");
    train->add_option("--config", config_path, "JSON configuration file");
    train->add_option("--scheme", scheme, "scheme override (AA, PZ, PS, PSZ, PSZR, DSZR)");
    train->add_option("--seed", seed, "training seed");
    train->add_option("--out", out, "output directory");

    auto* eval = app.add_subcommand("eval", "evaluate a trained scheme");
    eval->add_option("--config", config_path, "JSON configuration file");
    eval->add_option("--scheme", scheme, "scheme override");
    eval->add_option("--checkpoint", checkpoint, "directory written by train");
    eval->add_option("--out", out, "output directory");

    std::string param_name;
    std::vector<double> values;
    bool train_first = false;
    auto* sweep = app.add_subcommand("sweep", "evaluate across a parameter range");
    sweep->add_option("--config", config_path, "JSON configuration file");
    sweep->add_option("--scheme", scheme, "scheme override");
    sweep->add_option("--param", param_name,
                      "packet_size | mean_interarrival | user_count")->required();
    sweep->add_option("--values", values, "parameter values")->required()->delimiter(',');
    sweep->add_flag("--train", train_first, "train checkpoints before evaluating");
    sweep->add_option("--checkpoint", checkpoint, "checkpoint directory to reuse");
    sweep->add_option("--out", out, "output directory");

    int elements = 4;
    int bits = 1;
    int channels = 100;
    auto* oracle = app.add_subcommand("oracle-ris",
                                      "compare the surface optimizer against brute force");
    oracle->add_option("--config", config_path, "JSON configuration file");
    oracle->add_option("--elements", elements, "surface element count");
    oracle->add_option("--bits", bits, "phase quantization bits");
    oracle->add_option("--channels", channels, "held-out channel count");
    oracle->add_option("--out", out, "CSV output path");

    auto* selftest = app.add_subcommand("selftest", "run the built-in property checks");
    (void)selftest;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("train")) return cmd_train(config_path, scheme, seed, out);
        if (app.got_subcommand("eval")) return cmd_eval(config_path, scheme, checkpoint, out);
        if (app.got_subcommand("sweep")) {
            return cmd_sweep(config_path, scheme, param_name, values, train_first, checkpoint,
                             out);
        }
        if (app.got_subcommand("oracle-ris")) {
            return cmd_oracle(config_path, elements, bits, channels, out);
        }
        if (app.got_subcommand("selftest")) {
            return riscell::harness::selftest(std::cout) ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
