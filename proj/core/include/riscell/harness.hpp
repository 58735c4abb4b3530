#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "riscell/dccn.hpp"
#include "riscell/drl.hpp"
#include "riscell/env.hpp"

namespace riscell::harness {

// Experiment description as it appears in the JSON file. Link-budget
// figures keep their dB form here; build_env() resolves them to linear
// units. Defaults reproduce the reference setup end to end.
struct ExperimentConfig {
    std::string scheme = "PSZR";

    std::vector<net::Position> bs_positions{
        {148.24, 201.12}, {107.99, 112.61}, {204.57, 124.73}};
    std::vector<net::Position> user_positions{
        {147.03, 110.94}, {140.98, 161.71}, {188.24, 165.65}, {199.17, 89.26}, {149.17, 141.26}};
    net::Position ris_position{155.0, 140.0};
    int ris_elements = 128;

    double beta0_db = -10.0;
    double kappa_db = 10.0;
    double alpha1 = 2.0;
    double alpha2 = 3.5;
    double alpha3 = 3.5;
    double noise_power_dbm = -80.0;
    double total_bandwidth_hz = 2e7;
    double tx_power_w = 1.0;
    int quant_bits = 3;

    bs::PowerTimingTable power;
    bs::CoverageRadii radii;
    double ris_element_power_w = 1.5e-3;

    double packet_size_mb = 0.05;
    double mean_interarrival_ms = 20.0;

    env::RewardParams reward;  // p_sm1_w auto-resolves to M * micro power
    bool p_sm1_explicit = false;

    std::int64_t t_episode = 200;
    double slot_len_ms = 1.0;
    std::string max_sleep_depth = "deep";
    double pending_norm_bits = 4e6;
    double gain_log_lo = -10.0;
    double gain_log_hi = -2.0;

    drl::PpoConfig ppo;
    drl::DqnConfig dqn;
    dccn::DccnConfig dccn;

    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::int64_t duration = 2000;
    std::string output_dir = "out";

    env::EnvConfig build_env() const;
    // Truncates the user list or extends it with deterministic synthetic
    // positions placed inside the no-zoom ring of a cyclically chosen BS.
    void set_user_count(int n);
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& config);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

// FNV-1a over the canonical serialization, 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct ResultRow {
    std::string scheme;
    std::uint64_t seed = 0;
    std::int64_t slot = 0;
    double cumulative_energy_j = 0.0;
    int active_bs_count = 0;
    double pending_bits = 0.0;
    double worst_delay_ms = 0.0;
    double reward = 0.0;
};

void write_rows_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                    const std::string& hash);
void write_curve_csv(const std::filesystem::path& path, const drl::LearningCurve& curve,
                     const std::string& hash);
void write_delays_csv(const std::filesystem::path& path,
                      const std::vector<traffic::DelayRecord>& records,
                      const std::string& hash);

// Dimensions a checkpoint must agree on to be evaluated under a config.
// Swept traffic parameters may differ; the architecture may not.
struct StructuralSignature {
    std::string scheme;
    int num_bs = 0;
    int num_users = 0;
    int ris_elements = 0;
    int obs_dim = 0;
    std::string max_sleep_depth;

    bool operator==(const StructuralSignature&) const = default;
};

StructuralSignature structural_signature(const ExperimentConfig& config);

struct Manifest {
    std::string scheme;
    std::string hash;
    StructuralSignature structural;
    std::uint64_t train_seed = 0;
    bool has_policy = false;
    bool has_q = false;
    bool has_dccn = false;
};

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& dir);

struct TrainedArtifacts {
    Manifest manifest;
    std::optional<drl::PolicyHeads> policy;
    std::optional<nn::DenseNet> q_net;
    std::optional<dccn::DccnModel> ris_model;
    drl::LearningCurve curve;
};

// Trains whatever the scheme needs (surface model, policy or Q net),
// writes checkpoints + manifest + curve under `dir`, and returns the
// in-memory artifacts. AA trains nothing.
TrainedArtifacts train_scheme(const ExperimentConfig& config, std::uint64_t seed,
                              const std::filesystem::path& dir);

TrainedArtifacts load_artifacts(const ExperimentConfig& config, const std::filesystem::path& dir);

// Per-seed greedy evaluation rollouts of config.duration slots; one row
// per slot. Learned schemes require `artifacts`.
std::vector<ResultRow> run_scheme(const ExperimentConfig& config,
                                  const TrainedArtifacts* artifacts);

struct SweepRow {
    double parameter_value = 0.0;
    std::string scheme;
    std::uint64_t seed = 0;
    double final_energy_j = 0.0;
    double violation_rate = 0.0;
};

enum class SweepParam { PacketSize, MeanInterarrival, UserCount };

SweepParam parse_sweep_param(const std::string& name);
const char* to_string(SweepParam p);

// One run_scheme per value; checkpoints are reused where the structure
// allows and retrained (train_first) where it does not.
std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepParam param,
                            const std::vector<double>& values, bool train_first,
                            const std::filesystem::path& work_dir);

void write_sweep_csv(const std::filesystem::path& path, SweepParam param,
                     const std::vector<SweepRow>& rows, const std::string& hash);

// Root for outputs; the RISCELL_OUT_ROOT environment variable overrides
// the config's output_dir parent.
std::filesystem::path output_root(const ExperimentConfig& config);

// Fast property checks runnable from the CLI; prints one line per check.
bool selftest(std::ostream& out);

double median(std::vector<double> values);

}  // namespace riscell::harness
