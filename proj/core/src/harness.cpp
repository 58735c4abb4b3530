#include "riscell/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

namespace riscell::harness {

using nlohmann::json;

namespace {

bs::SmState parse_depth(const std::string& name) {
    if (name == "micro") return bs::SmState::Micro;
    if (name == "light") return bs::SmState::Light;
    if (name == "deep") return bs::SmState::Deep;
    throw ConfigError("env.max_sleep_depth must be one of micro, light, deep");
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError(path + "." + key + ": " + e.what());
    }
}

std::vector<net::Position> read_positions(const json& j, const char* key,
                                          std::vector<net::Position> fallback,
                                          const std::string& path) {
    if (!j.contains(key)) return fallback;
    std::vector<net::Position> out;
    try {
        for (const auto& pair : j.at(key)) {
            out.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + "." + key + ": " + e.what());
    }
    return out;
}

json positions_json(const std::vector<net::Position>& p) {
    json arr = json::array();
    for (const auto& q : p) arr.push_back({q.x, q.y});
    return arr;
}

}  // namespace

env::EnvConfig ExperimentConfig::build_env() const {
    env::EnvConfig e;
    e.geometry.bs_positions = bs_positions;
    e.geometry.user_positions = user_positions;
    e.geometry.ris_position = ris_position;
    e.geometry.ris_elements = ris_elements;
    e.link.beta0 = db_to_linear(beta0_db);
    e.link.kappa = db_to_linear(kappa_db);
    e.link.alpha1 = alpha1;
    e.link.alpha2 = alpha2;
    e.link.alpha3 = alpha3;
    e.link.noise_power = dbm_to_watts(noise_power_dbm);
    e.link.total_bandwidth = total_bandwidth_hz;
    e.link.tx_power = tx_power_w;
    e.link.quant_bits = quant_bits;
    e.power = power;
    e.radii = radii;
    e.traffic.mean_interarrival_ms = mean_interarrival_ms;
    e.traffic.packet_size_bits = packet_size_mb * 8e6;
    e.reward = reward;
    if (!p_sm1_explicit) {
        e.reward.p_sm1_w = static_cast<double>(bs_positions.size()) * power.micro;
    }
    e.scheme = env::parse_scheme(scheme);
    e.t_episode = t_episode;
    e.slot_len_ms = slot_len_ms;
    e.max_sleep_depth = parse_depth(max_sleep_depth);
    e.ris_element_power_w = ris_element_power_w;
    e.pending_norm_bits = pending_norm_bits;
    e.gain_log_lo = gain_log_lo;
    e.gain_log_hi = gain_log_hi;
    return e;
}

void ExperimentConfig::set_user_count(int n) {
    if (n < 1) throw ConfigError("user count must be >= 1");
    if (n <= static_cast<int>(user_positions.size())) {
        user_positions.resize(static_cast<size_t>(n));
        return;
    }
    const int m = static_cast<int>(bs_positions.size());
    for (int k = static_cast<int>(user_positions.size()); k < n; ++k) {
        RandomStream rng(7700ull + static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const auto& anchor = bs_positions[static_cast<size_t>(k % m)];
        const double radius = 15.0 + 30.0 * unit(rng);
        const double angle = 2.0 * 3.14159265358979323846 * unit(rng);
        user_positions.push_back(
            {anchor.x + radius * std::cos(angle), anchor.y + radius * std::sin(angle)});
    }
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json_text.empty() ? json::object() : json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    ExperimentConfig c;
    read_field(j, "scheme", c.scheme, "config");
    env::parse_scheme(c.scheme);  // reject unknown names early

    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        c.bs_positions = read_positions(g, "bs_positions", c.bs_positions, "geometry");
        c.user_positions = read_positions(g, "user_positions", c.user_positions, "geometry");
        if (g.contains("ris_position")) {
            c.ris_position = {g.at("ris_position").at(0).get<double>(),
                              g.at("ris_position").at(1).get<double>()};
        }
        read_field(g, "ris_elements", c.ris_elements, "geometry");
    }
    if (j.contains("link")) {
        const auto& l = j.at("link");
        read_field(l, "beta0_db", c.beta0_db, "link");
        read_field(l, "kappa_db", c.kappa_db, "link");
        read_field(l, "alpha1", c.alpha1, "link");
        read_field(l, "alpha2", c.alpha2, "link");
        read_field(l, "alpha3", c.alpha3, "link");
        read_field(l, "noise_power_dbm", c.noise_power_dbm, "link");
        read_field(l, "total_bandwidth_hz", c.total_bandwidth_hz, "link");
        read_field(l, "tx_power_w", c.tx_power_w, "link");
        read_field(l, "quant_bits", c.quant_bits, "link");
    }
    if (j.contains("power")) {
        const auto& p = j.at("power");
        read_field(p, "active_zoom_out_w", c.power.active_zoom_out, "power");
        read_field(p, "active_no_zoom_w", c.power.active_no_zoom, "power");
        read_field(p, "active_zoom_in_w", c.power.active_zoom_in, "power");
        read_field(p, "idle_w", c.power.idle, "power");
        read_field(p, "micro_w", c.power.micro, "power");
        read_field(p, "light_w", c.power.light, "power");
        read_field(p, "deep_w", c.power.deep, "power");
        read_field(p, "transition_micro_ms", c.power.transition_micro_ms, "power");
        read_field(p, "transition_light_ms", c.power.transition_light_ms, "power");
        read_field(p, "transition_deep_ms", c.power.transition_deep_ms, "power");
        read_field(p, "hold_micro_ms", c.power.hold_micro_ms, "power");
        read_field(p, "hold_light_ms", c.power.hold_light_ms, "power");
        read_field(p, "hold_deep_ms", c.power.hold_deep_ms, "power");
        read_field(p, "ris_element_power_w", c.ris_element_power_w, "power");
    }
    if (j.contains("zoom_radii")) {
        const auto& z = j.at("zoom_radii");
        read_field(z, "zoom_in_m", c.radii.zoom_in_m, "zoom_radii");
        read_field(z, "no_zoom_m", c.radii.no_zoom_m, "zoom_radii");
        read_field(z, "zoom_out_m", c.radii.zoom_out_m, "zoom_radii");
    }
    if (j.contains("traffic")) {
        const auto& t = j.at("traffic");
        read_field(t, "packet_size_mb", c.packet_size_mb, "traffic");
        read_field(t, "mean_interarrival_ms", c.mean_interarrival_ms, "traffic");
    }
    if (!(c.packet_size_mb > 0.0)) throw ConfigError("traffic.packet_size must be > 0");
    if (!(c.mean_interarrival_ms > 0.0)) throw ConfigError("traffic.mean_interarrival must be > 0");
    if (j.contains("reward")) {
        const auto& r = j.at("reward");
        read_field(r, "l1", c.reward.l1, "reward");
        read_field(r, "l2", c.reward.l2, "reward");
        read_field(r, "l3", c.reward.l3, "reward");
        read_field(r, "l4", c.reward.l4, "reward");
        read_field(r, "d_max_ms", c.reward.d_max_ms, "reward");
        if (r.contains("p_sm1_w")) {
            read_field(r, "p_sm1_w", c.reward.p_sm1_w, "reward");
            c.p_sm1_explicit = true;
        }
    }
    if (j.contains("env")) {
        const auto& e = j.at("env");
        read_field(e, "t_episode", c.t_episode, "env");
        read_field(e, "slot_len_ms", c.slot_len_ms, "env");
        read_field(e, "max_sleep_depth", c.max_sleep_depth, "env");
        read_field(e, "pending_norm_bits", c.pending_norm_bits, "env");
        read_field(e, "gain_log_lo", c.gain_log_lo, "env");
        read_field(e, "gain_log_hi", c.gain_log_hi, "env");
    }
    if (j.contains("ppo")) {
        const auto& p = j.at("ppo");
        read_field(p, "gamma", c.ppo.gamma, "ppo");
        read_field(p, "lambda", c.ppo.lambda, "ppo");
        read_field(p, "clip", c.ppo.clip, "ppo");
        read_field(p, "learning_rate", c.ppo.learning_rate, "ppo");
        read_field(p, "iterations", c.ppo.iterations, "ppo");
        read_field(p, "horizon", c.ppo.horizon, "ppo");
        read_field(p, "minibatch", c.ppo.minibatch, "ppo");
        read_field(p, "epochs", c.ppo.epochs, "ppo");
        read_field(p, "value_coef", c.ppo.value_coef, "ppo");
        read_field(p, "normalize_advantages", c.ppo.normalize_advantages, "ppo");
        read_field(p, "grad_clip", c.ppo.grad_clip, "ppo");
        read_field(p, "hidden", c.ppo.hidden, "ppo");
        read_field(p, "hidden_layers", c.ppo.hidden_layers, "ppo");
    }
    if (j.contains("dqn")) {
        const auto& d = j.at("dqn");
        read_field(d, "gamma", c.dqn.gamma, "dqn");
        read_field(d, "learning_rate", c.dqn.learning_rate, "dqn");
        read_field(d, "iterations", c.dqn.iterations, "dqn");
        read_field(d, "horizon", c.dqn.horizon, "dqn");
        read_field(d, "replay_capacity", c.dqn.replay_capacity, "dqn");
        read_field(d, "minibatch", c.dqn.minibatch, "dqn");
        read_field(d, "update_every", c.dqn.update_every, "dqn");
        read_field(d, "target_sync", c.dqn.target_sync, "dqn");
        read_field(d, "eps_start", c.dqn.eps_start, "dqn");
        read_field(d, "eps_end", c.dqn.eps_end, "dqn");
        read_field(d, "eps_decay_steps", c.dqn.eps_decay_steps, "dqn");
        read_field(d, "grad_clip", c.dqn.grad_clip, "dqn");
        read_field(d, "hidden", c.dqn.hidden, "dqn");
        read_field(d, "hidden_layers", c.dqn.hidden_layers, "dqn");
    }
    if (j.contains("dccn")) {
        const auto& d = j.at("dccn");
        read_field(d, "hidden", c.dccn.hidden, "dccn");
        read_field(d, "hidden_layers", c.dccn.hidden_layers, "dccn");
        read_field(d, "learning_rate", c.dccn.learning_rate, "dccn");
        read_field(d, "capacity_samples", c.dccn.capacity_samples, "dccn");
        read_field(d, "capacity_epochs", c.dccn.capacity_epochs, "dccn");
        read_field(d, "capacity_batch", c.dccn.capacity_batch, "dccn");
        read_field(d, "phase_epochs", c.dccn.phase_epochs, "dccn");
        read_field(d, "phase_batch", c.dccn.phase_batch, "dccn");
        read_field(d, "holdout_fraction", c.dccn.holdout_fraction, "dccn");
    }
    read_field(j, "seeds", c.seeds, "config");
    if (c.seeds.empty()) throw ConfigError("config.seeds must be nonempty");
    read_field(j, "duration", c.duration, "config");
    if (c.duration < 0) throw ConfigError("config.duration must be >= 0");
    read_field(j, "output_dir", c.output_dir, "config");

    c.build_env().validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    const auto resolved = c.build_env();
    json j;
    j["scheme"] = c.scheme;
    j["geometry"] = {{"bs_positions", positions_json(c.bs_positions)},
                     {"user_positions", positions_json(c.user_positions)},
                     {"ris_position", {c.ris_position.x, c.ris_position.y}},
                     {"ris_elements", c.ris_elements}};
    j["link"] = {{"beta0_db", c.beta0_db},
                 {"kappa_db", c.kappa_db},
                 {"alpha1", c.alpha1},
                 {"alpha2", c.alpha2},
                 {"alpha3", c.alpha3},
                 {"noise_power_dbm", c.noise_power_dbm},
                 {"total_bandwidth_hz", c.total_bandwidth_hz},
                 {"tx_power_w", c.tx_power_w},
                 {"quant_bits", c.quant_bits}};
    j["power"] = {{"active_zoom_out_w", c.power.active_zoom_out},
                  {"active_no_zoom_w", c.power.active_no_zoom},
                  {"active_zoom_in_w", c.power.active_zoom_in},
                  {"idle_w", c.power.idle},
                  {"micro_w", c.power.micro},
                  {"light_w", c.power.light},
                  {"deep_w", c.power.deep},
                  {"transition_micro_ms", c.power.transition_micro_ms},
                  {"transition_light_ms", c.power.transition_light_ms},
                  {"transition_deep_ms", c.power.transition_deep_ms},
                  {"hold_micro_ms", c.power.hold_micro_ms},
                  {"hold_light_ms", c.power.hold_light_ms},
                  {"hold_deep_ms", c.power.hold_deep_ms},
                  {"ris_element_power_w", c.ris_element_power_w}};
    j["zoom_radii"] = {{"zoom_in_m", c.radii.zoom_in_m},
                       {"no_zoom_m", c.radii.no_zoom_m},
                       {"zoom_out_m", c.radii.zoom_out_m}};
    j["traffic"] = {{"packet_size_mb", c.packet_size_mb},
                    {"mean_interarrival_ms", c.mean_interarrival_ms}};
    j["reward"] = {{"l1", c.reward.l1},
                   {"l2", c.reward.l2},
                   {"l3", c.reward.l3},
                   {"l4", c.reward.l4},
                   {"d_max_ms", c.reward.d_max_ms},
                   {"p_sm1_w", resolved.reward.p_sm1_w}};
    j["env"] = {{"t_episode", c.t_episode},
                {"slot_len_ms", c.slot_len_ms},
                {"max_sleep_depth", c.max_sleep_depth},
                {"pending_norm_bits", c.pending_norm_bits},
                {"gain_log_lo", c.gain_log_lo},
                {"gain_log_hi", c.gain_log_hi}};
    j["ppo"] = {{"gamma", c.ppo.gamma},
                {"lambda", c.ppo.lambda},
                {"clip", c.ppo.clip},
                {"learning_rate", c.ppo.learning_rate},
                {"iterations", c.ppo.iterations},
                {"horizon", c.ppo.horizon},
                {"minibatch", c.ppo.minibatch},
                {"epochs", c.ppo.epochs},
                {"value_coef", c.ppo.value_coef},
                {"normalize_advantages", c.ppo.normalize_advantages},
                {"grad_clip", c.ppo.grad_clip},
                {"hidden", c.ppo.hidden},
                {"hidden_layers", c.ppo.hidden_layers}};
    j["dqn"] = {{"gamma", c.dqn.gamma},
                {"learning_rate", c.dqn.learning_rate},
                {"iterations", c.dqn.iterations},
                {"horizon", c.dqn.horizon},
                {"replay_capacity", c.dqn.replay_capacity},
                {"minibatch", c.dqn.minibatch},
                {"update_every", c.dqn.update_every},
                {"target_sync", c.dqn.target_sync},
                {"eps_start", c.dqn.eps_start},
                {"eps_end", c.dqn.eps_end},
                {"eps_decay_steps", c.dqn.eps_decay_steps},
                {"grad_clip", c.dqn.grad_clip},
                {"hidden", c.dqn.hidden},
                {"hidden_layers", c.dqn.hidden_layers}};
    j["dccn"] = {{"hidden", c.dccn.hidden},
                 {"hidden_layers", c.dccn.hidden_layers},
                 {"learning_rate", c.dccn.learning_rate},
                 {"capacity_samples", c.dccn.capacity_samples},
                 {"capacity_epochs", c.dccn.capacity_epochs},
                 {"capacity_batch", c.dccn.capacity_batch},
                 {"phase_epochs", c.dccn.phase_epochs},
                 {"phase_batch", c.dccn.phase_batch},
                 {"holdout_fraction", c.dccn.holdout_fraction}};
    j["seeds"] = c.seeds;
    j["duration"] = c.duration;
    j["output_dir"] = c.output_dir;
    return j.dump(2);
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = serialize_config(config);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

void write_rows_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                    const std::string& hash) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "# config_hash=" << hash << "\n";
    out << "scheme,seed,slot,cumulative_energy_j,active_bs_count,pending_bits,"
           "worst_delay_ms,reward\n";
    out << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.scheme << ',' << r.seed << ',' << r.slot << ',' << r.cumulative_energy_j << ','
            << r.active_bs_count << ',' << r.pending_bits << ',' << r.worst_delay_ms << ','
            << r.reward << "\n";
    }
}

void write_curve_csv(const std::filesystem::path& path, const drl::LearningCurve& curve,
                     const std::string& hash) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "# config_hash=" << hash << "\n";
    out << "iteration,raw_reward,smoothed_reward\n";
    out << std::setprecision(17);
    for (const auto& p : curve) {
        out << p.iteration << ',' << p.raw_reward << ',' << p.smoothed_reward << "\n";
    }
}

void write_delays_csv(const std::filesystem::path& path,
                      const std::vector<traffic::DelayRecord>& records,
                      const std::string& hash) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "# config_hash=" << hash << "\n";
    out << "packet_id,user,arrival_slot,delay_ms\n";
    out << std::setprecision(17);
    for (const auto& r : records) {
        out << r.packet_id << ',' << r.user << ',' << r.arrival_slot << ',' << r.delay_ms << "\n";
    }
}

StructuralSignature structural_signature(const ExperimentConfig& config) {
    StructuralSignature s;
    s.scheme = config.scheme;
    s.num_bs = static_cast<int>(config.bs_positions.size());
    s.num_users = static_cast<int>(config.user_positions.size());
    s.ris_elements = config.ris_elements;
    s.obs_dim = 1 + s.num_bs * s.num_users + bs::kNumSmStates * s.num_bs + 1;
    s.max_sleep_depth = config.max_sleep_depth;
    return s;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
    json j;
    j["scheme"] = m.scheme;
    j["config_hash"] = m.hash;
    j["structural"] = {{"scheme", m.structural.scheme},
                       {"num_bs", m.structural.num_bs},
                       {"num_users", m.structural.num_users},
                       {"ris_elements", m.structural.ris_elements},
                       {"obs_dim", m.structural.obs_dim},
                       {"max_sleep_depth", m.structural.max_sleep_depth}};
    j["train_seed"] = m.train_seed;
    j["checkpoints"] = {{"policy", m.has_policy}, {"q", m.has_q}, {"dccn", m.has_dccn}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ConfigError("cannot write manifest under " + dir.string());
    out << j.dump(2) << "\n";
}

Manifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("missing checkpoint manifest in " + dir.string());
    json j;
    in >> j;
    Manifest m;
    m.scheme = j.at("scheme").get<std::string>();
    m.hash = j.at("config_hash").get<std::string>();
    const auto& s = j.at("structural");
    m.structural.scheme = s.at("scheme").get<std::string>();
    m.structural.num_bs = s.at("num_bs").get<int>();
    m.structural.num_users = s.at("num_users").get<int>();
    m.structural.ris_elements = s.at("ris_elements").get<int>();
    m.structural.obs_dim = s.at("obs_dim").get<int>();
    m.structural.max_sleep_depth = s.at("max_sleep_depth").get<std::string>();
    m.train_seed = j.at("train_seed").get<std::uint64_t>();
    m.has_policy = j.at("checkpoints").at("policy").get<bool>();
    m.has_q = j.at("checkpoints").at("q").get<bool>();
    m.has_dccn = j.at("checkpoints").at("dccn").get<bool>();
    return m;
}

namespace {

// Nearest BS whose zoomed-out radius covers the user; the association
// used to label capacity samples for the surface optimizer.
std::vector<int> dccn_training_association(const ExperimentConfig& config) {
    std::vector<int> serving(config.user_positions.size(), -1);
    for (size_t n = 0; n < config.user_positions.size(); ++n) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t m = 0; m < config.bs_positions.size(); ++m) {
            const double d = net::distance(config.bs_positions[m], config.user_positions[n]);
            if (d <= config.radii.zoom_out_m && d < best) {
                best = d;
                serving[n] = static_cast<int>(m);
            }
        }
    }
    return serving;
}

}  // namespace

TrainedArtifacts train_scheme(const ExperimentConfig& config, std::uint64_t seed,
                              const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto scheme = env::parse_scheme(config.scheme);

    TrainedArtifacts art;
    art.manifest.scheme = config.scheme;
    art.manifest.hash = config_hash(config);
    art.manifest.structural = structural_signature(config);
    art.manifest.train_seed = seed;

    if (env::scheme_uses_ris(scheme)) {
        RandomStream rng(seed ^ 0xD0CCull);
        const auto env_cfg = config.build_env();
        art.ris_model = dccn::train_dccn(env_cfg.geometry, env_cfg.link,
                                         dccn_training_association(config), config.dccn, rng);
        dccn::save_model(*art.ris_model, (dir / "dccn").string());
        art.manifest.has_dccn = true;
    }

    if (scheme == env::Scheme::AA) {
        write_manifest(dir, art.manifest);
        return art;
    }

    env::Environment e(config.build_env(), art.ris_model ? &*art.ris_model : nullptr);
    if (scheme == env::Scheme::DSZR) {
        auto result = drl::train_dqn(e, config.dqn, seed);
        nn::save_net(result.q_net, (dir / "q.rnet").string());
        art.q_net = std::move(result.q_net);
        art.curve = std::move(result.curve);
        art.manifest.has_q = true;
    } else {
        auto result = drl::train_ppo(e, config.ppo, seed);
        nn::save_net(result.policy.net, (dir / "policy.rnet").string());
        nn::save_net(result.value_net, (dir / "value.rnet").string());
        art.policy = std::move(result.policy);
        art.curve = std::move(result.curve);
        art.manifest.has_policy = true;
    }
    write_curve_csv(dir / "train_curve.csv", art.curve, art.manifest.hash);
    write_manifest(dir, art.manifest);
    return art;
}

TrainedArtifacts load_artifacts(const ExperimentConfig& config, const std::filesystem::path& dir) {
    TrainedArtifacts art;
    art.manifest = read_manifest(dir);
    const auto want = structural_signature(config);
    if (!(art.manifest.structural == want)) {
        throw ConfigError("checkpoint in " + dir.string() +
                          " was trained for a structurally different configuration");
    }
    if (art.manifest.has_dccn) art.ris_model = dccn::load_model((dir / "dccn").string());
    if (art.manifest.has_policy) {
        drl::PolicyHeads policy;
        policy.net = nn::load_net((dir / "policy.rnet").string());
        policy.layout = drl::HeadLayout{want.num_bs, want.num_users};
        art.policy = std::move(policy);
    }
    if (art.manifest.has_q) art.q_net = nn::load_net((dir / "q.rnet").string());
    return art;
}

std::vector<ResultRow> run_scheme(const ExperimentConfig& config,
                                  const TrainedArtifacts* artifacts) {
    const auto scheme = env::parse_scheme(config.scheme);
    std::unique_ptr<drl::Actor> actor;
    const dccn::DccnModel* ris_model = nullptr;

    if (scheme == env::Scheme::AA) {
        actor = drl::make_pinned_actor();
    } else if (scheme == env::Scheme::DSZR) {
        if (artifacts == nullptr || !artifacts->q_net) {
            throw ConfigError("scheme DSZR needs a trained Q checkpoint");
        }
        actor = drl::make_q_actor(*artifacts->q_net);
    } else {
        if (artifacts == nullptr || !artifacts->policy) {
            throw ConfigError("scheme " + config.scheme + " needs a trained policy checkpoint");
        }
        actor = drl::make_policy_actor(*artifacts->policy);
    }
    if (env::scheme_uses_ris(scheme)) {
        if (artifacts == nullptr || !artifacts->ris_model) {
            throw ConfigError("scheme " + config.scheme + " needs a trained surface model");
        }
        ris_model = &*artifacts->ris_model;
    }

    std::vector<ResultRow> rows;
    rows.reserve(config.seeds.size() * static_cast<size_t>(config.duration));
    for (const auto seed : config.seeds) {
        env::Environment e(config.build_env(), ris_model);
        const auto metrics = drl::evaluate(e, *actor, config.duration, seed, true);
        for (const auto& t : metrics.trace) {
            rows.push_back({config.scheme, seed, t.slot, t.cumulative_energy_j, t.active_bs,
                            t.pending_bits, t.worst_delay_ms, t.reward});
        }
    }
    return rows;
}

SweepParam parse_sweep_param(const std::string& name) {
    if (name == "packet_size") return SweepParam::PacketSize;
    if (name == "mean_interarrival") return SweepParam::MeanInterarrival;
    if (name == "user_count") return SweepParam::UserCount;
    throw ConfigError("unknown sweep parameter '" + name +
                      "' (choices: packet_size, mean_interarrival, user_count)");
}

const char* to_string(SweepParam p) {
    switch (p) {
        case SweepParam::PacketSize: return "packet_size";
        case SweepParam::MeanInterarrival: return "mean_interarrival";
        case SweepParam::UserCount: return "user_count";
    }
    return "?";
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepParam param,
                            const std::vector<double>& values, bool train_first,
                            const std::filesystem::path& work_dir) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    const auto scheme = env::parse_scheme(config.scheme);

    std::vector<std::vector<SweepRow>> per_value(values.size());
    std::vector<std::future<void>> tasks;
    const auto run_value = [&](size_t vi) {
        ExperimentConfig cfg = config;
        switch (param) {
            case SweepParam::PacketSize: cfg.packet_size_mb = values[vi]; break;
            case SweepParam::MeanInterarrival: cfg.mean_interarrival_ms = values[vi]; break;
            case SweepParam::UserCount: cfg.set_user_count(static_cast<int>(values[vi])); break;
        }

        TrainedArtifacts art;
        const TrainedArtifacts* art_ptr = nullptr;
        if (scheme != env::Scheme::AA || env::scheme_uses_ris(scheme)) {
            std::ostringstream name;
            name << "ckpt_" << cfg.scheme << "_" << to_string(param) << "_" << values[vi];
            const auto dir = work_dir / name.str();
            if (train_first || !std::filesystem::exists(dir / "manifest.json")) {
                art = train_scheme(cfg, cfg.seeds.front(), dir);
            } else {
                art = load_artifacts(cfg, dir);
            }
            art_ptr = &art;
        }

        const auto rows = run_scheme(cfg, art_ptr);
        const auto env_cfg = cfg.build_env();
        for (const auto seed : cfg.seeds) {
            double final_energy = 0.0;
            std::int64_t violations = 0;
            std::int64_t slots = 0;
            for (const auto& r : rows) {
                if (r.seed != seed) continue;
                final_energy = r.cumulative_energy_j;
                ++slots;
                if (r.pending_bits > 0.0 && r.worst_delay_ms >= env_cfg.reward.d_max_ms) {
                    ++violations;
                }
            }
            per_value[vi].push_back({values[vi], cfg.scheme, seed, final_energy,
                                     slots > 0 ? static_cast<double>(violations) /
                                                     static_cast<double>(slots)
                                               : 0.0});
        }
    };

    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    for (size_t vi = 0; vi < values.size(); ++vi) {
        if (tasks.size() >= workers) {
            tasks.front().get();
            tasks.erase(tasks.begin());
        }
        tasks.push_back(std::async(std::launch::async, run_value, vi));
    }
    for (auto& t : tasks) t.get();

    std::vector<SweepRow> rows;
    for (const auto& group : per_value) {
        rows.insert(rows.end(), group.begin(), group.end());
    }
    return rows;
}

void write_sweep_csv(const std::filesystem::path& path, SweepParam param,
                     const std::vector<SweepRow>& rows, const std::string& hash) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "# config_hash=" << hash << "\n";
    out << to_string(param) << ",scheme,seed,final_energy_j,violation_rate\n";
    out << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.parameter_value << ',' << r.scheme << ',' << r.seed << ',' << r.final_energy_j
            << ',' << r.violation_rate << "\n";
    }
}

std::filesystem::path output_root(const ExperimentConfig& config) {
    if (const char* root = std::getenv("RISCELL_OUT_ROOT")) {
        return std::filesystem::path(root) / config.output_dir;
    }
    return std::filesystem::path(config.output_dir);
}

double median(std::vector<double> values) {
    if (values.empty()) throw ConfigError("median of an empty set");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace riscell::harness
