#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riscell/bspower.hpp"
#include "riscell/common.hpp"
#include "riscell/dccn.hpp"
#include "riscell/netmodel.hpp"
#include "riscell/traffic.hpp"

namespace riscell::env {

// AA   always active, no optimization
// PZ   zooming only (policy-optimized)
// PS   sleep modes only, heuristic association
// PSZ  sleep + zooming + association, surface off
// PSZR sleep + zooming + association + surface
// DSZR the PSZR environment driven by the value-based baseline learner
enum class Scheme { AA, PZ, PS, PSZ, PSZR, DSZR };

Scheme parse_scheme(const std::string& name);
const char* to_string(Scheme s);

bool scheme_uses_ris(Scheme s);
bool scheme_sm_free(Scheme s);
bool scheme_zoom_free(Scheme s);
bool scheme_assoc_free(Scheme s);

struct RewardParams {
    double l1 = -1.0;
    double l2 = 2.0;
    double l3 = -20.0;
    double l4 = 1.0;
    double d_max_ms = 10.0;
    double p_sm1_w = 4.5;  // aggregate micro-sleep reference, M * 1.5 W

    void validate() const;
};

// Four-way banded reward: with an empty backlog the slot power is judged
// against the micro-sleep reference, otherwise the worst outstanding
// delay is judged against d_max. Exactly one coefficient fires.
double reward(double slot_power_w, double pending_bits, double worst_delay_ms,
              const RewardParams& params);

struct EnvConfig {
    net::NetworkGeometry geometry;
    net::LinkParams link;
    bs::PowerTimingTable power;
    bs::CoverageRadii radii;
    traffic::TrafficConfig traffic;
    RewardParams reward;
    Scheme scheme = Scheme::PSZR;
    std::int64_t t_episode = 200;
    double slot_len_ms = 1.0;
    bs::SmState max_sleep_depth = bs::SmState::Deep;
    double ris_element_power_w = 1.5e-3;
    // observation encoding
    double pending_norm_bits = 4e6;
    double gain_log_lo = -10.0;
    double gain_log_hi = -2.0;

    void validate() const;
};

struct MdpState {
    double pending_bits = 0.0;
    Eigen::VectorXd channel_features;  // M*N normalized log effective gains
    std::vector<bs::SmState> sm;
    std::int64_t slot = 0;
};

// Factored action. `serving[n]` is the index of user n's BS or -1 for no
// service, which keeps the one-server-per-user constraint structural.
struct MdpAction {
    std::vector<bs::SmState> sm_targets;
    std::vector<bs::ZoomLevel> zooms;
    std::vector<int> serving;

    bool z(int m, int n) const { return serving.at(static_cast<size_t>(n)) == m; }
};

struct StepInfo {
    double slot_energy_j = 0.0;
    int delay_violations = 0;
    std::vector<bs::SmState> modes;
    double worst_delay_ms = 0.0;
    double pending_bits = 0.0;
    int active_bs = 0;
};

struct StepOutcome {
    MdpState next;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

// Legality data for one slot. Zoom and association legality depend on
// the sleep-mode / zoom choices made earlier in the same action, so the
// mask exposes them as functions of those choices.
struct ActionMask {
    int num_bs = 0;
    int num_users = 0;
    std::vector<std::array<bool, bs::kNumSmStates>> sm;
    std::vector<bs::ZoomLevel> current_zoom;
    std::vector<bool> zoom_free;                 // scheme allows zoom choice
    std::vector<bool> assoc_free_user;           // scheme allows association choice
    Eigen::MatrixXd distances;                   // M x N
    bs::CoverageRadii radii;

    std::array<bool, bs::kNumZoomLevels> zoom_allowed(int m, bs::SmState chosen_sm) const;
    // Candidates over {none} + BSs; index 0 = no service, 1 + m = BS m.
    std::vector<bool> assoc_allowed(int n, const std::vector<bs::SmState>& chosen_sm,
                                    const std::vector<bs::ZoomLevel>& chosen_zoom) const;
};

class Environment {
  public:
    explicit Environment(EnvConfig config, const dccn::DccnModel* ris_policy = nullptr);

    MdpState reset(std::uint64_t seed);
    StepOutcome step(const MdpAction& action);

    ActionMask action_mask() const;

    // Nearest covering active BS per user; -1 where none covers.
    std::vector<int> heuristic_association(const std::vector<bs::SmState>& modes,
                                           const std::vector<bs::ZoomLevel>& zooms) const;

    Eigen::VectorXd observe() const;
    int obs_dim() const;

    const MdpState& state() const { return state_; }
    const EnvConfig& config() const { return config_; }
    const std::vector<bs::BsStatus>& statuses() const { return statuses_; }
    const bs::EnergyLedger& ledger() const { return ledger_; }
    const traffic::QueueState& queues() const { return queues_; }
    std::int64_t constraint_violations() const { return constraint_violations_; }

    int num_bs() const { return config_.geometry.num_bs(); }
    int num_users() const { return config_.geometry.num_users(); }

  private:
    void refresh_state_features(const net::ChannelRealization& ch, const net::RisConfig& ris);
    void validate_action(const MdpAction& action) const;

    EnvConfig config_;
    const dccn::DccnModel* ris_policy_ = nullptr;
    RandomStream rng_;
    std::vector<bs::BsStatus> statuses_;
    traffic::QueueState queues_;
    bs::EnergyLedger ledger_;
    MdpState state_;
    std::int64_t next_packet_id_ = 0;
    std::int64_t constraint_violations_ = 0;
};

}  // namespace riscell::env
