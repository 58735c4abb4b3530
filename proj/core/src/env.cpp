#include "riscell/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace riscell::env {

Scheme parse_scheme(const std::string& name) {
    if (name == "AA") return Scheme::AA;
    if (name == "PZ") return Scheme::PZ;
    if (name == "PS") return Scheme::PS;
    if (name == "PSZ") return Scheme::PSZ;
    if (name == "PSZR") return Scheme::PSZR;
    if (name == "DSZR") return Scheme::DSZR;
    throw ConfigError("unknown scheme '" + name + "' (choices: AA, PZ, PS, PSZ, PSZR, DSZR)");
}

const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::AA: return "AA";
        case Scheme::PZ: return "PZ";
        case Scheme::PS: return "PS";
        case Scheme::PSZ: return "PSZ";
        case Scheme::PSZR: return "PSZR";
        case Scheme::DSZR: return "DSZR";
    }
    return "?";
}

bool scheme_uses_ris(Scheme s) { return s == Scheme::PSZR || s == Scheme::DSZR; }

bool scheme_sm_free(Scheme s) {
    return s == Scheme::PS || s == Scheme::PSZ || s == Scheme::PSZR || s == Scheme::DSZR;
}

bool scheme_zoom_free(Scheme s) {
    return s == Scheme::PZ || s == Scheme::PSZ || s == Scheme::PSZR || s == Scheme::DSZR;
}

bool scheme_assoc_free(Scheme s) {
    return s == Scheme::PZ || s == Scheme::PSZ || s == Scheme::PSZR;
}

void RewardParams::validate() const {
    if (!(d_max_ms > 0.0)) throw ConfigError("reward.d_max must be > 0");
    if (!(p_sm1_w > 0.0)) throw ConfigError("reward.p_sm1 must be > 0");
    // The delay pair must carry the dominating coefficient.
    const double delay_w = std::max(std::abs(l3), std::abs(l4));
    const double energy_w = std::max(std::abs(l1), std::abs(l2));
    if (!(delay_w > energy_w)) {
        throw ConfigError("reward: delay coefficients must outweigh energy coefficients");
    }
}

double reward(double slot_power_w, double pending_bits, double worst_delay_ms,
              const RewardParams& params) {
    if (pending_bits <= 0.0) {
        return slot_power_w >= params.p_sm1_w ? params.l1 : params.l2;
    }
    return worst_delay_ms >= params.d_max_ms ? params.l3 : params.l4;
}

void EnvConfig::validate() const {
    geometry.validate();
    link.validate();
    power.validate();
    traffic.validate();
    reward.validate();
    if (t_episode < 1) throw ConfigError("env.t_episode must be >= 1");
    if (!(slot_len_ms > 0.0)) throw ConfigError("env.slot_len must be > 0");
    if (!(pending_norm_bits > 0.0)) throw ConfigError("env.pending_norm must be > 0");
    if (!(gain_log_hi > gain_log_lo)) throw ConfigError("env.gain_log range is empty");
    if (max_sleep_depth == bs::SmState::Active || max_sleep_depth == bs::SmState::Idle) {
        throw ConfigError("env.max_sleep_depth must name a sleep state");
    }
}

std::array<bool, bs::kNumZoomLevels> ActionMask::zoom_allowed(int m, bs::SmState chosen_sm) const {
    std::array<bool, bs::kNumZoomLevels> out{false, false, false};
    if (chosen_sm == bs::SmState::Active && zoom_free.at(static_cast<size_t>(m))) {
        out.fill(true);
    } else {
        out[static_cast<size_t>(current_zoom.at(static_cast<size_t>(m)))] = true;
    }
    return out;
}

std::vector<bool> ActionMask::assoc_allowed(int n, const std::vector<bs::SmState>& chosen_sm,
                                            const std::vector<bs::ZoomLevel>& chosen_zoom) const {
    std::vector<bool> out(static_cast<size_t>(num_bs) + 1, false);
    out[0] = true;  // no service is always available
    for (int m = 0; m < num_bs; ++m) {
        if (chosen_sm[static_cast<size_t>(m)] != bs::SmState::Active) continue;
        const double radius = bs::coverage_radius(radii, chosen_zoom[static_cast<size_t>(m)]);
        if (distances(m, n) <= radius) out[static_cast<size_t>(m) + 1] = true;
    }
    return out;
}

Environment::Environment(EnvConfig config, const dccn::DccnModel* ris_policy)
    : config_(std::move(config)), ris_policy_(ris_policy), rng_(0) {
    config_.validate();
    if (scheme_uses_ris(config_.scheme) && ris_policy_ != nullptr &&
        ris_policy_->ris_elements != config_.geometry.ris_elements) {
        throw DimensionError("RIS policy was trained for a different element count");
    }
    reset(0);
}

MdpState Environment::reset(std::uint64_t seed) {
    rng_.seed(seed);
    statuses_.assign(static_cast<size_t>(num_bs()), bs::BsStatus{});
    queues_ = traffic::QueueState(num_users());
    ledger_ = bs::EnergyLedger(num_bs());
    next_packet_id_ = 0;
    constraint_violations_ = 0;

    state_.pending_bits = 0.0;
    state_.sm.assign(static_cast<size_t>(num_bs()), bs::SmState::Active);
    state_.slot = 0;

    const bool with_ris = scheme_uses_ris(config_.scheme);
    const auto ch = net::sample_channels(config_.geometry, config_.link, with_ris, rng_);
    const auto ris = with_ris ? net::RisConfig::zeros(config_.geometry.ris_elements)
                              : net::RisConfig::disabled(config_.geometry.ris_elements);
    refresh_state_features(ch, ris);
    return state_;
}

void Environment::refresh_state_features(const net::ChannelRealization& ch,
                                         const net::RisConfig& ris) {
    const int m = num_bs();
    const int n = num_users();
    state_.channel_features.resize(m * n);
    const double lo = config_.gain_log_lo;
    const double hi = config_.gain_log_hi;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto eff = net::compose_effective_channel(ch.direct(i, j), ch.bs_to_ris.col(i),
                                                            ch.ris_to_user.row(j).transpose(), ris);
            const double gain_log = std::log10(std::norm(eff) + 1e-30);
            const double unit = 2.0 * (std::clamp(gain_log, lo, hi) - lo) / (hi - lo) - 1.0;
            state_.channel_features(i * n + j) = unit;
        }
    }
}

ActionMask Environment::action_mask() const {
    ActionMask mask;
    mask.num_bs = num_bs();
    mask.num_users = num_users();
    mask.radii = config_.radii;
    mask.sm.resize(static_cast<size_t>(num_bs()));
    mask.current_zoom.resize(static_cast<size_t>(num_bs()));
    mask.zoom_free.assign(static_cast<size_t>(num_bs()), scheme_zoom_free(config_.scheme));
    mask.assoc_free_user.assign(static_cast<size_t>(num_users()),
                                scheme_assoc_free(config_.scheme));
    const int max_depth = static_cast<int>(config_.max_sleep_depth);

    for (int m = 0; m < num_bs(); ++m) {
        const auto& st = statuses_[static_cast<size_t>(m)];
        auto& allowed = mask.sm[static_cast<size_t>(m)];
        allowed.fill(false);
        if (st.in_transition() || !scheme_sm_free(config_.scheme)) {
            // Mid-transition or sleep-masked schemes: stay put.
            allowed[static_cast<size_t>(st.mode)] = true;
        } else {
            for (const auto target : bs::legal_targets(st)) {
                if (static_cast<int>(target) <= max_depth) {
                    allowed[static_cast<size_t>(target)] = true;
                }
            }
        }
        mask.current_zoom[static_cast<size_t>(m)] = st.zoom;
    }

    mask.distances.resize(num_bs(), num_users());
    for (int m = 0; m < num_bs(); ++m) {
        for (int n = 0; n < num_users(); ++n) {
            mask.distances(m, n) = net::distance(config_.geometry.bs_positions[static_cast<size_t>(m)],
                                                 config_.geometry.user_positions[static_cast<size_t>(n)]);
        }
    }
    return mask;
}

std::vector<int> Environment::heuristic_association(const std::vector<bs::SmState>& modes,
                                                    const std::vector<bs::ZoomLevel>& zooms) const {
    std::vector<int> serving(static_cast<size_t>(num_users()), -1);
    for (int n = 0; n < num_users(); ++n) {
        double best = std::numeric_limits<double>::infinity();
        for (int m = 0; m < num_bs(); ++m) {
            if (modes[static_cast<size_t>(m)] != bs::SmState::Active) continue;
            if (statuses_[static_cast<size_t>(m)].in_transition()) continue;
            const double d = net::distance(config_.geometry.bs_positions[static_cast<size_t>(m)],
                                           config_.geometry.user_positions[static_cast<size_t>(n)]);
            if (d <= bs::coverage_radius(config_.radii, zooms[static_cast<size_t>(m)]) && d < best) {
                best = d;
                serving[static_cast<size_t>(n)] = m;
            }
        }
    }
    return serving;
}

void Environment::validate_action(const MdpAction& action) const {
    const auto m = static_cast<size_t>(num_bs());
    const auto n = static_cast<size_t>(num_users());
    if (action.sm_targets.size() != m || action.zooms.size() != m || action.serving.size() != n) {
        throw DimensionError("action does not match the network size");
    }
    const auto mask = action_mask();
    for (int i = 0; i < num_bs(); ++i) {
        if (!mask.sm[static_cast<size_t>(i)][static_cast<size_t>(action.sm_targets[static_cast<size_t>(i)])]) {
            throw ConstraintError(std::string("masked sleep-mode target for BS ") +
                                  std::to_string(i));
        }
        if (!mask.zoom_allowed(i, action.sm_targets[static_cast<size_t>(i)])
                 [static_cast<size_t>(action.zooms[static_cast<size_t>(i)])]) {
            throw ConstraintError(std::string("masked zoom level for BS ") + std::to_string(i));
        }
    }
    for (int u = 0; u < num_users(); ++u) {
        const int server = action.serving[static_cast<size_t>(u)];
        if (server < -1 || server >= num_bs()) {
            throw ConstraintError("association index out of range");
        }
        if (server >= 0) {
            const auto allowed = mask.assoc_allowed(u, action.sm_targets, action.zooms);
            if (!allowed[static_cast<size_t>(server) + 1]) {
                throw ConstraintError(std::string("user ") + std::to_string(u) +
                                      " associated outside coverage or to a non-active BS");
            }
        }
    }
}

StepOutcome Environment::step(const MdpAction& action) {
    try {
        validate_action(action);
    } catch (const std::exception&) {
        ++constraint_violations_;
        throw;
    }

    // (1) sleep-mode transitions and zoom changes
    for (int m = 0; m < num_bs(); ++m) {
        auto& st = statuses_[static_cast<size_t>(m)];
        const auto target = action.sm_targets[static_cast<size_t>(m)];
        if (!st.in_transition() && target != st.mode) {
            st = bs::begin_transition(st, target, config_.power);
        }
        if (st.mode == bs::SmState::Active && !st.in_transition()) {
            st.zoom = action.zooms[static_cast<size_t>(m)];
        }
    }

    // (2) fresh fading draw for this slot
    const bool with_ris = scheme_uses_ris(config_.scheme);
    const auto ch = net::sample_channels(config_.geometry, config_.link, with_ris, rng_);

    // (3) surface configuration
    net::RisConfig ris = net::RisConfig::disabled(config_.geometry.ris_elements);
    if (with_ris) {
        ris = ris_policy_ != nullptr ? dccn::infer_phases(*ris_policy_, ch)
                                     : net::RisConfig::zeros(config_.geometry.ris_elements);
    }

    // (4) per-link rates for the associated pairs
    std::vector<int> served_count(static_cast<size_t>(num_bs()), 0);
    for (int u = 0; u < num_users(); ++u) {
        const int server = action.serving[static_cast<size_t>(u)];
        if (server >= 0) ++served_count[static_cast<size_t>(server)];
    }
    std::vector<double> rate_bps(static_cast<size_t>(num_users()), 0.0);
    for (int u = 0; u < num_users(); ++u) {
        const int m = action.serving[static_cast<size_t>(u)];
        if (m < 0) continue;
        const auto& st = statuses_[static_cast<size_t>(m)];
        if (st.mode != bs::SmState::Active || st.in_transition()) continue;
        const auto eff = net::compose_effective_channel(ch.direct(m, u), ch.bs_to_ris.col(m),
                                                        ch.ris_to_user.row(u).transpose(), ris);
        const double bw = config_.link.total_bandwidth /
                          static_cast<double>(served_count[static_cast<size_t>(m)]);
        rate_bps[static_cast<size_t>(u)] = net::link_rate(net::snr(eff, config_.link), bw);
    }

    // (5) arrivals, then service
    queues_.begin_slot();
    const auto arrivals = traffic::generate_arrivals(config_.traffic, rng_, state_.slot,
                                                     num_users(), config_.slot_len_ms,
                                                     next_packet_id_);
    for (const auto& p : arrivals) queues_.push(p);
    for (int u = 0; u < num_users(); ++u) {
        if (rate_bps[static_cast<size_t>(u)] > 0.0) {
            queues_.serve(u, rate_bps[static_cast<size_t>(u)], config_.slot_len_ms, state_.slot,
                          config_.slot_len_ms);
        }
    }

    // (6) energy accounting
    StepInfo info;
    double slot_energy = 0.0;
    info.modes.resize(static_cast<size_t>(num_bs()));
    for (int m = 0; m < num_bs(); ++m) {
        auto [next_status, energy] =
            bs::advance_slot(statuses_[static_cast<size_t>(m)], config_.power, config_.slot_len_ms);
        statuses_[static_cast<size_t>(m)] = next_status;
        ledger_.add_slot(m, energy);
        slot_energy += energy.total_j();
        info.modes[static_cast<size_t>(m)] = next_status.mode;
        if (next_status.mode == bs::SmState::Active && !next_status.in_transition()) {
            ++info.active_bs;
        }
    }
    if (with_ris) {
        const double ris_j = config_.geometry.ris_elements * config_.ris_element_power_w *
                             config_.slot_len_ms * 1e-3;
        ledger_.add_ris_static(ris_j);
        slot_energy += ris_j;
    }
    ledger_.add_system_slot(slot_energy);
    info.slot_energy_j = slot_energy;

    // (7) reward
    const double pending = queues_.pending_bits();
    const double worst = queues_.max_outstanding_delay(state_.slot, config_.slot_len_ms);
    const double slot_power = slot_energy / (config_.slot_len_ms * 1e-3);
    const double r = reward(slot_power, pending, worst, config_.reward);
    info.pending_bits = pending;
    info.worst_delay_ms = worst;
    info.delay_violations = pending > 0.0 && worst >= config_.reward.d_max_ms ? 1 : 0;

    // (8) roll the clock
    state_.slot += 1;
    state_.pending_bits = pending;
    for (int m = 0; m < num_bs(); ++m) {
        state_.sm[static_cast<size_t>(m)] = statuses_[static_cast<size_t>(m)].mode;
    }
    refresh_state_features(ch, ris);

    StepOutcome out;
    out.next = state_;
    out.reward = r;
    out.done = state_.slot >= config_.t_episode;
    out.info = info;
    return out;
}

Eigen::VectorXd Environment::observe() const {
    const int m = num_bs();
    const int n = num_users();
    Eigen::VectorXd f(obs_dim());
    int k = 0;
    f(k++) = state_.pending_bits / config_.pending_norm_bits;
    for (int i = 0; i < m * n; ++i) f(k++) = state_.channel_features(i);
    for (int i = 0; i < m; ++i) {
        for (int s = 0; s < bs::kNumSmStates; ++s) {
            f(k++) = static_cast<int>(state_.sm[static_cast<size_t>(i)]) == s ? 1.0 : 0.0;
        }
    }
    f(k++) = static_cast<double>(state_.slot) / static_cast<double>(config_.t_episode);
    if (!f.allFinite()) throw NumericError("observation encoding produced non-finite values");
    return f;
}

int Environment::obs_dim() const {
    return 1 + num_bs() * num_users() + bs::kNumSmStates * num_bs() + 1;
}

}  // namespace riscell::env
