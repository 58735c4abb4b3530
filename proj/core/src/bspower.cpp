#include "riscell/bspower.hpp"

#include <algorithm>
#include <cmath>

namespace riscell::bs {

const char* to_string(SmState s) {
    switch (s) {
        case SmState::Active: return "active";
        case SmState::Idle: return "idle";
        case SmState::Micro: return "micro";
        case SmState::Light: return "light";
        case SmState::Deep: return "deep";
    }
    return "?";
}

const char* to_string(ZoomLevel z) {
    switch (z) {
        case ZoomLevel::ZoomIn: return "zoom_in";
        case ZoomLevel::NoZoom: return "no_zoom";
        case ZoomLevel::ZoomOut: return "zoom_out";
    }
    return "?";
}

double PowerTimingTable::power(SmState mode, ZoomLevel zoom) const {
    switch (mode) {
        case SmState::Active:
            switch (zoom) {
                case ZoomLevel::ZoomOut: return active_zoom_out;
                case ZoomLevel::NoZoom: return active_no_zoom;
                case ZoomLevel::ZoomIn: return active_zoom_in;
            }
            return active_no_zoom;
        case SmState::Idle: return idle;
        case SmState::Micro: return micro;
        case SmState::Light: return light;
        case SmState::Deep: return deep;
    }
    return 0.0;
}

double PowerTimingTable::transition_ms(SmState deeper_endpoint) const {
    switch (deeper_endpoint) {
        case SmState::Micro: return transition_micro_ms;
        case SmState::Light: return transition_light_ms;
        case SmState::Deep: return transition_deep_ms;
        default: return 0.0;  // Active<->Idle
    }
}

double PowerTimingTable::hold_ms(SmState mode) const {
    switch (mode) {
        case SmState::Micro: return hold_micro_ms;
        case SmState::Light: return hold_light_ms;
        case SmState::Deep: return hold_deep_ms;
        default: return 0.0;
    }
}

void PowerTimingTable::validate() const {
    const bool ordered = active_zoom_out > active_no_zoom && active_no_zoom > active_zoom_in &&
                         active_zoom_in > idle && idle > micro && micro > light && light > deep &&
                         deep > 0.0;
    if (!ordered) {
        throw ConfigError("power table must satisfy Active(out) > Active(none) > Active(in) "
                          "> Idle > Micro > Light > Deep > 0");
    }
    const double times[] = {transition_micro_ms, transition_light_ms, transition_deep_ms,
                            hold_micro_ms, hold_light_ms, hold_deep_ms};
    for (double t : times) {
        if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("power table times must be >= 0");
    }
}

double coverage_radius(const CoverageRadii& r, ZoomLevel zoom) {
    switch (zoom) {
        case ZoomLevel::ZoomIn: return r.zoom_in_m;
        case ZoomLevel::NoZoom: return r.no_zoom_m;
        case ZoomLevel::ZoomOut: return r.zoom_out_m;
    }
    return r.no_zoom_m;
}

std::set<SmState> legal_targets(const BsStatus& status) {
    if (status.in_transition()) return {};
    if (status.hold_remaining_ms > 0.0) return {status.mode};
    std::set<SmState> out{status.mode};
    const int i = static_cast<int>(status.mode);
    if (i > 0) out.insert(static_cast<SmState>(i - 1));
    if (i < kNumSmStates - 1) out.insert(static_cast<SmState>(i + 1));
    return out;
}

namespace {

SmState deeper_of(SmState a, SmState b) {
    return static_cast<int>(a) > static_cast<int>(b) ? a : b;
}

// Arrival handler shared by instant switches and timed completions.
void arrive(BsStatus& s, SmState target, const PowerTimingTable& table) {
    s.mode = target;
    s.transition.reset();
    s.hold_remaining_ms = table.hold_ms(target);
}

}  // namespace

BsStatus begin_transition(const BsStatus& status, SmState target,
                          const PowerTimingTable& table) {
    const auto legal = legal_targets(status);
    if (!legal.count(target)) {
        throw ConstraintError(std::string("illegal sleep-mode transition ") +
                              to_string(status.mode) + " -> " + to_string(target));
    }
    if (target == status.mode) return status;

    BsStatus next = status;
    const double t_ms = table.transition_ms(deeper_of(status.mode, target));
    if (t_ms <= 0.0) {
        arrive(next, target, table);
        return next;
    }
    next.transition = Transition{target, status.mode, t_ms};
    next.hold_remaining_ms = 0.0;
    return next;
}

std::pair<BsStatus, SlotEnergy> advance_slot(const BsStatus& status,
                                             const PowerTimingTable& table,
                                             double slot_len_ms) {
    if (!(slot_len_ms > 0.0)) throw ConfigError("slot length must be > 0");

    BsStatus next = status;
    SlotEnergy energy;
    double left_ms = slot_len_ms;

    if (next.in_transition()) {
        const double spent = std::min(next.transition->remaining_ms, left_ms);
        energy.transition_j +=
            table.power(next.transition->start_mode, next.zoom) * spent * 1e-3;
        next.transition->remaining_ms -= spent;
        left_ms -= spent;
        if (next.transition->remaining_ms <= 0.0) {
            arrive(next, next.transition->target, table);
        }
    }

    if (left_ms > 0.0) {
        energy.dwell_j += table.power(next.mode, next.zoom) * left_ms * 1e-3;
        next.hold_remaining_ms = std::max(0.0, next.hold_remaining_ms - left_ms);
    }
    return {next, energy};
}

void EnergyLedger::add_slot(int bs, const SlotEnergy& e) {
    per_bs_.at(static_cast<size_t>(bs)) += e.total_j();
}

void EnergyLedger::add_ris_static(double joules) { ris_static_ += joules; }

double EnergyLedger::bs_total_j() const {
    double total = 0.0;
    for (double v : per_bs_) total += v;
    return total;
}

double system_energy(const EnergyLedger& ledger, bool ris_enabled, int ris_elements,
                     double ris_element_power_w, double elapsed_s) {
    double total = ledger.bs_total_j();
    if (ris_enabled) total += ris_elements * ris_element_power_w * elapsed_s;
    return total;
}

}  // namespace riscell::bs
