#pragma once

#include <array>
#include <optional>
#include <set>
#include <vector>

#include "riscell/common.hpp"

namespace riscell::bs {

// Power states ordered along the transition chain. A state may only move
// to an adjacent one (or stay), so the index distance doubles as a
// legality check.
enum class SmState : int { Active = 0, Idle = 1, Micro = 2, Light = 3, Deep = 4 };

enum class ZoomLevel : int { ZoomIn = 0, NoZoom = 1, ZoomOut = 2 };

constexpr int kNumSmStates = 5;
constexpr int kNumZoomLevels = 3;

const char* to_string(SmState s);
const char* to_string(ZoomLevel z);

struct PowerTimingTable {
    // watts
    double active_zoom_out = 7.3;
    double active_no_zoom = 6.9;
    double active_zoom_in = 6.6;
    double idle = 2.3;
    double micro = 1.5;
    double light = 0.4;
    double deep = 0.3;
    // milliseconds; one figure per sleep depth, charged to any transition
    // whose deeper endpoint is that depth (both directions)
    double transition_micro_ms = 0.071;
    double transition_light_ms = 1.0;
    double transition_deep_ms = 10.0;
    // milliseconds; minimum residence before the next departure
    double hold_micro_ms = 0.07;
    double hold_light_ms = 1.0;
    double hold_deep_ms = 0.0;

    double power(SmState mode, ZoomLevel zoom) const;
    // 0 for the Active<->Idle pair ("fast transition").
    double transition_ms(SmState deeper_endpoint) const;
    double hold_ms(SmState mode) const;

    // Enforces the strict power ordering
    // Active(out) > Active(none) > Active(in) > Idle > Micro > Light > Deep
    // and nonnegative times.
    void validate() const;
};

struct CoverageRadii {
    double zoom_in_m = 40.0;
    double no_zoom_m = 50.0;
    double zoom_out_m = 60.0;
};

double coverage_radius(const CoverageRadii& r, ZoomLevel zoom);

struct Transition {
    SmState target = SmState::Active;
    SmState start_mode = SmState::Active;
    double remaining_ms = 0.0;
};

struct BsStatus {
    SmState mode = SmState::Active;
    ZoomLevel zoom = ZoomLevel::NoZoom;
    std::optional<Transition> transition;
    double hold_remaining_ms = 0.0;

    bool in_transition() const { return transition.has_value(); }
};

// Dwell and transition shares of one slot, in joules.
struct SlotEnergy {
    double dwell_j = 0.0;
    double transition_j = 0.0;

    double total_j() const { return dwell_j + transition_j; }
};

// Mid-transition: empty. Holding: stay only. Otherwise the chain
// neighbours plus the current mode.
std::set<SmState> legal_targets(const BsStatus& status);

// Throws ConstraintError unless `target` is in legal_targets(status).
// Active<->Idle switches immediately; other moves arm a timed transition
// charged at the starting mode's power.
BsStatus begin_transition(const BsStatus& status, SmState target,
                          const PowerTimingTable& table);

// Advances one slot, partitioning it between remaining transition time
// (at the start mode's power) and dwell at the arrived mode. The
// partition sums to slot_len_ms exactly. Hold timers tick only while
// dwelling in the held mode.
std::pair<BsStatus, SlotEnergy> advance_slot(const BsStatus& status,
                                             const PowerTimingTable& table,
                                             double slot_len_ms);

class EnergyLedger {
  public:
    explicit EnergyLedger(int num_bs = 0) : per_bs_(static_cast<size_t>(num_bs), 0.0) {}

    void add_slot(int bs, const SlotEnergy& e);
    void add_ris_static(double joules);
    // Accumulates the already-summed per-slot system figure so that the
    // running total reproduces a caller's slot-by-slot sum bit for bit.
    void add_system_slot(double joules) { system_total_ += joules; }

    double cumulative(int bs) const { return per_bs_.at(static_cast<size_t>(bs)); }
    double ris_static_j() const { return ris_static_; }
    double bs_total_j() const;
    double system_total_j() const { return system_total_; }
    int num_bs() const { return static_cast<int>(per_bs_.size()); }

  private:
    std::vector<double> per_bs_;
    double ris_static_ = 0.0;
    double system_total_ = 0.0;
};

// Total of the per-BS ledgers plus, when the surface is enabled, its
// static draw over the elapsed wall time.
double system_energy(const EnergyLedger& ledger, bool ris_enabled, int ris_elements,
                     double ris_element_power_w, double elapsed_s);

}  // namespace riscell::bs
