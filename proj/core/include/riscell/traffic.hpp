#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "riscell/common.hpp"

namespace riscell::traffic {

struct Packet {
    std::int64_t id = 0;
    int user = 0;
    std::int64_t arrival_slot = 0;
    double size_bits = 0.0;
    double remaining_bits = 0.0;
};

struct TrafficConfig {
    double mean_interarrival_ms = 20.0;
    double packet_size_bits = 0.05 * 8e6;  // 0.05 MB files

    void validate() const;
};

struct DelayRecord {
    std::int64_t packet_id = 0;
    int user = 0;
    std::int64_t arrival_slot = 0;
    double delay_ms = 0.0;
};

struct ServeResult {
    double drained_bits = 0.0;
    std::vector<DelayRecord> completed;
};

// Per-user FIFO queues plus the completed-delay log. One environment
// instance owns one QueueState.
class QueueState {
  public:
    explicit QueueState(int num_users = 0)
        : queues_(static_cast<size_t>(num_users)) {}

    int num_users() const { return static_cast<int>(queues_.size()); }
    const std::deque<Packet>& queue(int user) const { return queues_.at(static_cast<size_t>(user)); }
    const std::vector<DelayRecord>& completed() const { return completed_; }
    const std::vector<DelayRecord>& slot_completions() const { return slot_completions_; }

    // Marks the start of a slot; clears the per-slot completion window
    // consulted by max_outstanding_delay.
    void begin_slot();

    void push(const Packet& p);

    // Drains head-of-line packets for `user` at `rate_bps` over
    // `budget_ms` within slot `now`. A packet finishing after t ms into
    // the slot records delay (now - arrival)*slot_len + t.
    ServeResult serve(int user, double rate_bps, double budget_ms, std::int64_t now,
                      double slot_len_ms);

    double pending_bits() const;
    double pending_bits(int user) const;

    // Max over queued ages and this slot's completion delays, ms.
    double max_outstanding_delay(std::int64_t now, double slot_len_ms) const;

  private:
    std::vector<std::deque<Packet>> queues_;
    std::vector<DelayRecord> completed_;
    std::vector<DelayRecord> slot_completions_;
};

// Poisson file arrivals, fixed size, one draw per user per slot.
std::vector<Packet> generate_arrivals(const TrafficConfig& config, RandomStream& rng,
                                      std::int64_t slot, int num_users, double slot_len_ms,
                                      std::int64_t& next_packet_id);

}  // namespace riscell::traffic
