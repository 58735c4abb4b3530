#include "riscell/traffic.hpp"

#include <algorithm>
#include <cmath>

namespace riscell::traffic {

void TrafficConfig::validate() const {
    if (!(mean_interarrival_ms > 0.0)) throw ConfigError("traffic.mean_interarrival must be > 0");
    if (!(packet_size_bits > 0.0)) throw ConfigError("traffic.packet_size must be > 0");
}

void QueueState::begin_slot() { slot_completions_.clear(); }

void QueueState::push(const Packet& p) {
    queues_.at(static_cast<size_t>(p.user)).push_back(p);
}

ServeResult QueueState::serve(int user, double rate_bps, double budget_ms, std::int64_t now,
                              double slot_len_ms) {
    ServeResult result;
    if (rate_bps <= 0.0 || budget_ms <= 0.0) return result;

    auto& q = queues_.at(static_cast<size_t>(user));
    double spent_ms = 0.0;
    while (!q.empty() && spent_ms < budget_ms) {
        Packet& head = q.front();
        const double budget_bits = rate_bps * (budget_ms - spent_ms) * 1e-3;
        if (head.remaining_bits > budget_bits) {
            head.remaining_bits -= budget_bits;
            result.drained_bits += budget_bits;
            spent_ms = budget_ms;
            break;
        }
        result.drained_bits += head.remaining_bits;
        spent_ms += head.remaining_bits / rate_bps * 1e3;
        const double delay_ms =
            static_cast<double>(now - head.arrival_slot) * slot_len_ms + spent_ms;
        DelayRecord rec{head.id, head.user, head.arrival_slot, delay_ms};
        result.completed.push_back(rec);
        completed_.push_back(rec);
        slot_completions_.push_back(rec);
        q.pop_front();
    }
    return result;
}

double QueueState::pending_bits() const {
    double total = 0.0;
    for (const auto& q : queues_) {
        for (const auto& p : q) total += p.remaining_bits;
    }
    return total;
}

double QueueState::pending_bits(int user) const {
    double total = 0.0;
    for (const auto& p : queues_.at(static_cast<size_t>(user))) total += p.remaining_bits;
    return total;
}

double QueueState::max_outstanding_delay(std::int64_t now, double slot_len_ms) const {
    double worst = 0.0;
    for (const auto& q : queues_) {
        if (!q.empty()) {
            // FIFO: the head is the oldest packet of this user.
            worst = std::max(worst,
                             static_cast<double>(now - q.front().arrival_slot) * slot_len_ms);
        }
    }
    for (const auto& rec : slot_completions_) worst = std::max(worst, rec.delay_ms);
    return worst;
}

std::vector<Packet> generate_arrivals(const TrafficConfig& config, RandomStream& rng,
                                      std::int64_t slot, int num_users, double slot_len_ms,
                                      std::int64_t& next_packet_id) {
    config.validate();
    std::vector<Packet> out;
    const double lambda = slot_len_ms / config.mean_interarrival_ms;
    std::poisson_distribution<int> dist(lambda);
    for (int user = 0; user < num_users; ++user) {
        const int count = dist(rng);
        for (int k = 0; k < count; ++k) {
            out.push_back(Packet{next_packet_id++, user, slot, config.packet_size_bits,
                                 config.packet_size_bits});
        }
    }
    return out;
}

}  // namespace riscell::traffic
