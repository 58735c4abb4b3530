#include <cmath>
#include <iostream>
#include <numbers>

#include "riscell/harness.hpp"

namespace riscell::harness {

namespace {

bool run_check(std::ostream& out, const char* name, bool ok) {
    out << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    return ok;
}

bool chain_legality() {
    bs::PowerTimingTable table;
    bs::BsStatus status;
    RandomStream rng(11);
    int previous = static_cast<int>(status.mode);
    for (int i = 0; i < 10'000; ++i) {
        const auto legal = bs::legal_targets(status);
        if (!legal.empty()) {
            std::vector<bs::SmState> options(legal.begin(), legal.end());
            std::uniform_int_distribution<size_t> pick(0, options.size() - 1);
            status = bs::begin_transition(status, options[pick(rng)], table);
        }
        auto [next, energy] = bs::advance_slot(status, table, 1.0);
        status = next;
        const int mode = static_cast<int>(status.mode);
        if (std::abs(mode - previous) > 1) return false;
        if (energy.total_j() < 0.0) return false;
        previous = mode;
    }
    return true;
}

bool duration_conservation() {
    bs::PowerTimingTable table;
    bs::BsStatus status;
    status = bs::begin_transition(status, bs::SmState::Idle, table);
    status = bs::begin_transition(status, bs::SmState::Micro, table);
    auto [next, energy] = bs::advance_slot(status, table, 1.0);
    const double expected = table.idle * 0.071e-3 + table.micro * 0.929e-3;
    return std::abs(energy.total_j() - expected) < 1e-15;
}

bool quantize_idempotent() {
    RandomStream rng(5);
    std::uniform_real_distribution<double> angle(-20.0, 20.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = angle(rng);
        for (int bits = 1; bits <= 4; ++bits) {
            const double once = net::quantize_phase(a, bits);
            if (net::quantize_phase(once, bits) != once) return false;
            if (once < 0.0 || once >= 2.0 * std::numbers::pi) return false;
        }
    }
    return true;
}

bool gae_matches_double_loop() {
    RandomStream rng(17);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    drl::TrajectoryBuffer buffer;
    for (int i = 0; i < 32; ++i) {
        drl::StepRecord rec;
        rec.reward = unit(rng);
        rec.value = unit(rng);
        rec.next_value = unit(rng);
        rec.done = i % 11 == 10;
        buffer.steps.push_back(rec);
    }
    const double gamma = 0.98;
    const double lambda = 0.95;
    const auto fast = drl::compute_gae(buffer, gamma, lambda);
    for (int t = 0; t < buffer.size(); ++t) {
        double acc = 0.0;
        double factor = 1.0;
        for (int k = t; k < buffer.size(); ++k) {
            const auto& rec = buffer.steps[static_cast<size_t>(k)];
            const double nd = rec.done ? 0.0 : 1.0;
            acc += factor * (rec.reward + gamma * rec.next_value * nd - rec.value);
            if (rec.done) break;
            factor *= gamma * lambda;
        }
        if (std::abs(acc - fast(t)) > 1e-12) return false;
    }
    return true;
}

bool clip_cases() {
    return drl::clip_ratio(1.5, 0.2) == 1.2 && drl::clip_ratio(0.5, 0.2) == 0.8 &&
           drl::clip_ratio(1.0, 0.2) == 1.0;
}

bool config_round_trip() {
    ExperimentConfig c;
    c.scheme = "PSZ";
    c.mean_interarrival_ms = 25.0;
    const auto back = parse_config(serialize_config(c));
    return back == c;
}

bool queue_conservation() {
    traffic::TrafficConfig cfg;
    cfg.mean_interarrival_ms = 4.0;
    traffic::QueueState q(3);
    RandomStream rng(3);
    std::int64_t next_id = 0;
    double arrived = 0.0;
    double drained = 0.0;
    for (std::int64_t slot = 0; slot < 2000; ++slot) {
        q.begin_slot();
        for (const auto& p : traffic::generate_arrivals(cfg, rng, slot, 3, 1.0, next_id)) {
            arrived += p.size_bits;
            q.push(p);
        }
        for (int u = 0; u < 3; ++u) {
            drained += q.serve(u, 1.2e8, 1.0, slot, 1.0).drained_bits;
        }
        if (std::abs(arrived - drained - q.pending_bits()) > 1e-6) return false;
    }
    return true;
}

bool backprop_finite_difference() {
    RandomStream rng(23);
    auto net = nn::make_net({4, 6, 3}, rng);
    nn::Matrix x(2, 4);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unit(rng);
    nn::Matrix w = nn::Matrix::Zero(2, 3);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unit(rng);

    nn::ForwardTrace trace;
    nn::forward(net, x, &trace);
    const auto grads = nn::backward(net, trace, w);

    const double h = 1e-6;
    double worst = 0.0;
    for (int l = 0; l < net.num_layers(); ++l) {
        auto& weights = net.weights[static_cast<size_t>(l)];
        for (int k = 0; k < 3; ++k) {
            const Eigen::Index r = k % weights.rows();
            const Eigen::Index c = (k * 7) % weights.cols();
            const double keep = weights(r, c);
            weights(r, c) = keep + h;
            const double up = (nn::forward(net, x).array() * w.array()).sum();
            weights(r, c) = keep - h;
            const double down = (nn::forward(net, x).array() * w.array()).sum();
            weights(r, c) = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = grads.weights[static_cast<size_t>(l)](r, c);
            worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
        }
    }
    return worst < 1e-4;
}

}  // namespace

bool selftest(std::ostream& out) {
    bool ok = true;
    ok &= run_check(out, "sleep-mode chain legality (10k random steps)", chain_legality());
    ok &= run_check(out, "slot duration conservation", duration_conservation());
    ok &= run_check(out, "phase quantizer idempotent and in range", quantize_idempotent());
    ok &= run_check(out, "advantage estimator matches double-loop sum", gae_matches_double_loop());
    ok &= run_check(out, "ratio clipping piecewise cases", clip_cases());
    ok &= run_check(out, "config serialize/parse round trip", config_round_trip());
    ok &= run_check(out, "queue bit conservation", queue_conservation());
    ok &= run_check(out, "backprop matches central differences", backprop_finite_difference());
    out << (ok ? "selftest passed" : "selftest FAILED") << "\n";
    return ok;
}

}  // namespace riscell::harness
