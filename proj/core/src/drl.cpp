#include "riscell/drl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace riscell::drl {

namespace {

// Masked categorical over one logit segment.
struct Segment {
    int offset = 0;
    int width = 0;
};

double masked_logsumexp(const Eigen::Ref<const Eigen::RowVectorXd>& logits, const Segment& seg,
                        const std::uint8_t* mask) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < seg.width; ++i) {
        if (mask[seg.offset + i]) zmax = std::max(zmax, logits(seg.offset + i));
    }
    double acc = 0.0;
    for (int i = 0; i < seg.width; ++i) {
        if (mask[seg.offset + i]) acc += std::exp(logits(seg.offset + i) - zmax);
    }
    return zmax + std::log(acc);
}

int sample_segment(const Eigen::Ref<const Eigen::RowVectorXd>& logits, const Segment& seg,
                   const std::uint8_t* mask, RandomStream& rng, bool greedy, double* logp) {
    const double lse = masked_logsumexp(logits, seg, mask);
    int choice = -1;
    if (greedy) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < seg.width; ++i) {
            if (mask[seg.offset + i] && logits(seg.offset + i) > best) {
                best = logits(seg.offset + i);
                choice = i;
            }
        }
    } else {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double u = unit(rng);
        double cdf = 0.0;
        for (int i = 0; i < seg.width; ++i) {
            if (!mask[seg.offset + i]) continue;
            cdf += std::exp(logits(seg.offset + i) - lse);
            choice = i;
            if (u <= cdf) break;
        }
    }
    if (choice < 0) throw NumericError("masked segment had no legal choice");
    if (logp) *logp += logits(seg.offset + choice) - lse;
    return choice;
}

std::vector<Segment> segments_of(const HeadLayout& l) {
    std::vector<Segment> segs;
    segs.reserve(static_cast<size_t>(l.num_segments()));
    for (int m = 0; m < l.num_bs; ++m) segs.push_back({l.sm_offset(m), bs::kNumSmStates});
    for (int m = 0; m < l.num_bs; ++m) segs.push_back({l.zoom_offset(m), bs::kNumZoomLevels});
    for (int n = 0; n < l.num_users; ++n) segs.push_back({l.assoc_offset(n), l.assoc_width()});
    return segs;
}

double record_logp(const HeadLayout& layout, const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                   const StepRecord& rec) {
    const auto segs = segments_of(layout);
    double logp = 0.0;
    for (size_t s = 0; s < segs.size(); ++s) {
        const double lse = masked_logsumexp(logits, segs[s], rec.mask.data());
        logp += logits(segs[s].offset + rec.choices[s]) - lse;
    }
    return logp;
}

// d(logp)/dlogits = onehot - masked softmax, scaled by `coef`, added into
// row `r` of `out`.
void accumulate_logp_grad(const HeadLayout& layout,
                          const Eigen::Ref<const Eigen::RowVectorXd>& logits,
                          const StepRecord& rec, double coef, Eigen::MatrixXd& out,
                          Eigen::Index r) {
    const auto segs = segments_of(layout);
    for (size_t s = 0; s < segs.size(); ++s) {
        const auto& seg = segs[s];
        const double lse = masked_logsumexp(logits, seg, rec.mask.data());
        for (int i = 0; i < seg.width; ++i) {
            if (!rec.mask[static_cast<size_t>(seg.offset + i)]) continue;
            const double p = std::exp(logits(seg.offset + i) - lse);
            const double onehot = i == rec.choices[s] ? 1.0 : 0.0;
            out(r, seg.offset + i) += coef * (onehot - p);
        }
    }
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

PolicyHeads make_policy(int obs_dim, const HeadLayout& layout, int hidden, int hidden_layers,
                        RandomStream& rng) {
    std::vector<int> dims{obs_dim};
    for (int l = 0; l < hidden_layers; ++l) dims.push_back(hidden);
    dims.push_back(layout.total_logits());
    PolicyHeads p;
    p.net = nn::make_net(dims, rng);
    p.layout = layout;
    return p;
}

SampledAction sample_action(const PolicyHeads& policy, env::Environment& e,
                            const Eigen::VectorXd& obs, RandomStream& rng, bool greedy) {
    const auto mask = e.action_mask();
    const auto& layout = policy.layout;
    const int m = layout.num_bs;
    const int n = layout.num_users;

    nn::Matrix logits_mat = nn::forward(policy.net, obs.transpose());
    Eigen::RowVectorXd logits = logits_mat.row(0);

    SampledAction sampled;
    sampled.mask.assign(static_cast<size_t>(layout.total_logits()), 0);
    sampled.choices.resize(static_cast<size_t>(layout.num_segments()));
    sampled.action.sm_targets.resize(static_cast<size_t>(m));
    sampled.action.zooms.resize(static_cast<size_t>(m));
    sampled.action.serving.resize(static_cast<size_t>(n));

    int seg_index = 0;
    for (int i = 0; i < m; ++i) {
        const Segment seg{layout.sm_offset(i), bs::kNumSmStates};
        for (int s = 0; s < bs::kNumSmStates; ++s) {
            sampled.mask[static_cast<size_t>(seg.offset + s)] =
                mask.sm[static_cast<size_t>(i)][static_cast<size_t>(s)] ? 1 : 0;
        }
        const int choice =
            sample_segment(logits, seg, sampled.mask.data(), rng, greedy, &sampled.logp);
        sampled.choices[static_cast<size_t>(seg_index++)] = choice;
        sampled.action.sm_targets[static_cast<size_t>(i)] = static_cast<bs::SmState>(choice);
    }
    for (int i = 0; i < m; ++i) {
        const Segment seg{layout.zoom_offset(i), bs::kNumZoomLevels};
        const auto allowed = mask.zoom_allowed(i, sampled.action.sm_targets[static_cast<size_t>(i)]);
        for (int z = 0; z < bs::kNumZoomLevels; ++z) {
            sampled.mask[static_cast<size_t>(seg.offset + z)] = allowed[static_cast<size_t>(z)] ? 1 : 0;
        }
        const int choice =
            sample_segment(logits, seg, sampled.mask.data(), rng, greedy, &sampled.logp);
        sampled.choices[static_cast<size_t>(seg_index++)] = choice;
        sampled.action.zooms[static_cast<size_t>(i)] = static_cast<bs::ZoomLevel>(choice);
    }

    std::vector<int> pinned;
    const bool assoc_free = !mask.assoc_free_user.empty() && mask.assoc_free_user.front();
    if (!assoc_free) {
        pinned = e.heuristic_association(sampled.action.sm_targets, sampled.action.zooms);
    }
    for (int u = 0; u < n; ++u) {
        const Segment seg{layout.assoc_offset(u), layout.assoc_width()};
        if (assoc_free) {
            const auto allowed =
                mask.assoc_allowed(u, sampled.action.sm_targets, sampled.action.zooms);
            for (int c = 0; c < layout.assoc_width(); ++c) {
                sampled.mask[static_cast<size_t>(seg.offset + c)] = allowed[static_cast<size_t>(c)] ? 1 : 0;
            }
        } else {
            sampled.mask[static_cast<size_t>(seg.offset + pinned[static_cast<size_t>(u)] + 1)] = 1;
        }
        const int choice =
            sample_segment(logits, seg, sampled.mask.data(), rng, greedy, &sampled.logp);
        sampled.choices[static_cast<size_t>(seg_index++)] = choice;
        sampled.action.serving[static_cast<size_t>(u)] = choice - 1;
    }
    return sampled;
}

env::MdpAction random_legal_action(env::Environment& e, RandomStream& rng) {
    const auto mask = e.action_mask();
    env::MdpAction action;
    action.sm_targets.resize(static_cast<size_t>(mask.num_bs));
    action.zooms.resize(static_cast<size_t>(mask.num_bs));
    action.serving.resize(static_cast<size_t>(mask.num_users));

    auto pick = [&rng](const std::vector<int>& options) {
        std::uniform_int_distribution<size_t> d(0, options.size() - 1);
        return options[d(rng)];
    };

    for (int m = 0; m < mask.num_bs; ++m) {
        std::vector<int> options;
        for (int s = 0; s < bs::kNumSmStates; ++s) {
            if (mask.sm[static_cast<size_t>(m)][static_cast<size_t>(s)]) options.push_back(s);
        }
        action.sm_targets[static_cast<size_t>(m)] = static_cast<bs::SmState>(pick(options));
    }
    for (int m = 0; m < mask.num_bs; ++m) {
        const auto allowed = mask.zoom_allowed(m, action.sm_targets[static_cast<size_t>(m)]);
        std::vector<int> options;
        for (int z = 0; z < bs::kNumZoomLevels; ++z) {
            if (allowed[static_cast<size_t>(z)]) options.push_back(z);
        }
        action.zooms[static_cast<size_t>(m)] = static_cast<bs::ZoomLevel>(pick(options));
    }
    const bool assoc_free = !mask.assoc_free_user.empty() && mask.assoc_free_user.front();
    std::vector<int> pinned;
    if (!assoc_free) pinned = e.heuristic_association(action.sm_targets, action.zooms);
    for (int n = 0; n < mask.num_users; ++n) {
        if (assoc_free) {
            const auto allowed = mask.assoc_allowed(n, action.sm_targets, action.zooms);
            std::vector<int> options;
            for (size_t c = 0; c < allowed.size(); ++c) {
                if (allowed[c]) options.push_back(static_cast<int>(c) - 1);
            }
            action.serving[static_cast<size_t>(n)] = pick(options);
        } else {
            action.serving[static_cast<size_t>(n)] = pinned[static_cast<size_t>(n)];
        }
    }
    return action;
}

TrajectoryBuffer collect_rollout(env::Environment& e, const PolicyHeads& policy,
                                 const nn::DenseNet& value_net, int horizon, RandomStream& rng,
                                 RolloutStats* stats) {
    TrajectoryBuffer buffer;
    buffer.steps.reserve(static_cast<size_t>(horizon));

    double running_return = 0.0;
    for (int t = 0; t < horizon; ++t) {
        StepRecord rec;
        rec.obs = e.observe();
        auto sampled = sample_action(policy, e, rec.obs, rng, false);
        rec.choices = std::move(sampled.choices);
        rec.mask = std::move(sampled.mask);
        rec.logp = sampled.logp;
        rec.value = nn::forward(value_net, rec.obs.transpose())(0, 0);

        const auto outcome = e.step(sampled.action);
        rec.reward = outcome.reward;
        rec.done = outcome.done;
        running_return += outcome.reward;
        if (outcome.done) {
            if (stats) stats->episode_returns.push_back(running_return);
            running_return = 0.0;
            e.reset(rng());
            rec.next_value = 0.0;
        } else {
            rec.next_value = nn::forward(value_net, e.observe().transpose())(0, 0);
        }
        buffer.steps.push_back(std::move(rec));
    }
    return buffer;
}

Eigen::VectorXd compute_gae(const TrajectoryBuffer& buffer, double gamma, double lambda) {
    const int n = buffer.size();
    Eigen::VectorXd adv(n);
    double carry = 0.0;
    for (int t = n - 1; t >= 0; --t) {
        const auto& rec = buffer.steps[static_cast<size_t>(t)];
        const double not_done = rec.done ? 0.0 : 1.0;
        const double delta = rec.reward + gamma * rec.next_value * not_done - rec.value;
        carry = delta + gamma * lambda * not_done * carry;
        adv(t) = carry;
    }
    return adv;
}

double clip_ratio(double h, double epsilon) {
    return std::min(std::max(h, 1.0 - epsilon), 1.0 + epsilon);
}

PpoUpdateReport ppo_update(const TrajectoryBuffer& buffer, PolicyHeads& policy,
                           nn::DenseNet& value_net, nn::OptimState& policy_opt,
                           nn::OptimState& value_opt, const PpoConfig& config,
                           RandomStream& rng) {
    const int n = buffer.size();
    if (n == 0) throw ConfigError("ppo_update on an empty buffer");
    const int obs_dim = static_cast<int>(buffer.steps.front().obs.size());

    Eigen::VectorXd adv = compute_gae(buffer, config.gamma, config.lambda);
    Eigen::VectorXd values(n);
    for (int i = 0; i < n; ++i) values(i) = buffer.steps[static_cast<size_t>(i)].value;
    Eigen::VectorXd returns = adv + values;

    if (config.normalize_advantages) {
        const double mean = adv.mean();
        const double stddev = std::sqrt((adv.array() - mean).square().mean());
        adv = (adv.array() - mean) / (stddev + 1e-8);
    }

    auto whole_value_mse = [&]() {
        nn::Matrix x(n, obs_dim);
        for (int i = 0; i < n; ++i) x.row(i) = buffer.steps[static_cast<size_t>(i)].obs;
        nn::Matrix v = nn::forward(value_net, x);
        return (v.col(0) - returns).squaredNorm() / static_cast<double>(n);
    };

    PpoUpdateReport report;
    report.value_mse_before = whole_value_mse();

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < n; start += config.minibatch) {
            const int stop = std::min(n, start + config.minibatch);
            const int rows = stop - start;

            nn::Matrix x(rows, obs_dim);
            for (int r = 0; r < rows; ++r) {
                x.row(r) = buffer.steps[static_cast<size_t>(order[static_cast<size_t>(start + r)])].obs;
            }

            // policy pass
            nn::ForwardTrace trace;
            nn::Matrix logits = nn::forward(policy.net, x, &trace);
            nn::Matrix dlogits = nn::Matrix::Zero(rows, policy.layout.total_logits());
            double objective = 0.0;
            for (int r = 0; r < rows; ++r) {
                const auto& rec = buffer.steps[static_cast<size_t>(order[static_cast<size_t>(start + r)])];
                const double a = adv(order[static_cast<size_t>(start + r)]);
                const double new_logp = record_logp(policy.layout, logits.row(r), rec);
                const double ratio = std::exp(std::min(new_logp - rec.logp, 30.0));
                const double unclipped = ratio * a;
                const double clipped = clip_ratio(ratio, config.clip) * a;
                objective += std::min(unclipped, clipped);
                // The clipped branch is constant in theta; gradient flows
                // only while the unclipped term attains the min.
                if (unclipped <= clipped) {
                    const double coef = -(a * ratio) / static_cast<double>(rows);
                    accumulate_logp_grad(policy.layout, logits.row(r), rec, coef, dlogits, r);
                }
            }
            if (!std::isfinite(objective)) throw NumericError("PPO surrogate diverged");
            report.surrogate = objective / rows;
            auto pgrads = nn::backward(policy.net, trace, dlogits);
            nn::clip_gradient_norm(pgrads, config.grad_clip);
            nn::apply_update(policy.net, pgrads, policy_opt);

            // value pass
            nn::ForwardTrace vtrace;
            nn::Matrix v = nn::forward(value_net, x, &vtrace);
            nn::Matrix dv(rows, 1);
            for (int r = 0; r < rows; ++r) {
                const double target = returns(order[static_cast<size_t>(start + r)]);
                dv(r, 0) = config.value_coef * 2.0 * (v(r, 0) - target) / static_cast<double>(rows);
            }
            auto vgrads = nn::backward(value_net, vtrace, dv);
            nn::clip_gradient_norm(vgrads, config.grad_clip);
            nn::apply_update(value_net, vgrads, value_opt);
        }
    }

    report.value_mse_after = whole_value_mse();
    return report;
}

LearningCurve smooth_curve(const std::vector<double>& raw, int window) {
    LearningCurve curve;
    curve.reserve(raw.size());
    double acc = 0.0;
    std::deque<double> tail;
    for (size_t i = 0; i < raw.size(); ++i) {
        tail.push_back(raw[i]);
        acc += raw[i];
        if (static_cast<int>(tail.size()) > window) {
            acc -= tail.front();
            tail.pop_front();
        }
        curve.push_back({static_cast<int>(i) + 1, raw[i], acc / static_cast<double>(tail.size())});
    }
    return curve;
}

PpoTrainResult train_ppo(env::Environment& e, const PpoConfig& config, std::uint64_t seed) {
    RandomStream rng(seed * 0x9E3779B97F4A7C15ULL + 1);
    e.reset(seed);

    HeadLayout layout{e.num_bs(), e.num_users()};
    PolicyHeads policy = make_policy(e.obs_dim(), layout, config.hidden, config.hidden_layers, rng);

    std::vector<int> vdims{e.obs_dim()};
    for (int l = 0; l < config.hidden_layers; ++l) vdims.push_back(config.hidden);
    vdims.push_back(1);
    nn::DenseNet value_net = nn::make_net(vdims, rng);

    auto policy_opt = nn::OptimState::adam(policy.net, config.learning_rate);
    auto value_opt = nn::OptimState::adam(value_net, config.learning_rate);

    PpoTrainResult result;
    std::vector<double> raw;
    double last_raw = 0.0;
    for (int it = 0; it < config.iterations; ++it) {
        RolloutStats stats;
        auto buffer = collect_rollout(e, policy, value_net, config.horizon, rng, &stats);
        ppo_update(buffer, policy, value_net, policy_opt, value_opt, config, rng);
        result.policy_old = policy;  // snapshot after the update block
        if (!stats.episode_returns.empty()) last_raw = mean_of(stats.episode_returns);
        raw.push_back(last_raw);
    }
    result.policy = std::move(policy);
    result.value_net = std::move(value_net);
    result.curve = smooth_curve(raw);
    return result;
}

// ---- value-based baseline ----

std::int64_t ActionCatalog::size() const {
    std::int64_t s = 1;
    for (int m = 0; m < num_bs; ++m) s *= per_bs();
    return s;
}

void ActionCatalog::decode(std::int64_t index, std::vector<bs::SmState>& sm,
                           std::vector<bs::ZoomLevel>& zoom) const {
    sm.resize(static_cast<size_t>(num_bs));
    zoom.resize(static_cast<size_t>(num_bs));
    for (int m = 0; m < num_bs; ++m) {
        const int digit = static_cast<int>(index % per_bs());
        index /= per_bs();
        sm[static_cast<size_t>(m)] = static_cast<bs::SmState>(digit % bs::kNumSmStates);
        zoom[static_cast<size_t>(m)] = static_cast<bs::ZoomLevel>(digit / bs::kNumSmStates);
    }
}

std::vector<std::uint8_t> ActionCatalog::legality(const env::ActionMask& mask) const {
    std::vector<std::uint8_t> bits(static_cast<size_t>(num_bs * per_bs()), 0);
    for (int m = 0; m < num_bs; ++m) {
        for (int digit = 0; digit < per_bs(); ++digit) {
            const auto sm = static_cast<bs::SmState>(digit % bs::kNumSmStates);
            const auto zoom = static_cast<bs::ZoomLevel>(digit / bs::kNumSmStates);
            const bool ok = mask.sm[static_cast<size_t>(m)][static_cast<size_t>(sm)] &&
                            mask.zoom_allowed(m, sm)[static_cast<size_t>(zoom)];
            bits[static_cast<size_t>(m * per_bs() + digit)] = ok ? 1 : 0;
        }
    }
    return bits;
}

bool ActionCatalog::legal(std::int64_t index, const std::vector<std::uint8_t>& bits) const {
    for (int m = 0; m < num_bs; ++m) {
        const int digit = static_cast<int>(index % per_bs());
        index /= per_bs();
        if (!bits[static_cast<size_t>(m * per_bs() + digit)]) return false;
    }
    return true;
}

std::int64_t ActionCatalog::sample_legal(const std::vector<std::uint8_t>& bits,
                                         RandomStream& rng) const {
    std::int64_t index = 0;
    std::int64_t stride = 1;
    for (int m = 0; m < num_bs; ++m) {
        std::vector<int> options;
        for (int digit = 0; digit < per_bs(); ++digit) {
            if (bits[static_cast<size_t>(m * per_bs() + digit)]) options.push_back(digit);
        }
        std::uniform_int_distribution<size_t> d(0, options.size() - 1);
        index += stride * options[d(rng)];
        stride *= per_bs();
    }
    return index;
}

std::int64_t ActionCatalog::argmax_legal(const Eigen::VectorXd& q,
                                         const std::vector<std::uint8_t>& bits) const {
    std::int64_t best = -1;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < size(); ++i) {
        if (!legal(i, bits)) continue;
        if (q(i) > best_q) {
            best_q = q(i);
            best = i;
        }
    }
    if (best < 0) throw NumericError("no legal catalog action");
    return best;
}

double ActionCatalog::max_legal(const Eigen::VectorXd& q,
                                const std::vector<std::uint8_t>& bits) const {
    return q(argmax_legal(q, bits));
}

double epsilon_at(const DqnConfig& config, std::int64_t step) {
    if (step >= config.eps_decay_steps) return config.eps_end;
    const double frac = static_cast<double>(step) / static_cast<double>(config.eps_decay_steps);
    return config.eps_start + frac * (config.eps_end - config.eps_start);
}

double td_target(double reward, bool done, double max_next_q, double gamma) {
    return reward + (done ? 0.0 : gamma * max_next_q);
}

namespace {

struct DqnTransition {
    Eigen::VectorXd obs;
    Eigen::VectorXd next_obs;
    std::int64_t action = 0;
    double reward = 0.0;
    bool done = false;
    std::vector<std::uint8_t> next_legal;
};

}  // namespace

DqnTrainResult train_dqn(env::Environment& e, const DqnConfig& config, std::uint64_t seed) {
    RandomStream rng(seed * 0x9E3779B97F4A7C15ULL + 2);
    e.reset(seed);

    const ActionCatalog catalog{e.num_bs()};
    const auto n_actions = catalog.size();

    std::vector<int> dims{e.obs_dim()};
    for (int l = 0; l < config.hidden_layers; ++l) dims.push_back(config.hidden);
    dims.push_back(static_cast<int>(n_actions));
    nn::DenseNet q_net = nn::make_net(dims, rng);
    nn::DenseNet target_net = q_net;
    auto optim = nn::OptimState::adam(q_net, config.learning_rate);

    std::deque<DqnTransition> replay;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> raw;
    double last_raw = 0.0;
    double episode_return = 0.0;
    std::int64_t global_step = 0;

    std::vector<bs::SmState> sm;
    std::vector<bs::ZoomLevel> zoom;

    for (int it = 0; it < config.iterations; ++it) {
        std::vector<double> episode_returns;
        for (int t = 0; t < config.horizon; ++t) {
            const auto obs = e.observe();
            const auto bits = catalog.legality(e.action_mask());
            std::int64_t action_index;
            if (unit(rng) < epsilon_at(config, global_step)) {
                action_index = catalog.sample_legal(bits, rng);
            } else {
                const Eigen::VectorXd q = nn::forward(q_net, obs.transpose()).row(0).transpose();
                action_index = catalog.argmax_legal(q, bits);
            }
            catalog.decode(action_index, sm, zoom);
            env::MdpAction action;
            action.sm_targets = sm;
            action.zooms = zoom;
            action.serving = e.heuristic_association(sm, zoom);

            const auto outcome = e.step(action);
            episode_return += outcome.reward;

            DqnTransition tr;
            tr.obs = obs;
            tr.action = action_index;
            tr.reward = outcome.reward;
            tr.done = outcome.done;
            if (outcome.done) {
                episode_returns.push_back(episode_return);
                episode_return = 0.0;
                e.reset(rng());
            }
            tr.next_obs = e.observe();
            tr.next_legal = catalog.legality(e.action_mask());
            replay.push_back(std::move(tr));
            if (static_cast<int>(replay.size()) > config.replay_capacity) replay.pop_front();

            ++global_step;
            if (global_step % config.update_every == 0 &&
                static_cast<int>(replay.size()) >= config.minibatch) {
                const int rows = config.minibatch;
                nn::Matrix x(rows, e.obs_dim());
                nn::Matrix xn(rows, e.obs_dim());
                std::vector<const DqnTransition*> batch(static_cast<size_t>(rows));
                std::uniform_int_distribution<size_t> pickd(0, replay.size() - 1);
                for (int r = 0; r < rows; ++r) {
                    batch[static_cast<size_t>(r)] = &replay[pickd(rng)];
                    x.row(r) = batch[static_cast<size_t>(r)]->obs;
                    xn.row(r) = batch[static_cast<size_t>(r)]->next_obs;
                }
                const nn::Matrix next_q = nn::forward(target_net, xn);
                nn::ForwardTrace trace;
                const nn::Matrix q = nn::forward(q_net, x, &trace);
                nn::Matrix dq = nn::Matrix::Zero(rows, n_actions);
                for (int r = 0; r < rows; ++r) {
                    const auto* tr_r = batch[static_cast<size_t>(r)];
                    double max_next = 0.0;
                    if (!tr_r->done) {
                        max_next = catalog.max_legal(next_q.row(r).transpose(), tr_r->next_legal);
                    }
                    const double y = td_target(tr_r->reward, tr_r->done, max_next, config.gamma);
                    dq(r, tr_r->action) =
                        2.0 * (q(r, tr_r->action) - y) / static_cast<double>(rows);
                }
                auto grads = nn::backward(q_net, trace, dq);
                nn::clip_gradient_norm(grads, config.grad_clip);
                nn::apply_update(q_net, grads, optim);
            }
            if (global_step % config.target_sync == 0) target_net = q_net;
        }
        if (!episode_returns.empty()) last_raw = mean_of(episode_returns);
        raw.push_back(last_raw);
    }

    DqnTrainResult result;
    result.q_net = std::move(q_net);
    result.curve = smooth_curve(raw);
    return result;
}

// ---- evaluation ----

namespace {

class PolicyActor : public Actor {
  public:
    explicit PolicyActor(PolicyHeads policy) : policy_(std::move(policy)) {}

    env::MdpAction act(env::Environment& e, RandomStream& rng) override {
        return sample_action(policy_, e, e.observe(), rng, true).action;
    }

  private:
    PolicyHeads policy_;
};

class QActor : public Actor {
  public:
    explicit QActor(nn::DenseNet q_net) : q_net_(std::move(q_net)) {}

    env::MdpAction act(env::Environment& e, RandomStream&) override {
        const ActionCatalog catalog{e.num_bs()};
        const auto bits = catalog.legality(e.action_mask());
        const Eigen::VectorXd q = nn::forward(q_net_, e.observe().transpose()).row(0).transpose();
        std::vector<bs::SmState> sm;
        std::vector<bs::ZoomLevel> zoom;
        catalog.decode(catalog.argmax_legal(q, bits), sm, zoom);
        env::MdpAction action;
        action.sm_targets = sm;
        action.zooms = zoom;
        action.serving = e.heuristic_association(sm, zoom);
        return action;
    }

  private:
    nn::DenseNet q_net_;
};

class PinnedActor : public Actor {
  public:
    env::MdpAction act(env::Environment& e, RandomStream&) override {
        env::MdpAction action;
        for (const auto& st : e.statuses()) {
            action.sm_targets.push_back(st.mode);
            action.zooms.push_back(st.zoom);
        }
        action.serving = e.heuristic_association(action.sm_targets, action.zooms);
        return action;
    }
};

}  // namespace

std::unique_ptr<Actor> make_policy_actor(PolicyHeads policy) {
    return std::make_unique<PolicyActor>(std::move(policy));
}

std::unique_ptr<Actor> make_q_actor(nn::DenseNet q_net) {
    return std::make_unique<QActor>(std::move(q_net));
}

std::unique_ptr<Actor> make_pinned_actor() { return std::make_unique<PinnedActor>(); }

EvalMetrics evaluate(env::Environment& e, Actor& actor, std::int64_t slots, std::uint64_t seed,
                     bool keep_trace) {
    RandomStream rng(seed + kEvalSeedOffset);
    e.reset(seed + kEvalSeedOffset);

    EvalMetrics metrics;
    std::vector<double> episode_returns;
    double episode_return = 0.0;
    double cumulative = 0.0;
    std::int64_t violation_slots = 0;

    for (std::int64_t slot = 0; slot < slots; ++slot) {
        const auto action = actor.act(e, rng);
        const auto outcome = e.step(action);
        cumulative += outcome.info.slot_energy_j;
        episode_return += outcome.reward;
        violation_slots += outcome.info.delay_violations > 0 ? 1 : 0;
        if (keep_trace) {
            metrics.trace.push_back({slot, cumulative, outcome.info.active_bs,
                                     outcome.info.pending_bits, outcome.info.worst_delay_ms,
                                     outcome.reward});
        }
        if (outcome.done) {
            episode_returns.push_back(episode_return);
            episode_return = 0.0;
            e.reset(rng());
        }
    }

    metrics.total_energy_j = cumulative;
    metrics.episodes = static_cast<int>(episode_returns.size());
    metrics.mean_episode_reward =
        episode_returns.empty() ? episode_return : mean_of(episode_returns);
    metrics.violation_rate =
        slots > 0 ? static_cast<double>(violation_slots) / static_cast<double>(slots) : 0.0;
    return metrics;
}

}  // namespace riscell::drl
