#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "riscell/env.hpp"
#include "riscell/neural.hpp"

namespace riscell::drl {

// Flat logit layout of the factored policy: per-BS sleep-mode segments,
// per-BS zoom segments, then per-user association segments of width M+1
// (entry 0 = no service).
struct HeadLayout {
    int num_bs = 0;
    int num_users = 0;

    int num_segments() const { return 2 * num_bs + num_users; }
    int total_logits() const {
        return num_bs * (bs::kNumSmStates + bs::kNumZoomLevels) + num_users * (num_bs + 1);
    }
    int sm_offset(int m) const { return m * bs::kNumSmStates; }
    int zoom_offset(int m) const { return num_bs * bs::kNumSmStates + m * bs::kNumZoomLevels; }
    int assoc_offset(int n) const {
        return num_bs * (bs::kNumSmStates + bs::kNumZoomLevels) + n * (num_bs + 1);
    }
    int assoc_width() const { return num_bs + 1; }
};

// Shared-trunk policy: one net whose block-structured output layer holds
// every head; masked softmax is applied per segment.
struct PolicyHeads {
    nn::DenseNet net;
    HeadLayout layout;
};

PolicyHeads make_policy(int obs_dim, const HeadLayout& layout, int hidden, int hidden_layers,
                        RandomStream& rng);

struct SampledAction {
    env::MdpAction action;
    std::vector<int> choices;        // chosen index per segment
    std::vector<std::uint8_t> mask;  // legality per logit at decision time
    double logp = 0.0;
};

// Draws (or argmaxes, when greedy) a masked factored action. Association
// segments that the scheme pins are collapsed onto the heuristic choice.
SampledAction sample_action(const PolicyHeads& policy, env::Environment& e,
                            const Eigen::VectorXd& obs, RandomStream& rng, bool greedy);

// Uniform draw over the legal action set; used by property suites.
env::MdpAction random_legal_action(env::Environment& e, RandomStream& rng);

struct StepRecord {
    Eigen::VectorXd obs;
    std::vector<int> choices;
    std::vector<std::uint8_t> mask;
    double reward = 0.0;
    double value = 0.0;
    double next_value = 0.0;
    double logp = 0.0;
    bool done = false;
};

struct TrajectoryBuffer {
    std::vector<StepRecord> steps;

    int size() const { return static_cast<int>(steps.size()); }
};

struct PpoConfig {
    double gamma = 0.98;
    double lambda = 0.95;
    double clip = 0.2;
    double learning_rate = 0.003;
    int iterations = 300;
    int horizon = 512;       // steps per iteration
    int minibatch = 64;
    int epochs = 4;
    double value_coef = 0.5;
    bool normalize_advantages = true;
    double grad_clip = 5.0;
    int hidden = 128;
    int hidden_layers = 2;
};

struct RolloutStats {
    std::vector<double> episode_returns;  // completed during the rollout
};

TrajectoryBuffer collect_rollout(env::Environment& e, const PolicyHeads& policy,
                                 const nn::DenseNet& value_net, int horizon, RandomStream& rng,
                                 RolloutStats* stats = nullptr);

Eigen::VectorXd compute_gae(const TrajectoryBuffer& buffer, double gamma, double lambda);

double clip_ratio(double h, double epsilon);

struct PpoUpdateReport {
    double surrogate = 0.0;        // clipped objective on the last epoch
    double value_mse_before = 0.0;
    double value_mse_after = 0.0;
};

PpoUpdateReport ppo_update(const TrajectoryBuffer& buffer, PolicyHeads& policy,
                           nn::DenseNet& value_net, nn::OptimState& policy_opt,
                           nn::OptimState& value_opt, const PpoConfig& config,
                           RandomStream& rng);

struct CurvePoint {
    int iteration = 0;
    double raw_reward = 0.0;
    double smoothed_reward = 0.0;
};

using LearningCurve = std::vector<CurvePoint>;

// Trailing moving average, window 10.
LearningCurve smooth_curve(const std::vector<double>& raw, int window = 10);

struct PpoTrainResult {
    PolicyHeads policy;
    PolicyHeads policy_old;  // snapshot refreshed after each update block
    nn::DenseNet value_net;
    LearningCurve curve;
};

PpoTrainResult train_ppo(env::Environment& e, const PpoConfig& config, std::uint64_t seed);

// ---- value-based baseline ----

struct DqnConfig {
    double gamma = 0.98;
    double learning_rate = 0.003;
    int iterations = 300;
    int horizon = 512;
    int replay_capacity = 20000;
    int minibatch = 64;
    int update_every = 8;
    int target_sync = 500;  // environment steps between target refreshes
    double eps_start = 1.0;
    double eps_end = 0.05;
    int eps_decay_steps = 30000;
    double grad_clip = 5.0;
    int hidden = 128;
    int hidden_layers = 2;
};

// Joint catalog over per-BS (sleep target x zoom) pairs; association
// follows the nearest-covering heuristic. Size 15^M.
struct ActionCatalog {
    int num_bs = 0;

    int per_bs() const { return bs::kNumSmStates * bs::kNumZoomLevels; }
    std::int64_t size() const;
    void decode(std::int64_t index, std::vector<bs::SmState>& sm,
                std::vector<bs::ZoomLevel>& zoom) const;
    // legality bits per BS digit under the current mask
    std::vector<std::uint8_t> legality(const env::ActionMask& mask) const;
    bool legal(std::int64_t index, const std::vector<std::uint8_t>& bits) const;
    std::int64_t sample_legal(const std::vector<std::uint8_t>& bits, RandomStream& rng) const;
    std::int64_t argmax_legal(const Eigen::VectorXd& q,
                              const std::vector<std::uint8_t>& bits) const;
    double max_legal(const Eigen::VectorXd& q, const std::vector<std::uint8_t>& bits) const;
};

double epsilon_at(const DqnConfig& config, std::int64_t step);

// r + gamma * max_a' Qbar(u', a') * (1 - d)
double td_target(double reward, bool done, double max_next_q, double gamma);

struct DqnTrainResult {
    nn::DenseNet q_net;
    LearningCurve curve;
};

DqnTrainResult train_dqn(env::Environment& e, const DqnConfig& config, std::uint64_t seed);

// ---- evaluation ----

class Actor {
  public:
    virtual ~Actor() = default;
    virtual env::MdpAction act(env::Environment& e, RandomStream& rng) = 0;
};

std::unique_ptr<Actor> make_policy_actor(PolicyHeads policy);       // greedy
std::unique_ptr<Actor> make_q_actor(nn::DenseNet q_net);            // greedy
std::unique_ptr<Actor> make_pinned_actor();                         // fully masked schemes (AA)

struct SlotTrace {
    std::int64_t slot = 0;
    double cumulative_energy_j = 0.0;
    int active_bs = 0;
    double pending_bits = 0.0;
    double worst_delay_ms = 0.0;
    double reward = 0.0;
};

struct EvalMetrics {
    double mean_episode_reward = 0.0;
    double total_energy_j = 0.0;
    double violation_rate = 0.0;
    int episodes = 0;
    std::vector<SlotTrace> trace;
};

// Greedy evaluation over `slots` environment steps, restarting episodes
// as they finish. Evaluation streams are offset from training seeds.
EvalMetrics evaluate(env::Environment& e, Actor& actor, std::int64_t slots, std::uint64_t seed,
                     bool keep_trace = false);

constexpr std::uint64_t kEvalSeedOffset = 10'000;

}  // namespace riscell::drl
