#pragma once

// Soft actor-critic for UAV placement: tanh-squashed Gaussian actor, two
// critics with soft-updated targets, learned temperature (log-alpha), and a
// FIFO replay buffer. Rewards come from the frozen GNN beamformer.

#include "uavsec/deployment.hpp"
#include "uavsec/layers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uavsec::sac {

using deploy::Action;
using channel::Point;

struct Transition {
    ad::Matrix state;  // 1 x state_dim
    Action action;
    double reward = 0.0;
    ad::Matrix next_state;
};

// Bounded FIFO; once full, each push evicts the oldest transition.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    // i = 0 is the oldest stored transition.
    const Transition& at(std::size_t i) const;
    // `count` distinct transitions, uniformly at random.
    std::vector<const Transition*> sample(std::size_t count, Rng& rng) const;

  private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // index of the oldest element once full
    std::vector<Transition> items_;
};

struct SacConfig {
    double learning_rate = 3e-4;
    std::size_t episodes = 200;
    std::size_t batch_size = 64;
    std::size_t buffer_capacity = 1000000;
    double discount = 0.99;
    double tau = 0.005;
    double initial_alpha = 0.2;
    double target_entropy = -2.0;
    std::size_t warmup = 1000;
    std::size_t updates_per_step = 1;
    std::size_t hidden_width = 256;
    std::size_t episode_length = 50;
    double step_scale = 10.0;
    std::size_t fading_draws = 4;
    // "sgd_momentum" or "adam"
    std::string optimizer = "adam";
    double momentum = 0.9;
    double log_std_min = -20.0;
    double log_std_max = 2.0;
    // Critics learn from reward * reward_scale; logs keep raw rewards.
    double reward_scale = 1.0;
    // Draw a new topology every episode instead of keeping the initial one.
    bool resample_topology = false;
    // Reuse the evaluation fading seeds in every episode.
    bool freeze_fading = false;

    void validate() const;
};

struct SacModel {
    std::size_t state_dim = 0;
    std::size_t hidden_width = 256;
    ad::ParameterSet actor;
    ad::ParameterSet critic1;
    ad::ParameterSet critic2;
    ad::ParameterSet target1;
    ad::ParameterSet target2;
    double log_alpha = 0.0;
    double discount = 0.99;
    double tau = 0.005;
    double log_std_min = -20.0;
    double log_std_max = 2.0;

    static SacModel create(std::size_t state_dim, const SacConfig& cfg, std::uint64_t seed);
    double alpha() const;
};

// Actor output on a tape: actions (B x 2, inside (-1, 1)) and log-probabilities (B x 1).
struct PolicySample {
    ad::Var action;
    ad::Var log_prob;
};

// Stochastic: u = mu + sigma * eps, a = tanh(u), with the tanh change of
// variables in log_prob. Deterministic (rng == nullptr): a = tanh(mu).
PolicySample actor_sample(ad::Binder& actor, const SacModel& model, ad::Var states, Rng* rng);
// Single-state convenience wrapper (no gradients).
std::pair<Action, double> actor_sample(const ad::Matrix& state, const SacModel& model, Rng* rng);

// Gaussian + tanh log density of a given squashed action for a state.
double action_log_prob(const ad::Matrix& state, const SacModel& model, Action a);

ad::Var critic_value(ad::Binder& critic, ad::Var states, ad::Var actions);

struct Batch {
    ad::Matrix states;
    ad::Matrix actions;
    ad::Matrix rewards;  // B x 1
    ad::Matrix next_states;
};

Batch make_batch(const std::vector<const Transition*>& items, double reward_scale = 1.0);

// y = r + discount * (min_i Q_target_i(s', a') - alpha log pi(a'|s')), a' ~ pi(.|s').
ad::Matrix critic_targets(const Batch& batch, const SacModel& model, Rng& rng);

class SacLearner {
  public:
    SacLearner(SacModel model, const SacConfig& cfg);

    struct CriticLosses {
        double critic1 = 0.0;
        double critic2 = 0.0;
    };
    // Both critics regress onto the same targets.
    CriticLosses update_critics(const Batch& batch, const ad::Matrix& targets);
    // Returns the actor loss; `mean_log_prob` receives E[log pi] of the batch.
    double update_actor(const Batch& batch, Rng& rng, double* mean_log_prob = nullptr);
    // Gradient step on E[-alpha (log pi + target_entropy)] in log-alpha.
    double update_alpha(double mean_log_prob);
    void soft_update(double tau);

    // critic_targets + update_critics + update_actor + update_alpha + soft_update.
    void update(const Batch& batch, Rng& rng);

    SacModel& model() { return model_; }
    const SacModel& model() const { return model_; }

  private:
    void step(ad::ParameterSet& params, std::size_t slot);

    SacModel model_;
    SacConfig cfg_;
    std::vector<ad::MomentumSgd> sgd_;
    std::vector<ad::Adam> adam_;
    double alpha_velocity_ = 0.0;
    double alpha_m_ = 0.0, alpha_v_ = 0.0;
    long alpha_steps_ = 0;
};

// target <- tau * source + (1 - tau) * target
void soft_update(ad::ParameterSet& target, const ad::ParameterSet& source, double tau);

struct TracePoint {
    std::size_t step = 0;
    Point position;
    double reward = 0.0;
};

struct EpisodeLog {
    std::size_t episode = 0;
    double cumulative_reward = 0.0;
    double final_secrecy_rate = 0.0;
};

struct SacRunResult {
    SacModel model;
    std::vector<EpisodeLog> episodes;
    // Deterministic rollout of the trained policy from the area centre under
    // the evaluation fading seeds. trace[0] is the start position.
    std::vector<TracePoint> trace;
    Point final_position;
    double final_reward = 0.0;
};

// Greedy rollout from the area centre for `steps` steps.
std::vector<TracePoint> rollout(const SacModel& model, const channel::Topology& topo,
                                const channel::ScenarioConfig& scenario, const gnn::GnnModel& gnn,
                                const std::vector<std::uint64_t>& fading_seeds, std::size_t steps, double step_scale);

// `eval_fading_seeds` also serve as the frozen training seeds when
// cfg.freeze_fading is set.
SacRunResult train_sac(const channel::Topology& initial, const channel::ScenarioConfig& scenario,
                       const SacConfig& cfg, const gnn::GnnModel& gnn,
                       const std::vector<std::uint64_t>& eval_fading_seeds, std::uint64_t seed);

}  // namespace uavsec::sac
