#include "uavsec/sac.hpp"

#include "uavsec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace uavsec::sac {

using ad::Matrix;
using ad::Tensor;
using ad::Var;
using Eigen::Index;

// ---- replay buffer -------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw DimensionError("replay buffer index out of range");
    return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
    if (count > items_.size()) throw ContractError("not enough transitions to sample from");
    // Floyd's algorithm: `count` distinct indices in O(count).
    std::vector<std::size_t> picked;
    std::unordered_set<std::size_t> seen;
    const std::size_t n = items_.size();
    for (std::size_t j = n - count; j < n; ++j) {
        std::uniform_int_distribution<std::size_t> dist(0, j);
        std::size_t v = dist(rng);
        if (!seen.insert(v).second) {
            v = j;
            seen.insert(v);
        }
        picked.push_back(v);
    }
    std::vector<const Transition*> out;
    out.reserve(count);
    for (std::size_t i : picked) out.push_back(&items_[i]);
    return out;
}

// ---- config / model ----------------------------------------------------------

void SacConfig::validate() const {
    auto require = [](bool ok, const char* key) {
        if (!ok) throw ConfigError(std::string("invalid sac value: ") + key);
    };
    require(learning_rate > 0.0, "learning_rate");
    require(batch_size >= 1, "batch_size");
    require(buffer_capacity >= batch_size, "buffer_capacity");
    require(discount >= 0.0 && discount <= 1.0, "discount");
    require(tau >= 0.0 && tau <= 1.0, "tau");
    require(initial_alpha > 0.0, "initial_alpha");
    require(hidden_width >= 1, "hidden_width");
    require(episode_length >= 1, "episode_length");
    require(step_scale > 0.0, "step_scale");
    require(fading_draws >= 1, "fading_draws");
    require(optimizer == "sgd_momentum" || optimizer == "adam", "optimizer");
    require(momentum >= 0.0 && momentum < 1.0, "momentum");
    require(log_std_min < log_std_max, "log_std_min");
    require(reward_scale > 0.0, "reward_scale");
}

namespace {

void add_body(ad::ParameterSet& p, std::size_t in, std::size_t hidden, std::size_t out, const char* head, Rng& rng) {
    ad::add_affine(p, "fc1", in, hidden, rng);
    ad::add_prelu(p, "act1");
    ad::add_affine(p, "fc2", hidden, hidden, rng);
    ad::add_prelu(p, "act2");
    ad::add_affine(p, head, hidden, out, rng);
}

Var body(ad::Binder& b, Var x, const char* head) {
    Var h = ad::prelu(b, "act1", ad::affine(b, "fc1", x));
    h = ad::prelu(b, "act2", ad::affine(b, "fc2", h));
    return ad::affine(b, head, h);
}

Var mean_of(Var x) { return ad::scale(ad::sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var min_of(Var a, Var b) { return ad::scale(ad::max_over_set({ad::scale(a, -1.0), ad::scale(b, -1.0)}), -1.0); }

}  // namespace

SacModel SacModel::create(std::size_t state_dim, const SacConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    SacModel m;
    m.state_dim = state_dim;
    m.hidden_width = cfg.hidden_width;
    Rng rng(derive_seed(seed, 0x5ac));
    add_body(m.actor, state_dim, cfg.hidden_width, 4, "head", rng);
    add_body(m.critic1, state_dim + 2, cfg.hidden_width, 1, "q", rng);
    add_body(m.critic2, state_dim + 2, cfg.hidden_width, 1, "q", rng);
    m.target1 = m.critic1;
    m.target2 = m.critic2;
    m.log_alpha = std::log(cfg.initial_alpha);
    m.discount = cfg.discount;
    m.tau = cfg.tau;
    m.log_std_min = cfg.log_std_min;
    m.log_std_max = cfg.log_std_max;
    return m;
}

double SacModel::alpha() const { return std::exp(log_alpha); }

// ---- policy ------------------------------------------------------------------

PolicySample actor_sample(ad::Binder& actor, const SacModel& model, Var states, Rng* rng) {
    if (states.cols() != model.state_dim) throw DimensionError("state dimension does not match the actor");
    ad::Tape& tape = actor.tape();
    Var out = body(actor, states, "head");
    Var mu = ad::slice_cols(out, 0, 2);
    Var log_std = ad::clamp_min(ad::slice_cols(out, 2, 4), model.log_std_min);
    log_std = ad::scale(ad::clamp_min(ad::scale(log_std, -1.0), -model.log_std_max), -1.0);

    const auto rows = static_cast<Index>(states.rows());
    Matrix eps = Matrix::Zero(rows, 2);
    if (rng != nullptr) {
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < 2; ++j) eps(i, j) = normal(*rng);
    }
    Var u = rng != nullptr ? ad::add(mu, ad::mul(ad::exp(log_std), tape.constant(Tensor(eps)))) : mu;
    Var a = ad::tanh(u);

    // log N(u; mu, sigma) = -eps^2/2 - log sigma - log(2 pi)/2
    // log(1 - tanh(u)^2)  = 2 log 2 - 2 log(e^u + e^-u), evaluated with a max shift
    Var m = ad::max_over_set({u, ad::scale(u, -1.0)});
    Var lse = ad::add(m, ad::log(ad::add(ad::exp(ad::sub(u, m)), ad::exp(ad::sub(ad::scale(u, -1.0), m)))));
    Matrix c = (-0.5 * eps.array().square() - 0.5 * std::log(2.0 * std::numbers::pi) - 2.0 * std::numbers::ln2).matrix();
    Var per_dim = ad::add(ad::sub(tape.constant(Tensor(c)), log_std), ad::scale(lse, 2.0));
    return {a, ad::sum_cols(per_dim)};
}

std::pair<Action, double> actor_sample(const Matrix& state, const SacModel& model, Rng* rng) {
    ad::Tape tape;
    ad::Binder actor(tape, static_cast<const ad::ParameterSet&>(model.actor));
    PolicySample p = actor_sample(actor, model, tape.constant(Tensor(state)), rng);
    return {Action{p.action.value()(0, 0), p.action.value()(0, 1)}, p.log_prob.value()(0, 0)};
}

double action_log_prob(const Matrix& state, const SacModel& model, Action a) {
    if (!(std::abs(a.dx) < 1.0 && std::abs(a.dy) < 1.0)) throw DomainError("squashed action must lie in (-1, 1)");
    ad::Tape tape;
    ad::Binder actor(tape, static_cast<const ad::ParameterSet&>(model.actor));
    const Matrix out = body(actor, tape.constant(Tensor(state)), "head").value().matrix();
    double lp = 0.0;
    const double acts[2] = {a.dx, a.dy};
    for (int j = 0; j < 2; ++j) {
        const double mu = out(0, j);
        const double ls = std::clamp(out(0, 2 + j), model.log_std_min, model.log_std_max);
        const double sigma = std::exp(ls);
        const double u = std::atanh(acts[j]);
        const double z = (u - mu) / sigma;
        lp += -0.5 * z * z - ls - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(1.0 - acts[j] * acts[j]);
    }
    return lp;
}

Var critic_value(ad::Binder& critic, Var states, Var actions) {
    return body(critic, ad::concat({states, actions}, 1), "q");
}

Batch make_batch(const std::vector<const Transition*>& items, double reward_scale) {
    if (items.empty()) throw DimensionError("empty SAC batch");
    const Index dim = items.front()->state.cols();
    const auto n = static_cast<Index>(items.size());
    Batch b;
    b.states.resize(n, dim);
    b.next_states.resize(n, dim);
    b.actions.resize(n, 2);
    b.rewards.resize(n, 1);
    for (Index i = 0; i < n; ++i) {
        const Transition& t = *items[static_cast<std::size_t>(i)];
        b.states.row(i) = t.state;
        b.next_states.row(i) = t.next_state;
        b.actions(i, 0) = t.action.dx;
        b.actions(i, 1) = t.action.dy;
        b.rewards(i, 0) = t.reward * reward_scale;
    }
    return b;
}

Matrix critic_targets(const Batch& batch, const SacModel& model, Rng& rng) {
    ad::Tape tape;
    ad::Binder actor(tape, static_cast<const ad::ParameterSet&>(model.actor));
    ad::Binder t1(tape, static_cast<const ad::ParameterSet&>(model.target1));
    ad::Binder t2(tape, static_cast<const ad::ParameterSet&>(model.target2));
    Var next = tape.constant(Tensor(batch.next_states));
    PolicySample p = actor_sample(actor, model, next, &rng);
    Var q = min_of(critic_value(t1, next, p.action), critic_value(t2, next, p.action));
    Matrix soft = q.value().matrix() - model.alpha() * p.log_prob.value().matrix();
    return batch.rewards + model.discount * soft;
}

void soft_update(ad::ParameterSet& target, const ad::ParameterSet& source, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ContractError("soft update rate must lie in [0, 1]");
    target.check_compatible(source);
    auto& t = target.items();
    const auto& s = source.items();
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i].value.matrix() = tau * s[i].value.matrix() + (1.0 - tau) * t[i].value.matrix();
    }
}

// ---- learner -----------------------------------------------------------------

SacLearner::SacLearner(SacModel model, const SacConfig& cfg) : model_(std::move(model)), cfg_(cfg) {
    cfg_.validate();
    for (int i = 0; i < 3; ++i) {
        sgd_.emplace_back(cfg_.learning_rate, cfg_.momentum);
        adam_.emplace_back(cfg_.learning_rate);
    }
}

void SacLearner::step(ad::ParameterSet& params, std::size_t slot) {
    if (cfg_.optimizer == "adam")
        adam_[slot].step(params);
    else
        sgd_[slot].step(params);
}

SacLearner::CriticLosses SacLearner::update_critics(const Batch& batch, const Matrix& targets) {
    ad::Tape tape;
    ad::Binder c1(tape, model_.critic1);
    ad::Binder c2(tape, model_.critic2);
    Var s = tape.constant(Tensor(batch.states));
    Var a = tape.constant(Tensor(batch.actions));
    Var y = tape.constant(Tensor(targets));
    Var l1 = mean_of(ad::square(ad::sub(critic_value(c1, s, a), y)));
    Var l2 = mean_of(ad::square(ad::sub(critic_value(c2, s, a), y)));
    CriticLosses out{l1.item(), l2.item()};
    if (!std::isfinite(out.critic1) || !std::isfinite(out.critic2)) throw TrainingError("non-finite critic loss");
    model_.critic1.zero_grad();
    model_.critic2.zero_grad();
    tape.backward(ad::add(l1, l2));
    step(model_.critic1, 1);
    step(model_.critic2, 2);
    return out;
}

double SacLearner::update_actor(const Batch& batch, Rng& rng, double* mean_log_prob) {
    ad::Tape tape;
    ad::Binder actor(tape, model_.actor);
    ad::Binder c1(tape, static_cast<const ad::ParameterSet&>(model_.critic1));
    ad::Binder c2(tape, static_cast<const ad::ParameterSet&>(model_.critic2));
    Var s = tape.constant(Tensor(batch.states));
    PolicySample p = actor_sample(actor, model_, s, &rng);
    Var q = min_of(critic_value(c1, s, p.action), critic_value(c2, s, p.action));
    Var loss = mean_of(ad::sub(ad::scale(p.log_prob, model_.alpha()), q));
    if (mean_log_prob != nullptr) *mean_log_prob = p.log_prob.value().matrix().mean();
    model_.actor.zero_grad();
    tape.backward(loss);
    step(model_.actor, 0);
    return loss.item();
}

double SacLearner::update_alpha(double mean_log_prob) {
    // dL/dlog(alpha) = -alpha (E[log pi] + target_entropy)
    const double g = -model_.alpha() * (mean_log_prob + cfg_.target_entropy);
    if (cfg_.optimizer == "adam") {
        ++alpha_steps_;
        alpha_m_ = 0.9 * alpha_m_ + 0.1 * g;
        alpha_v_ = 0.999 * alpha_v_ + 0.001 * g * g;
        const double mh = alpha_m_ / (1.0 - std::pow(0.9, static_cast<double>(alpha_steps_)));
        const double vh = alpha_v_ / (1.0 - std::pow(0.999, static_cast<double>(alpha_steps_)));
        model_.log_alpha -= cfg_.learning_rate * mh / (std::sqrt(vh) + 1e-8);
    } else {
        alpha_velocity_ = cfg_.momentum * alpha_velocity_ + g;
        model_.log_alpha -= cfg_.learning_rate * alpha_velocity_;
    }
    return model_.alpha();
}

void SacLearner::soft_update(double tau) {
    sac::soft_update(model_.target1, model_.critic1, tau);
    sac::soft_update(model_.target2, model_.critic2, tau);
}

void SacLearner::update(const Batch& batch, Rng& rng) {
    const Matrix y = critic_targets(batch, model_, rng);
    update_critics(batch, y);
    double mean_lp = 0.0;
    update_actor(batch, rng, &mean_lp);
    update_alpha(mean_lp);
    soft_update(model_.tau);
    if (!model_.actor.all_finite() || !model_.critic1.all_finite() || !model_.critic2.all_finite() ||
        !std::isfinite(model_.log_alpha)) {
        throw TrainingError("SAC parameters became non-finite");
    }
}

// ---- training loop -------------------------------------------------------------

std::vector<TracePoint> rollout(const SacModel& model, const channel::Topology& topo,
                                const channel::ScenarioConfig& scenario, const gnn::GnnModel& gnn,
                                const std::vector<std::uint64_t>& fading_seeds, std::size_t steps, double step_scale) {
    channel::Topology cur = topo.with_uav(scenario.area_center());
    deploy::RewardSample r = deploy::evaluate_position(cur, scenario, gnn, fading_seeds);
    std::vector<TracePoint> trace{{0, cur.uav, r.reward}};
    for (std::size_t t = 1; t <= steps; ++t) {
        const Matrix state = deploy::encode_state(cur, r.draws.front(), scenario);
        const Action a = actor_sample(state, model, nullptr).first;
        cur = deploy::apply_action(cur, a, step_scale);
        r = deploy::evaluate_position(cur, scenario, gnn, fading_seeds);
        trace.push_back({t, cur.uav, r.reward});
    }
    return trace;
}

SacRunResult train_sac(const channel::Topology& initial, const channel::ScenarioConfig& scenario,
                       const SacConfig& cfg, const gnn::GnnModel& gnn,
                       const std::vector<std::uint64_t>& eval_fading_seeds, std::uint64_t seed) {
    cfg.validate();
    initial.validate();
    const std::size_t dim = deploy::state_dim(initial.size(), scenario.antennas);
    SacLearner learner(SacModel::create(dim, cfg, seed), cfg);
    ReplayBuffer buffer(cfg.buffer_capacity);
    Rng rng(derive_seed(seed, 2));
    Rng topo_rng(derive_seed(seed, 3));

    SacRunResult result;
    channel::Topology topo = initial;
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        if (cfg.resample_topology && ep > 0) topo = channel::sample_topology(scenario, topo_rng);
        topo.uav = scenario.area_center();
        const auto seeds =
            cfg.freeze_fading ? eval_fading_seeds : deploy::fading_seed_set(seed, 1000 + ep, cfg.fading_draws);
        deploy::RewardSample cur = deploy::evaluate_position(topo, scenario, gnn, seeds);
        Matrix state = deploy::encode_state(topo, cur.draws.front(), scenario);
        EpisodeLog log{ep, 0.0, cur.reward};
        for (std::size_t t = 0; t < cfg.episode_length; ++t) {
            const Action a = actor_sample(state, learner.model(), &rng).first;
            const channel::Topology next = deploy::apply_action(topo, a, cfg.step_scale);
            deploy::RewardSample nxt = deploy::evaluate_position(next, scenario, gnn, seeds);
            Matrix next_state = deploy::encode_state(next, nxt.draws.front(), scenario);
            buffer.push({state, a, nxt.reward, next_state});
            log.cumulative_reward += nxt.reward;
            log.final_secrecy_rate = nxt.reward;
            topo = next;
            state = std::move(next_state);
            if (buffer.size() >= std::max(cfg.warmup, cfg.batch_size)) {
                for (std::size_t u = 0; u < cfg.updates_per_step; ++u) {
                    learner.update(make_batch(buffer.sample(cfg.batch_size, rng), cfg.reward_scale), rng);
                }
            }
        }
        result.episodes.push_back(log);
    }
    result.model = learner.model();
    result.trace =
        rollout(result.model, initial, scenario, gnn, eval_fading_seeds, cfg.episode_length, cfg.step_scale);
    result.final_position = result.trace.back().position;
    result.final_reward = result.trace.back().reward;
    return result;
}

}  // namespace uavsec::sac
