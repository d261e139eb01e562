#include "uavsec/deployment.hpp"
#include "uavsec/errors.hpp"
#include "uavsec/sac.hpp"
#include "uavsec/secrecy.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace uavsec;
using namespace uavsec::sac;
using ad::Matrix;
using ad::Tensor;
using ad::Var;

namespace {

channel::ScenarioConfig tiny_scenario() {
    channel::ScenarioConfig cfg;
    cfg.users = 2;
    cfg.antennas = 2;
    return cfg;
}

gnn::GnnModel tiny_gnn(const channel::ScenarioConfig& cfg) {
    return gnn::GnnModel::create(gnn::GnnArchitecture::for_antennas(cfg.antennas, 2), gnn::channel_feature_scale(cfg),
                                 4);
}

SacConfig tiny_sac() {
    SacConfig c;
    c.hidden_width = 8;
    c.batch_size = 8;
    c.warmup = 16;
    c.episodes = 3;
    c.episode_length = 10;
    c.buffer_capacity = 1000;
    return c;
}

Matrix random_states(std::size_t rows, std::size_t dim, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(rows, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

void zero_params(ad::ParameterSet& p, const std::string& prefix) {
    p.at(prefix + ".weight").value.matrix().setZero();
    p.at(prefix + ".bias").value.matrix().setZero();
}

Transition transition(double reward) {
    return {Matrix::Constant(1, 3, reward), Action{0.1, -0.1}, reward, Matrix::Constant(1, 3, reward + 1)};
}

Var batch_min(Var a, Var b) { return ad::scale(ad::max_over_set({ad::scale(a, -1.0), ad::scale(b, -1.0)}), -1.0); }

}  // namespace

// ---- environment -------------------------------------------------------------

TEST_CASE("state dimension is 2 + 4KN") {
    CHECK(deploy::state_dim(8, 8) == 258);
    CHECK(deploy::state_dim(1, 1) == 6);

    const channel::ScenarioConfig cfg;
    Rng rng(1);
    channel::Topology t = channel::sample_topology(cfg, rng);
    t.uav = {50, 150};
    const auto cs = channel::draw_channel_set(t, cfg, rng);
    const Matrix s = deploy::encode_state(t, cs, cfg);
    REQUIRE(s.rows() == 1);
    REQUIRE(s.cols() == 258);
    CHECK(s(0, 0) == doctest::Approx(0.25));
    CHECK(s(0, 1) == doctest::Approx(0.75));
    const double scale = 1.0 / std::sqrt(channel::path_gain(cfg.altitude, cfg));
    CHECK(s(0, 2) == doctest::Approx(cs.users[0](0).real() * scale).epsilon(1e-12));
    // real parts of a vector first, then imaginary parts
    CHECK(s(0, 3) == doctest::Approx(cs.users[0](1).real() * scale).epsilon(1e-12));
    CHECK(s(0, 2 + 8) == doctest::Approx(cs.users[0](0).imag() * scale).epsilon(1e-12));
    CHECK(s(0, 2 + 4 * 8 * 4) == doctest::Approx(cs.eves[0](0).real() * scale).epsilon(1e-12));
    CHECK(s(0, 2 + 4 * 8 * 8 - 1) == doctest::Approx(cs.eves[7](7).imag() * scale).epsilon(1e-12));
}

TEST_CASE("actions move the UAV and clip at the border") {
    channel::Topology t;
    t.area_side = 200.0;
    t.uav = {100, 100};
    auto moved = deploy::apply_action(t, {0.5, -1.0}, 10.0);
    CHECK(moved.uav == channel::Point{105, 90});
    t.uav = {195, 3};
    moved = deploy::apply_action(t, {1.0, -1.0}, 10.0);
    CHECK(moved.uav == channel::Point{200, 0});
    CHECK_THROWS_AS(deploy::apply_action(t, {0, 0}, 0.0), DomainError);
}

TEST_CASE("reward is the mean GNN secrecy rate over the fading draws") {
    const auto cfg = tiny_scenario();
    const auto model = tiny_gnn(cfg);
    Rng rng(3);
    const auto topo = channel::sample_topology(cfg, rng);
    const auto seeds = deploy::fading_seed_set(1, 2, 4);
    REQUIRE(seeds.size() == 4);
    const double r = deploy::compute_reward(topo, cfg, model, seeds);
    CHECK(r >= 0.0);
    CHECK(r == deploy::compute_reward(topo, cfg, model, seeds));

    double acc = 0.0;
    for (const auto& cs : deploy::fading_channels(topo, cfg, seeds))
        acc += secrecy::secrecy_report(cs, gnn::gnn_forward(cs, model, cfg.power_budget), cfg.noise_power).sum;
    CHECK(r == doctest::Approx(acc / 4.0).epsilon(1e-12));

    for (int i = 0; i < 20; ++i) {
        const auto t = topo.with_uav(channel::sample_uav_position(cfg, rng));
        CHECK(deploy::compute_reward(t, cfg, model, seeds) >= 0.0);
    }
}

// ---- replay buffer ---------------------------------------------------------------

TEST_CASE("replay buffer is a bounded FIFO") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) buf.push(transition(i));
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).reward == 2.0);
    CHECK(buf.at(2).reward == 4.0);
    CHECK_THROWS_AS(buf.at(3), DimensionError);
    CHECK_THROWS_AS(ReplayBuffer(0), ContractError);
}

TEST_CASE("replay sampling returns distinct transitions") {
    ReplayBuffer buf(100);
    for (int i = 0; i < 50; ++i) buf.push(transition(i));
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        const auto s = buf.sample(20, rng);
        std::set<const Transition*> uniq(s.begin(), s.end());
        CHECK(uniq.size() == 20);
    }
    CHECK(buf.sample(50, rng).size() == 50);
    CHECK_THROWS_AS(buf.sample(51, rng), ContractError);
}

// ---- policy --------------------------------------------------------------------

TEST_CASE("sampled actions lie inside (-1, 1)") {
    const auto model = SacModel::create(3, tiny_sac(), 1);
    Rng rng(2);
    const Matrix s = random_states(1, 3, rng);
    for (int i = 0; i < 1000; ++i) {
        const auto [a, lp] = actor_sample(s, model, &rng);
        CHECK(std::abs(a.dx) < 1.0);
        CHECK(std::abs(a.dy) < 1.0);
        CHECK(std::isfinite(lp));
    }
}

TEST_CASE("deterministic action is tanh of the mean") {
    auto model = SacModel::create(3, tiny_sac(), 1);
    zero_params(model.actor, "head");
    Rng rng(2);
    const auto [a, lp] = actor_sample(random_states(1, 3, rng), model, nullptr);
    CHECK(a.dx == 0.0);
    CHECK(a.dy == 0.0);
    (void)lp;
}

TEST_CASE("sampled log-probabilities match the closed-form density") {
    const auto model = SacModel::create(3, tiny_sac(), 7);
    Rng rng(9);
    const Matrix s = random_states(1, 3, rng);
    for (int i = 0; i < 50; ++i) {
        const auto [a, lp] = actor_sample(s, model, &rng);
        CHECK(lp == doctest::Approx(action_log_prob(s, model, a)).epsilon(1e-8));
    }
}

TEST_CASE("sample histogram matches the policy density") {
    const auto model = SacModel::create(3, tiny_sac(), 7);
    Rng rng(10);
    const Matrix s = random_states(1, 3, rng);
    constexpr int cells = 10, sub = 20, draws = 100000;
    std::vector<double> hist(cells * cells, 0.0);
    auto cell = [](double v) { return std::min(cells - 1, static_cast<int>((v + 1.0) / 2.0 * cells)); };
    for (int i = 0; i < draws; ++i) {
        const Action a = actor_sample(s, model, &rng).first;
        hist[cell(a.dy) * cells + cell(a.dx)] += 1.0 / draws;
    }
    double worst = 0.0, total = 0.0;
    const double h = 2.0 / (cells * sub);
    for (int cy = 0; cy < cells; ++cy) {
        for (int cx = 0; cx < cells; ++cx) {
            double p = 0.0;
            for (int i = 0; i < sub; ++i)
                for (int j = 0; j < sub; ++j) {
                    const Action a{-1.0 + (cx * sub + j + 0.5) * h, -1.0 + (cy * sub + i + 0.5) * h};
                    p += std::exp(action_log_prob(s, model, a)) * h * h;
                }
            total += p;
            worst = std::max(worst, std::abs(p - hist[cy * cells + cx]));
        }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(worst <= 0.005);
}

TEST_CASE("action_log_prob rejects actions on the boundary") {
    const auto model = SacModel::create(3, tiny_sac(), 7);
    CHECK_THROWS_AS(action_log_prob(Matrix::Zero(1, 3), model, {1.0, 0.0}), DomainError);
}

// ---- critic targets ----------------------------------------------------------------

namespace {

Batch random_batch(std::size_t rows, std::size_t dim, Rng& rng) {
    Batch b;
    b.states = random_states(rows, dim, rng);
    b.next_states = random_states(rows, dim, rng);
    b.actions = random_states(rows, 2, rng) * 0.9;
    b.rewards = random_states(rows, 1, rng).cwiseAbs() * 3.0;
    return b;
}

}  // namespace

TEST_CASE("critic targets reduce to the reward without discounting") {
    auto cfg = tiny_sac();
    cfg.discount = 0.0;
    const auto model = SacModel::create(3, cfg, 1);
    Rng rng(1);
    const Batch b = random_batch(16, 3, rng);
    CHECK((critic_targets(b, model, rng) - b.rewards).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("critic targets use the smaller target critic") {
    auto model = SacModel::create(3, tiny_sac(), 2);
    Rng rng(3);
    const Batch b = random_batch(32, 3, rng);

    // With identical critics and a vanishing temperature the target is r + gamma Q.
    model.target2 = model.target1;
    model.log_alpha = -60.0;
    Rng r1(8), r2(8);
    const Matrix y = critic_targets(b, model, r1);
    const Matrix y_swap = [&] {
        SacModel m2 = model;
        std::swap(m2.target1, m2.target2);
        return critic_targets(b, m2, r2);
    }();
    CHECK((y - y_swap).cwiseAbs().maxCoeff() == 0.0);

    // Distinct critics: the target never exceeds the one built from either critic alone.
    model = SacModel::create(3, tiny_sac(), 2);
    SacModel only1 = model, only2 = model;
    only1.target2 = only1.target1;
    only2.target1 = only2.target2;
    Rng a(4), c(4), d(4);
    const Matrix ymin = critic_targets(b, model, a);
    const Matrix y1 = critic_targets(b, only1, c);
    const Matrix y2 = critic_targets(b, only2, d);
    CHECK(((ymin.array() - y1.array()) <= 1e-12).all());
    CHECK(((ymin.array() - y2.array()) <= 1e-12).all());
    CHECK(((ymin.array() - y1.array().min(y2.array())).abs() <= 1e-12).all());
}

TEST_CASE("critic regression reaches the Bellman fixed point of a one-state MDP") {
    // r = 1, gamma = 0.5, alpha -> 0: Q = r / (1 - gamma) = 2 for every action.
    auto cfg = tiny_sac();
    cfg.hidden_width = 16;
    cfg.discount = 0.5;
    cfg.learning_rate = 3e-3;
    SacLearner learner(SacModel::create(1, cfg, 3), cfg);
    learner.model().log_alpha = -60.0;
    Rng rng(6);
    Batch b;
    b.states = Matrix::Zero(32, 1);
    b.next_states = Matrix::Zero(32, 1);
    b.rewards = Matrix::Ones(32, 1);
    SacLearner::CriticLosses last;
    for (int it = 0; it < 3000; ++it) {
        b.actions = random_states(32, 2, rng) * 0.99;
        last = learner.update_critics(b, critic_targets(b, learner.model(), rng));
        CHECK(last.critic1 >= 0.0);
        CHECK(last.critic2 >= 0.0);
        learner.soft_update(0.05);
    }
    ad::Tape tape;
    ad::Binder c1(tape, static_cast<const ad::ParameterSet&>(learner.model().critic1));
    ad::Binder c2(tape, static_cast<const ad::ParameterSet&>(learner.model().critic2));
    b.actions = random_states(32, 2, rng) * 0.99;
    Var s = tape.constant(Tensor(b.states)), a = tape.constant(Tensor(b.actions));
    const Matrix q1 = critic_value(c1, s, a).value().matrix();
    const Matrix q2 = critic_value(c2, s, a).value().matrix();
    CHECK((q1.array() - 2.0).abs().maxCoeff() <= 0.05);
    CHECK((q2.array() - 2.0).abs().maxCoeff() <= 0.05);
}

// ---- actor and temperature ---------------------------------------------------------

TEST_CASE("actor gradient matches finite differences") {
    const auto model = SacModel::create(3, tiny_sac(), 11);
    Rng data(12);
    const Matrix states = random_states(6, 3, data);
    const std::uint64_t eps_seed = 77;

    auto loss_with = [&](ad::Tape& tape, ad::Binder& actor) {
        ad::Binder c1(tape, static_cast<const ad::ParameterSet&>(model.critic1));
        ad::Binder c2(tape, static_cast<const ad::ParameterSet&>(model.critic2));
        Rng eps(eps_seed);
        Var s = tape.constant(Tensor(states));
        PolicySample p = actor_sample(actor, model, s, &eps);
        Var q = batch_min(critic_value(c1, s, p.action), critic_value(c2, s, p.action));
        Var l = ad::sub(ad::scale(p.log_prob, model.alpha()), q);
        return ad::scale(ad::sum(l), 1.0 / 6.0);
    };

    ad::ParameterSet actor = model.actor;
    ad::Tape tape;
    ad::Binder bind(tape, actor);
    actor.zero_grad();
    tape.backward(loss_with(tape, bind));

    const double h = 1e-6;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    ad::ParameterSet probe = model.actor;
    auto eval = [&] {
        ad::Tape t;
        ad::Binder b(t, static_cast<const ad::ParameterSet&>(probe));
        return loss_with(t, b).item();
    };
    for (std::size_t i = 0; i < probe.items().size(); ++i) {
        auto& v = probe.items()[i].value;
        const auto& g = actor.items()[i].grad;
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) {
                const double x = v(r, c);
                v(r, c) = x + h;
                const double fp = eval();
                v(r, c) = x - h;
                const double fm = eval();
                v(r, c) = x;
                const double num = (fp - fm) / (2 * h);
                diff2 += (num - g(r, c)) * (num - g(r, c));
                a2 += g(r, c) * g(r, c);
                n2 += num * num;
            }
    }
    CHECK(std::sqrt(a2) > 0.0);
    CHECK(std::sqrt(diff2) / std::max(std::sqrt(a2), std::sqrt(n2)) <= 1e-4);
}

TEST_CASE("with a flat critic and no temperature the actor does not move") {
    auto cfg = tiny_sac();
    auto model = SacModel::create(3, cfg, 5);
    zero_params(model.critic1, "q");
    zero_params(model.critic2, "q");
    model.critic1.at("q.bias").value(0, 0) = 1.5;
    model.critic2.at("q.bias").value(0, 0) = 1.5;
    model.log_alpha = -60.0;
    SacLearner learner(model, cfg);
    Rng rng(1);
    const Batch b = random_batch(16, 3, rng);
    learner.update_actor(b, rng);
    for (const auto& p : learner.model().actor.items()) CHECK(p.grad.matrix().cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("a larger temperature raises policy entropy") {
    auto cfg = tiny_sac();
    cfg.optimizer = "sgd_momentum";
    cfg.momentum = 0.0;
    cfg.learning_rate = 1e-3;
    Rng data(4);
    const Batch b = random_batch(32, 3, data);

    auto entropy_after = [&](double alpha) {
        auto model = SacModel::create(3, cfg, 9);
        zero_params(model.critic1, "q");
        zero_params(model.critic2, "q");
        model.log_alpha = std::log(alpha);
        SacLearner learner(model, cfg);
        Rng rng(1);
        for (int i = 0; i < 200; ++i) learner.update_actor(b, rng);
        Rng eval(2);
        double lp = 0.0;
        learner.update_actor(b, eval, &lp);
        return -lp;
    };
    const double initial = [&] {
        SacLearner l(SacModel::create(3, cfg, 9), cfg);
        Rng eval(2);
        double lp = 0.0;
        l.update_actor(b, eval, &lp);
        return -lp;
    }();
    const double lo = entropy_after(0.05), hi = entropy_after(0.5);
    CHECK(lo > initial);
    CHECK(hi > lo);
}

TEST_CASE("temperature update direction") {
    auto cfg = tiny_sac();
    auto run = [&](double mean_log_prob) {
        SacLearner l(SacModel::create(3, cfg, 1), cfg);
        const double before = l.model().alpha();
        return l.update_alpha(mean_log_prob) - before;
    };
    // target entropy -2: log pi above 2 means too little entropy, so alpha grows
    CHECK(run(5.0) > 0.0);
    CHECK(run(-10.0) < 0.0);
    CHECK(run(2.0) == 0.0);

    cfg.optimizer = "sgd_momentum";
    CHECK(run(5.0) > 0.0);
    CHECK(run(-10.0) < 0.0);
    CHECK(run(2.0) == 0.0);
}

TEST_CASE("soft update") {
    const auto a = SacModel::create(3, tiny_sac(), 1);
    const auto b = SacModel::create(3, tiny_sac(), 2);
    ad::ParameterSet t = a.critic1;
    soft_update(t, b.critic1, 0.0);
    for (std::size_t i = 0; i < t.items().size(); ++i)
        CHECK(t.items()[i].value.matrix() == a.critic1.items()[i].value.matrix());
    soft_update(t, b.critic1, 1.0);
    for (std::size_t i = 0; i < t.items().size(); ++i)
        CHECK(t.items()[i].value.matrix() == b.critic1.items()[i].value.matrix());
    t = a.critic1;
    soft_update(t, b.critic1, 0.25);
    const auto& w = t.at("fc1.weight").value.matrix();
    CHECK((w - (0.25 * b.critic1.at("fc1.weight").value.matrix() + 0.75 * a.critic1.at("fc1.weight").value.matrix()))
              .cwiseAbs()
              .maxCoeff() <= 1e-15);
    CHECK_THROWS_AS(soft_update(t, b.critic1, 1.5), ContractError);
    CHECK_THROWS_AS(soft_update(t, b.critic1, -0.1), ContractError);
}

TEST_CASE("targets start as copies of the critics") {
    const auto m = SacModel::create(3, tiny_sac(), 1);
    for (std::size_t i = 0; i < m.critic1.items().size(); ++i) {
        CHECK(m.target1.items()[i].value.matrix() == m.critic1.items()[i].value.matrix());
        CHECK(m.target2.items()[i].value.matrix() == m.critic2.items()[i].value.matrix());
    }
    CHECK(m.alpha() == doctest::Approx(0.2));
}

// ---- training loop ---------------------------------------------------------------

TEST_CASE("short SAC runs are reproducible and stay inside the area") {
    const auto cfg = tiny_scenario();
    const auto gnn = tiny_gnn(cfg);
    Rng rng(21);
    const auto topo = channel::sample_topology(cfg, rng);
    const auto seeds = deploy::fading_seed_set(5, 6, 2);
    auto sc = tiny_sac();
    sc.fading_draws = 2;
    const auto a = train_sac(topo, cfg, sc, gnn, seeds, 3);
    const auto b = train_sac(topo, cfg, sc, gnn, seeds, 3);
    REQUIRE(a.episodes.size() == 3);
    REQUIRE(a.trace.size() == sc.episode_length + 1);
    CHECK(a.trace[0].position == cfg.area_center());
    for (std::size_t i = 0; i < a.episodes.size(); ++i) {
        CHECK(a.episodes[i].cumulative_reward == b.episodes[i].cumulative_reward);
        CHECK(a.episodes[i].final_secrecy_rate == b.episodes[i].final_secrecy_rate);
        CHECK(a.episodes[i].cumulative_reward >= 0.0);
    }
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].position == b.trace[i].position);
        CHECK(a.trace[i].reward == b.trace[i].reward);
        CHECK(topo.inside(a.trace[i].position));
        if (i > 0) {
            const double step = std::hypot(a.trace[i].position.x - a.trace[i - 1].position.x,
                                           a.trace[i].position.y - a.trace[i - 1].position.y);
            CHECK(step <= sc.step_scale * std::sqrt(2.0) + 1e-12);
        }
    }
    CHECK(a.final_position == a.trace.back().position);
    CHECK(a.final_reward == a.trace.back().reward);
}

TEST_CASE("SAC config validation") {
    SacConfig c;
    CHECK_NOTHROW(c.validate());
    c.optimizer = "rmsprop";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SacConfig{};
    c.tau = 2.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
