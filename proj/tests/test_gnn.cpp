#include "uavsec/errors.hpp"
#include "uavsec/gnn.hpp"
#include "uavsec/training.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace uavsec;
using namespace uavsec::gnn;
using ad::Matrix;

namespace {

Matrix prelu_ref(const Matrix& x, double slope) { return x.unaryExpr([slope](double v) { return v >= 0 ? v : slope * v; }); }

Matrix affine_ref(const ad::ParameterSet& p, const std::string& name, const Matrix& x) {
    const Matrix& w = p.at(name + ".weight").value.matrix();
    const Matrix& b = p.at(name + ".bias").value.matrix();
    return (x * w).rowwise() + b.row(0);
}

// One layer written directly from the layer definition, for a single sample.
Matrix layer_ref(const GnnModel& m, std::size_t d, const Matrix& features, const Matrix& emb) {
    const std::string l = "layer" + std::to_string(d) + ".";
    const auto k = features.rows();
    Matrix z(k, features.cols() + emb.cols());
    z << features, emb;
    const Matrix msg = affine_ref(m.params, l + "gen", z);
    const Matrix t = prelu_ref(affine_ref(m.params, l + "aggr", msg), m.params.at(l + "aggr_act.slope").value.item());
    Matrix agg = Matrix::Zero(k, t.cols());
    for (Eigen::Index i = 0; i < k; ++i) {
        bool first = true;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (j == i) continue;
            agg.row(i) = first ? Matrix(t.row(j)) : Matrix(agg.row(i).cwiseMax(t.row(j)));
            first = false;
        }
    }
    Matrix c(k, msg.cols() + agg.cols());
    c << msg, agg;
    const Matrix h = prelu_ref(affine_ref(m.params, l + "out1", c), m.params.at(l + "out_act.slope").value.item());
    return affine_ref(m.params, l + "out2", h);
}

std::vector<std::size_t> random_perm(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

GnnModel small_model(std::size_t n, std::size_t layers, std::uint64_t seed) {
    const channel::ScenarioConfig cfg;
    return GnnModel::create(GnnArchitecture::for_antennas(n, layers), channel_feature_scale(cfg), seed);
}

}  // namespace

TEST_CASE("architecture widths scale with the antenna count") {
    const auto a = GnnArchitecture::for_antennas(8);
    CHECK(a.layers == 5);
    CHECK(a.message_width == 32);
    CHECK(a.aggregation_width == 32);
    CHECK(a.hidden_width == 64);
    const GnnModel m = GnnModel::create(a, 1.0, 1);
    CHECK(m.params.size() == 5 * 10);
    CHECK(m.params.at("layer4.out2.weight").value.cols() == 16);
}

TEST_CASE("initial embeddings are unit-norm matched filters") {
    channel::ScenarioConfig cfg;
    Rng rng(3);
    const auto sets = sample_scenarios(cfg, 1, rng);
    const auto e = init_embeddings(sets[0]);
    const auto e2 = init_embeddings(sets[0]);
    REQUIRE(e.size() == cfg.users);
    for (std::size_t k = 0; k < e.size(); ++k) {
        CHECK(e[k].norm() == doctest::Approx(1.0).epsilon(1e-14));
        // collinear: |<e, h>| = ||h||
        CHECK(std::abs(e[k].dot(sets[0].users[k])) == doctest::Approx(sets[0].users[k].norm()).epsilon(1e-12));
        CHECK(e[k] == e2[k]);
    }
    channel::ChannelSet bad = sets[0];
    bad.users[2].setZero();
    CHECK_THROWS_AS(init_embeddings(bad), DegenerateInputError);
}

TEST_CASE("one layer matches a direct evaluation, including K = 1") {
    const GnnModel m = small_model(3, 2, 5);
    for (std::size_t users : {1u, 3u, 5u}) {
        channel::ScenarioConfig cfg;
        cfg.users = users;
        cfg.antennas = 3;
        Rng rng(users);
        const auto sets = sample_scenarios(cfg, 1, rng);
        const GraphInputs in = make_graph_inputs(sets, m.feature_scale);
        ad::Tape tape;
        ad::Binder bind(tape, static_cast<const ad::ParameterSet&>(m.params));
        ad::Var out = gcn_layer(bind, m.arch, 1, tape.constant(ad::Tensor(in.channel_features)),
                                tape.constant(ad::Tensor(in.embeddings)), users);
        const Matrix ref = layer_ref(m, 1, in.channel_features, in.embeddings);
        CHECK((out.value().matrix() - ref).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("forward output meets the power budget") {
    const GnnModel m = small_model(8, 5, 2);
    channel::ScenarioConfig cfg;
    Rng rng(8);
    const auto sets = sample_scenarios(cfg, 20, rng);
    for (double pmax : {1.0, 0.3, 4.0}) {
        for (const auto& b : gnn_forward_batch(sets, m, pmax)) CHECK(std::abs(b.total_power() - pmax) <= 1e-9);
    }
}

TEST_CASE("batched and single forward passes agree") {
    const GnnModel m = small_model(4, 3, 9);
    channel::ScenarioConfig cfg;
    cfg.antennas = 4;
    Rng rng(4);
    const auto sets = sample_scenarios(cfg, 5, rng);
    const auto batch = gnn_forward_batch(sets, m, 1.0);
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto single = gnn_forward(sets[i], m, 1.0);
        for (std::size_t k = 0; k < cfg.users; ++k) CHECK((single.vectors[k] - batch[i].vectors[k]).norm() <= 1e-12);
    }
}

TEST_CASE("permutation equivariance") {
    const GnnModel m = small_model(8, 5, 11);
    channel::ScenarioConfig cfg;
    Rng rng(12);
    const auto sets = sample_scenarios(cfg, 10, rng);
    for (const auto& cs : sets) {
        const auto perm = random_perm(cfg.users, rng);
        const auto w = gnn_forward(cs, m, 1.0);
        const auto wp = gnn_forward(cs.permuted(perm), m, 1.0);
        for (std::size_t i = 0; i < perm.size(); ++i) CHECK((wp.vectors[i] - w.vectors[perm[i]]).norm() <= 1e-9);
        const double s = secrecy::secrecy_report(cs, w, cfg.noise_power).sum;
        const double sp = secrecy::secrecy_report(cs.permuted(perm), wp, cfg.noise_power).sum;
        CHECK(std::abs(s - sp) <= 1e-9);
    }
}

TEST_CASE("a model built at K = 8 runs unchanged at K = 12 and K = 1") {
    const GnnModel m = small_model(8, 5, 13);
    for (std::size_t users : {12u, 1u}) {
        channel::ScenarioConfig cfg;
        cfg.users = users;
        Rng rng(users);
        const auto sets = sample_scenarios(cfg, 3, rng);
        for (const auto& b : gnn_forward_batch(sets, m, 1.0)) {
            CHECK(b.size() == users);
            CHECK(std::abs(b.total_power() - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("antenna mismatch is a dimension error") {
    const GnnModel m = small_model(4, 2, 1);
    channel::ScenarioConfig cfg;
    Rng rng(1);
    const auto sets = sample_scenarios(cfg, 1, rng);
    CHECK_THROWS_AS(gnn_forward(sets[0], m, 1.0), DimensionError);
}

TEST_CASE("forward cost stays within O(K^2 + K N^2) at fixed antenna count") {
    for (std::size_t n : {2u, 4u, 8u, 16u}) {
        const GnnModel m = small_model(n, 5, 1);
        std::vector<double> cost, ratios;
        for (std::size_t k : {1u, 2u, 4u, 8u, 16u, 32u, 64u, 128u}) {
            cost.push_back(static_cast<double>(forward_multiply_adds(m, k)));
            ratios.push_back(cost.back() / static_cast<double>(k * k + k * n * n));
        }
        CAPTURE(n);
        CHECK(*std::min_element(ratios.begin(), ratios.end()) > 0.0);
        for (std::size_t i = 1; i < cost.size(); ++i) {
            CHECK(cost[i] / cost[i - 1] >= 2.0);
            CHECK(cost[i] / cost[i - 1] <= 4.0);
        }
        // bounded once K is large
        CHECK(ratios[7] <= 1.05 * ratios[6]);
    }
}

TEST_CASE("training loss gradient matches finite differences") {
    const GnnModel base = small_model(2, 2, 21);
    channel::ScenarioConfig cfg;
    cfg.users = 3;
    cfg.antennas = 2;
    Rng rng(22);
    const auto sets = sample_scenarios(cfg, 2, rng);
    const GraphInputs in = make_graph_inputs(sets, base.feature_scale);
    const auto batch = secrecy::make_channel_batch(sets);

    auto loss_of = [&](const GnnModel& m) {
        ad::Tape tape;
        ad::Binder bind(tape, static_cast<const ad::ParameterSet&>(m.params));
        return secrecy::secrecy_loss_real(tape, batch, gnn_embeddings(bind, m, in), cfg.noise_power, 1.0).item();
    };

    GnnModel m = base;
    ad::Tape tape;
    ad::Binder bind(tape, m.params);
    m.params.zero_grad();
    tape.backward(secrecy::secrecy_loss_real(tape, batch, gnn_embeddings(bind, m, in), cfg.noise_power, 1.0));

    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    const double h = 1e-6;
    GnnModel probe = base;
    for (std::size_t i = 0; i < m.params.items().size(); ++i) {
        auto& pv = probe.params.items()[i].value;
        const auto& g = m.params.items()[i].grad;
        for (std::size_t r = 0; r < pv.rows(); ++r) {
            for (std::size_t c = 0; c < pv.cols(); ++c) {
                const double x = pv(r, c);
                pv(r, c) = x + h;
                const double fp = loss_of(probe);
                pv(r, c) = x - h;
                const double fm = loss_of(probe);
                pv(r, c) = x;
                const double num = (fp - fm) / (2 * h);
                diff2 += (num - g(r, c)) * (num - g(r, c));
                a2 += g(r, c) * g(r, c);
                n2 += num * num;
            }
        }
    }
    CHECK(std::sqrt(a2) > 0.0);
    CHECK(std::sqrt(diff2) / std::max(std::sqrt(a2), std::sqrt(n2)) <= 1e-5);
}

TEST_CASE("short training runs are deterministic and finite") {
    channel::ScenarioConfig cfg;
    cfg.users = 3;
    cfg.antennas = 4;
    TrainConfig tc;
    tc.epochs = 4;
    tc.steps_per_epoch = 2;
    tc.batch_size = 8;
    const auto a = train_gnn(cfg, tc, 5, 2);
    const auto b = train_gnn(cfg, tc, 5, 2);
    REQUIRE(a.loss_curve.size() == 4);
    CHECK(a.loss_curve == b.loss_curve);
    for (double l : a.loss_curve) CHECK(std::isfinite(l));
    CHECK(a.model.params.all_finite());
}

TEST_CASE("transfer with zero epochs leaves the model unchanged") {
    const GnnModel m = small_model(8, 2, 3);
    channel::ScenarioConfig cfg;
    cfg.users = 12;
    TrainConfig tc;
    tc.epochs = 0;
    const auto r = transfer_train(m, cfg, tc, 1);
    CHECK(r.loss_curve.empty());
    for (std::size_t i = 0; i < m.params.items().size(); ++i)
        CHECK(r.model.params.items()[i].value.matrix() == m.params.items()[i].value.matrix());

    channel::ScenarioConfig other;
    other.antennas = 4;
    CHECK_THROWS_AS(transfer_train(m, other, tc, 1), DimensionError);
}

TEST_CASE("a pretrained model starts a new K from a lower loss than a fresh one") {
    channel::ScenarioConfig cfg;
    cfg.users = 4;
    cfg.antennas = 4;
    TrainConfig tc;
    tc.epochs = 30;
    tc.steps_per_epoch = 5;
    tc.batch_size = 32;
    const auto pre = train_gnn(cfg, tc, 17, 3);
    channel::ScenarioConfig bigger = cfg;
    bigger.users = 6;
    const GnnModel fresh = GnnModel::create(pre.model.arch, pre.model.feature_scale, 17);
    CHECK(evaluate_loss(pre.model, bigger, 100, 5) < evaluate_loss(fresh, bigger, 100, 5));
}
