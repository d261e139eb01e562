#include "support/gradcheck.hpp"

#include "uavsec/autodiff.hpp"
#include "uavsec/errors.hpp"
#include "uavsec/layers.hpp"

#include <doctest.h>

#include <cmath>

using namespace uavsec;
using namespace uavsec::ad;
using testsupport::check_gradients;
using testsupport::random_tensor;

namespace {

Tensor mat(std::initializer_list<std::initializer_list<double>> rows) { return Tensor::from_rows(rows); }

void require_equal(const Tensor& a, const Tensor& b, double tol = 0.0) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) CHECK(std::abs(a(r, c) - b(r, c)) <= tol);
}

}  // namespace

TEST_CASE("matmul with the identity returns the left operand") {
    Rng rng(3);
    Tape tape;
    const Tensor a = random_tensor(4, 4, rng);
    Var out = matmul(tape.constant(a), tape.constant(Tensor(Matrix::Identity(4, 4))));
    require_equal(out.value(), a);
}

TEST_CASE("max over a set is elementwise") {
    Tape tape;
    Var m = max_over_set({tape.constant(mat({{1, 5}})), tape.constant(mat({{3, 2}}))});
    require_equal(m.value(), mat({{3, 5}}));
}

TEST_CASE("concat joins along columns and rows") {
    Tape tape;
    Var a = tape.constant(mat({{1, 2}}));
    Var b = tape.constant(mat({{3}}));
    require_equal(concat({a, b}, 1).value(), mat({{1, 2, 3}}));
    require_equal(concat({a, a}, 0).value(), mat({{1, 2}, {1, 2}}));
    CHECK_THROWS_AS(concat({a, b}, 0), DimensionError);
}

TEST_CASE("prelu values and slope gradient") {
    Tape tape;
    CHECK(prelu(tape.constant(Tensor::scalar(2.0)), tape.constant(Tensor::scalar(0.25))).item() == 2.0);
    CHECK(prelu(tape.constant(Tensor::scalar(-2.0)), tape.constant(Tensor::scalar(0.25))).item() == -0.5);

    Tape t2;
    Var slope = t2.variable(Tensor::scalar(0.25));
    Var x = t2.variable(Tensor::scalar(-2.0));
    t2.backward(prelu(x, slope));
    CHECK(t2.grad(slope).item() == -2.0);
    CHECK(t2.grad(x).item() == 0.25);
}

TEST_CASE("prelu with per-column slopes") {
    Tape tape;
    Var y = prelu(tape.constant(mat({{-1, -1, 2}})), tape.constant(mat({{0.1, 0.2, 0.3}})));
    require_equal(y.value(), mat({{-0.1, -0.2, 2}}), 1e-15);
}

TEST_CASE("backward of x squared at 3 is 6") {
    Tape tape;
    Var x = tape.variable(Tensor::scalar(3.0));
    tape.backward(square(x));
    CHECK(tape.grad(x).item() == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("fan-out accumulates additively") {
    Tape tape;
    Var x = tape.variable(Tensor::scalar(1.0));
    tape.backward(add(x, x));
    CHECK(tape.grad(x).item() == 2.0);
}

TEST_CASE("backward needs a scalar root") {
    Tape tape;
    Var x = tape.variable(mat({{1, 2}}));
    CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("sum(tanh(Wx)) gradients match central differences") {
    Rng rng(11);
    const auto res = check_gradients(
        [](Tape&, const std::vector<Var>& v) { return sum(ad::tanh(matmul(v[0], v[1]))); },
        {random_tensor(5, 4, rng), random_tensor(4, 1, rng)});
    CHECK(res.relative_error <= 1e-6);
}

TEST_CASE("domain and shape errors") {
    Tape tape;
    CHECK_THROWS_AS(ad::log(tape.constant(Tensor::scalar(0.0))), DomainError);
    CHECK_THROWS_AS(ad::log(tape.constant(Tensor::scalar(-1.0))), DomainError);
    CHECK_THROWS_AS(ad::sqrt(tape.constant(Tensor::scalar(-1.0))), DomainError);
    CHECK_THROWS_AS(matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 3))), DimensionError);
    CHECK_THROWS_AS(add(tape.constant(Tensor(2, 3)), tape.constant(Tensor(3, 2))), DimensionError);
    CHECK_THROWS_AS(ad::exp(tape.constant(Tensor::scalar(1000.0))), DomainError);
}

TEST_CASE("sgd_step") {
    Tensor p = Tensor::scalar(1.0);
    sgd_step(p, Tensor::scalar(2.0), 0.1);
    CHECK(p.item() == doctest::Approx(0.8).epsilon(1e-15));

    Tensor q = Tensor::scalar(1.5);
    sgd_step(q, Tensor::scalar(0.0), 0.005);
    CHECK(q.item() == 1.5);

    CHECK_THROWS_AS(sgd_step(p, Tensor(2, 1), 0.1), DimensionError);
    CHECK_THROWS_AS(sgd_step(p, Tensor::scalar(1.0), 0.0), DomainError);
}

TEST_CASE("max over a set routes the gradient to the lowest-index winner on ties") {
    Tape tape;
    Var a = tape.variable(mat({{1, 2}}));
    Var b = tape.variable(mat({{1, 3}}));
    Var c = tape.variable(mat({{0, 3}}));
    tape.backward(sum(max_over_set({a, b, c})));
    require_equal(tape.grad(a), mat({{1, 0}}));
    require_equal(tape.grad(b), mat({{0, 1}}));
    require_equal(tape.grad(c), mat({{0, 0}}));
}

TEST_CASE("max over neighbors excludes the node itself and returns zeros for singletons") {
    Tape tape;
    Var x = tape.constant(mat({{1, 5}, {3, 2}, {2, 4}}));
    require_equal(max_over_neighbors(x, 3).value(), mat({{3, 4}, {2, 5}, {3, 5}}));
    require_equal(max_over_neighbors(x, 1).value(), mat({{0, 0}, {0, 0}, {0, 0}}));
}

TEST_CASE("clamp_min has zero gradient at or below the floor") {
    Tape tape;
    Var x = tape.variable(mat({{-1, 0, 2}}));
    tape.backward(sum(clamp_min(x, 0.0)));
    require_equal(tape.grad(x), mat({{0, 0, 1}}));
}

TEST_CASE("segment sums and gathers") {
    Tape tape;
    Var x = tape.variable(mat({{1, 2}, {3, 4}, {5, 6}, {7, 8}}));
    require_equal(segment_sum_rows(x, 2).value(), mat({{4, 6}, {12, 14}}));
    Var g = gather_rows(x, {3, 0, 3});
    require_equal(g.value(), mat({{7, 8}, {1, 2}, {7, 8}}));
    tape.backward(sum(g));
    require_equal(tape.grad(x), mat({{1, 1}, {0, 0}, {0, 0}, {2, 2}}));
}

TEST_CASE("tape evaluation is bit-identical across repeats") {
    auto run = [] {
        const auto g = testsupport::random_graph_inputs(5);
        Tape tape;
        std::vector<Var> v;
        for (const auto& t : g.inputs) v.push_back(tape.variable(t));
        Var root = testsupport::random_graph(tape, v, 5, nullptr);
        tape.backward(root);
        std::vector<double> out{root.item()};
        for (const auto& var : v) {
            const auto f = tape.grad(var).flat();
            out.insert(out.end(), f.begin(), f.end());
        }
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("random composite graphs pass the finite-difference check") {
    const auto summary = testsupport::check_random_graphs(25, 1000);
    CHECK(summary.checked == 25);
    CHECK(summary.worst_relative_error <= 1e-5);
}

TEST_CASE("parameters receive gradients through a binder") {
    Rng rng(2);
    ParameterSet params;
    add_affine(params, "fc", 3, 2, rng);
    add_prelu(params, "act");
    CHECK(params.at("act.slope").value.item() == kPreluInitSlope);
    CHECK(params.at("fc.bias").value.matrix().isZero());
    const double bound = std::sqrt(6.0 / 5.0);
    CHECK(params.at("fc.weight").value.matrix().cwiseAbs().maxCoeff() <= bound);

    Tape tape;
    Binder bind(tape, params);
    Var x = tape.constant(mat({{1, -2, 0.5}}));
    Var y = sum(ad::prelu(bind, "act", affine(bind, "fc", x)));
    params.zero_grad();
    tape.backward(y);
    CHECK(params.at("fc.bias").grad.matrix().cwiseAbs().maxCoeff() > 0.0);

    Tape frozen;
    Binder cbind(frozen, static_cast<const ParameterSet&>(params));
    CHECK_FALSE(cbind.trainable());
}

TEST_CASE("momentum and adam steps move against the gradient") {
    ParameterSet p;
    p.add("w", Tensor::scalar(1.0));
    p.at("w").grad = Tensor::scalar(1.0);
    MomentumSgd sgd(0.1, 0.9);
    sgd.step(p);
    CHECK(p.at("w").value.item() == doctest::Approx(0.9));
    sgd.step(p);
    CHECK(p.at("w").value.item() == doctest::Approx(0.9 - 0.1 * 1.9));

    ParameterSet q;
    q.add("w", Tensor::scalar(1.0));
    q.at("w").grad = Tensor::scalar(4.0);
    Adam adam(0.01);
    adam.step(q);
    CHECK(q.at("w").value.item() == doctest::Approx(0.99).epsilon(1e-6));
}

TEST_CASE("gradient clipping bounds the global norm") {
    ParameterSet p;
    p.add("a", Tensor::scalar(0.0)).grad = Tensor::scalar(3.0);
    p.add("b", Tensor::scalar(0.0)).grad = Tensor::scalar(4.0);
    CHECK(grad_norm(p) == doctest::Approx(5.0));
    clip_grad_norm(p, 1.0);
    CHECK(grad_norm(p) == doctest::Approx(1.0));
}
