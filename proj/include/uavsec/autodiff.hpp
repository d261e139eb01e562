#pragma once

// Minimal reverse-mode automatic differentiation over dense rank-2 tensors.
//
// A Tape records every primitive evaluated through the free functions below.
// Nodes are appended in evaluation order, so the tape is always in
// topological order and backward() is a single reverse sweep. Every
// primitive validates shapes and checks its output for NaN/Inf.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace uavsec::ad {

using Matrix = Eigen::MatrixXd;

class Tensor {
  public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    explicit Tensor(Matrix values);

    static Tensor scalar(double v);
    static Tensor row(const std::vector<double>& values);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return static_cast<std::size_t>(m_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(m_.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(m_.size()); }
    std::vector<std::size_t> shape() const { return {rows(), cols()}; }
    bool same_shape(const Tensor& other) const { return rows() == other.rows() && cols() == other.cols(); }

    double operator()(std::size_t r, std::size_t c) const { return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)); }
    double& operator()(std::size_t r, std::size_t c) { return m_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)); }

    // Value of a 1x1 tensor.
    double item() const;
    bool all_finite() const { return m_.allFinite(); }

    const Matrix& matrix() const { return m_; }
    Matrix& matrix() { return m_; }

    // Row-major flattening, used by the checkpoint format.
    std::vector<double> flat() const;
    static Tensor from_flat(std::size_t rows, std::size_t cols, const std::vector<double>& values);

    std::string shape_string() const;

  private:
    Matrix m_;
};

// A named learnable array with its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

// Ordered collection of parameters. References returned by add()/at() stay
// valid for the lifetime of the set (deque storage).
class ParameterSet {
  public:
    Parameter& add(std::string name, Tensor init);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    const Parameter* find(const std::string& name) const;

    std::deque<Parameter>& items() { return params_; }
    const std::deque<Parameter>& items() const { return params_; }
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    void zero_grad();
    bool all_finite() const;
    // Throws DimensionError unless both sets hold the same names and shapes.
    void check_compatible(const ParameterSet& other) const;

  private:
    std::deque<Parameter> params_;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
  public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    double item() const { return value().item(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::size_t id() const { return id_; }
    Tape& tape() const;
    bool valid() const { return tape_ != nullptr; }

  private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var variable(Tensor value);
    // Leaf bound to a parameter: backward() adds the node gradient into param.grad.
    Var parameter(Parameter& param);

    // Reverse sweep from a 1x1 root. Parameter leaves receive their gradient.
    void backward(Var root);
    // Gradient of the last backward() root with respect to v (zeros if unreached).
    Tensor grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }
    // Approximate multiply-add count of all recorded primitives.
    std::uint64_t multiply_adds() const { return multiply_adds_; }

    // Internal: used by primitive implementations.
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;
    Var push(Tensor value, std::vector<std::size_t> parents, BackwardFn fn, std::uint64_t cost, const char* op);
    const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    void accumulate(std::size_t id, const Matrix& g);

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        Parameter* param = nullptr;
        std::vector<std::size_t> parents;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    std::uint64_t multiply_adds_ = 0;
};

// ---- primitives -------------------------------------------------------------

Var matmul(Var a, Var b);
// Elementwise binary ops broadcast dimensions of size 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
// axis 0 stacks rows, axis 1 stacks columns.
Var concat(const std::vector<Var>& parts, int axis = 1);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
// Row selection with repetition; gradient scatters back additively.
Var gather_rows(Var a, const std::vector<std::size_t>& rows);
Var sum(Var a);
// Sum across columns: [r, c] -> [r, 1].
Var sum_cols(Var a);
// Sum across rows: [r, c] -> [1, c].
Var sum_rows(Var a);
// Sums consecutive blocks of `group` rows: [g*n, c] -> [n, c].
Var segment_sum_rows(Var a, std::size_t group);
// Elementwise maximum over a set of equally shaped tensors. Ties resolve to
// the lowest set index; the gradient routes only to that element.
Var max_over_set(const std::vector<Var>& set);
// Rows are grouped in consecutive blocks of `group`. Row k of a block receives
// the elementwise max over the other rows of its block, or zeros when the
// block has a single row. Same tie rule as max_over_set.
Var max_over_neighbors(Var a, std::size_t group);
Var square(Var a);
Var sqrt(Var a);
Var log(Var a);
Var exp(Var a);
Var tanh(Var a);
// slope is 1x1 (shared) or 1xC (per column).
Var prelu(Var x, Var slope);
// max(x, floor); zero gradient wherever x <= floor.
Var clamp_min(Var a, double floor);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// ---- training utilities ----------------------------------------------------

// p <- p - lr * g
void sgd_step(Tensor& param, const Tensor& grad, double lr);
void sgd_step(ParameterSet& params, double lr);

double grad_norm(const ParameterSet& params);
// Rescales all gradients so their global L2 norm is at most max_norm.
void clip_grad_norm(ParameterSet& params, double max_norm);

// Heavy-ball momentum on top of sgd_step: v <- mu*v + g; p <- p - lr*v.
class MomentumSgd {
  public:
    MomentumSgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
    void step(ParameterSet& params);
    double learning_rate() const { return lr_; }

  private:
    double lr_;
    double momentum_;
    std::vector<Matrix> velocity_;
};

class Adam {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(ParameterSet& params);

  private:
    double lr_, beta1_, beta2_, eps_;
    long step_count_ = 0;
    std::vector<Matrix> m_, v_;
};

// Uniform on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

inline constexpr double kPreluInitSlope = 0.25;

}  // namespace uavsec::ad
