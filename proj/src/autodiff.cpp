#include "uavsec/autodiff.hpp"

#include "uavsec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace uavsec::ad {

using Eigen::Index;

// ---- Tensor -----------------------------------------------------------------

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : m_(Matrix::Constant(static_cast<Index>(rows), static_cast<Index>(cols), fill)) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("tensor dimensions must be positive");
    }
}

Tensor::Tensor(Matrix values) : m_(std::move(values)) {
    if (m_.rows() == 0 || m_.cols() == 0) {
        throw DimensionError("tensor dimensions must be positive");
    }
}

Tensor Tensor::scalar(double v) { return Tensor(1, 1, v); }

Tensor Tensor::row(const std::vector<double>& values) {
    Tensor t(1, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) t(0, i) = values[i];
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor t(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged tensor literal");
        std::size_t j = 0;
        for (double v : row) t(i, j++) = v;
        ++i;
    }
    return t;
}

double Tensor::item() const {
    if (rows() != 1 || cols() != 1) {
        throw DimensionError("item() on non-scalar tensor of shape " + shape_string());
    }
    return m_(0, 0);
}

std::vector<double> Tensor::flat() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t c = 0; c < cols(); ++c) out.push_back((*this)(r, c));
    return out;
}

Tensor Tensor::from_flat(std::size_t rows, std::size_t cols, const std::vector<double>& values) {
    if (values.size() != rows * cols) {
        throw DimensionError("flat value count does not match shape");
    }
    Tensor t(rows, cols);
    std::size_t i = 0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t(r, c) = values[i++];
    return t;
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << "[" << m_.rows() << "," << m_.cols() << "]";
    return os.str();
}

// ---- ParameterSet -----------------------------------------------------------

Parameter& ParameterSet::add(std::string name, Tensor init) {
    if (find(name) != nullptr) {
        throw ContractError("duplicate parameter name: " + name);
    }
    Tensor grad(init.rows(), init.cols());
    params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
    return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return p;
    throw ContractError("unknown parameter: " + name);
}

const Parameter& ParameterSet::at(const std::string& name) const {
    const Parameter* p = find(name);
    if (p == nullptr) throw ContractError("unknown parameter: " + name);
    return *p;
}

const Parameter* ParameterSet::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.grad.matrix().setZero();
}

bool ParameterSet::all_finite() const {
    return std::all_of(params_.begin(), params_.end(), [](const Parameter& p) { return p.value.all_finite(); });
}

void ParameterSet::check_compatible(const ParameterSet& other) const {
    if (params_.size() != other.params_.size()) {
        throw DimensionError("parameter sets differ in size");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& a = params_[i];
        const auto& b = other.params_[i];
        if (a.name != b.name || !a.value.same_shape(b.value)) {
            throw DimensionError("parameter mismatch at " + a.name);
        }
    }
}

// ---- Tape -------------------------------------------------------------------

const Tensor& Var::value() const { return tape().value_of(id_); }

Tape& Var::tape() const {
    if (tape_ == nullptr) throw ContractError("use of an unbound Var");
    return *tape_;
}

Var Tape::constant(Tensor value) { return push(std::move(value), {}, nullptr, 0, "constant"); }

Var Tape::variable(Tensor value) {
    Var v = push(std::move(value), {}, nullptr, 0, "variable");
    nodes_[v.id()].requires_grad = true;
    return v;
}

Var Tape::parameter(Parameter& param) {
    Var v = push(param.value, {}, nullptr, 0, "parameter");
    nodes_[v.id()].requires_grad = true;
    nodes_[v.id()].param = &param;
    return v;
}

Var Tape::push(Tensor value, std::vector<std::size_t> parents, BackwardFn fn, std::uint64_t cost, const char* op) {
    if (!value.all_finite()) {
        throw DomainError(std::string("non-finite value produced by ") + op);
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = std::any_of(parents.begin(), parents.end(), [this](std::size_t p) { return nodes_[p].requires_grad; });
    if (node.requires_grad) node.backward = std::move(fn);
    node.parents = std::move(parents);
    nodes_.push_back(std::move(node));
    multiply_adds_ += cost;
    return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = Tensor(g);
        n.has_grad = true;
    } else {
        n.grad.matrix() += g;
    }
}

void Tape::backward(Var root) {
    if (&root.tape() != this) throw ContractError("backward root belongs to another tape");
    if (root.rows() != 1 || root.cols() != 1) {
        throw ContractError("backward root must be scalar, got " + root.value().shape_string());
    }
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor();
    }
    if (!nodes_[root.id()].requires_grad) return;
    nodes_[root.id()].grad = Tensor::scalar(1.0);
    nodes_[root.id()].has_grad = true;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad) continue;
        if (n.backward) n.backward(*this, n.grad);
        if (n.param != nullptr) {
            if (!n.param->grad.same_shape(n.grad)) n.param->grad = Tensor(n.grad.rows(), n.grad.cols());
            n.param->grad.matrix() += n.grad.matrix();
        }
    }
}

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    if (n.has_grad) return n.grad;
    return Tensor(n.value.rows(), n.value.cols());
}

// ---- primitives -------------------------------------------------------------

namespace {

Tape& common_tape(Var a, Var b) {
    if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
    return a.tape();
}

std::pair<Index, Index> broadcast_shape(const Matrix& a, const Matrix& b, const char* op) {
    auto dim = [&](Index x, Index y) -> Index {
        if (x == y) return x;
        if (x == 1) return y;
        if (y == 1) return x;
        std::ostringstream os;
        os << op << ": cannot broadcast [" << a.rows() << "," << a.cols() << "] with [" << b.rows() << "," << b.cols() << "]";
        throw DimensionError(os.str());
    };
    return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
    if (m.rows() == rows && m.cols() == cols) return m;
    return m.replicate(rows / m.rows(), cols / m.cols());
}

Matrix reduce_to(const Matrix& g, Index rows, Index cols) {
    Matrix out = g;
    if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
    if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
    return out;
}

template <typename F, typename DF>
Var unary(Var a, const char* op, F f, DF df) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    Matrix out = a.value().matrix().unaryExpr(f);
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, df](Tape& tp, const Tensor& g) {
                      const Matrix& x = tp.value_of(ia).matrix();
                      tp.accumulate(ia, g.matrix().cwiseProduct(x.unaryExpr(df)));
                  },
                  a.value().size(), op);
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Matrix& x = a.value().matrix();
    const Matrix& y = b.value().matrix();
    if (x.cols() != y.rows()) {
        throw DimensionError("matmul: " + a.value().shape_string() + " x " + b.value().shape_string());
    }
    const std::size_t ia = a.id(), ib = b.id();
    Matrix out = x * y;
    const auto cost = static_cast<std::uint64_t>(x.rows() * x.cols() * y.cols());
    return t.push(Tensor(std::move(out)), {ia, ib},
                  [ia, ib](Tape& tp, const Tensor& g) {
                      if (tp.requires_grad(ia)) tp.accumulate(ia, g.matrix() * tp.value_of(ib).matrix().transpose());
                      if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value_of(ia).matrix().transpose() * g.matrix());
                  },
                  cost, "matmul");
}

Var add(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Matrix& x = a.value().matrix();
    const Matrix& y = b.value().matrix();
    auto [r, c] = broadcast_shape(x, y, "add");
    const std::size_t ia = a.id(), ib = b.id();
    Matrix out = expand(x, r, c) + expand(y, r, c);
    return t.push(Tensor(std::move(out)), {ia, ib},
                  [ia, ib](Tape& tp, const Tensor& g) {
                      const Matrix& xa = tp.value_of(ia).matrix();
                      const Matrix& xb = tp.value_of(ib).matrix();
                      if (tp.requires_grad(ia)) tp.accumulate(ia, reduce_to(g.matrix(), xa.rows(), xa.cols()));
                      if (tp.requires_grad(ib)) tp.accumulate(ib, reduce_to(g.matrix(), xb.rows(), xb.cols()));
                  },
                  static_cast<std::uint64_t>(r * c), "add");
}

Var sub(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Matrix& x = a.value().matrix();
    const Matrix& y = b.value().matrix();
    auto [r, c] = broadcast_shape(x, y, "sub");
    const std::size_t ia = a.id(), ib = b.id();
    Matrix out = expand(x, r, c) - expand(y, r, c);
    return t.push(Tensor(std::move(out)), {ia, ib},
                  [ia, ib](Tape& tp, const Tensor& g) {
                      const Matrix& xa = tp.value_of(ia).matrix();
                      const Matrix& xb = tp.value_of(ib).matrix();
                      if (tp.requires_grad(ia)) tp.accumulate(ia, reduce_to(g.matrix(), xa.rows(), xa.cols()));
                      if (tp.requires_grad(ib)) tp.accumulate(ib, -reduce_to(g.matrix(), xb.rows(), xb.cols()));
                  },
                  static_cast<std::uint64_t>(r * c), "sub");
}

Var mul(Var a, Var b) {
    Tape& t = common_tape(a, b);
    const Matrix& x = a.value().matrix();
    const Matrix& y = b.value().matrix();
    auto [r, c] = broadcast_shape(x, y, "mul");
    const std::size_t ia = a.id(), ib = b.id();
    Matrix out = expand(x, r, c).cwiseProduct(expand(y, r, c));
    return t.push(Tensor(std::move(out)), {ia, ib},
                  [ia, ib, r, c](Tape& tp, const Tensor& g) {
                      const Matrix& xa = tp.value_of(ia).matrix();
                      const Matrix& xb = tp.value_of(ib).matrix();
                      if (tp.requires_grad(ia))
                          tp.accumulate(ia, reduce_to(g.matrix().cwiseProduct(expand(xb, r, c)), xa.rows(), xa.cols()));
                      if (tp.requires_grad(ib))
                          tp.accumulate(ib, reduce_to(g.matrix().cwiseProduct(expand(xa, r, c)), xb.rows(), xb.cols()));
                  },
                  static_cast<std::uint64_t>(r * c), "mul");
}

Var scale(Var a, double factor) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    Matrix out = a.value().matrix() * factor;
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, factor](Tape& tp, const Tensor& g) { tp.accumulate(ia, g.matrix() * factor); },
                  a.value().size(), "scale");
}

Var add_scalar(Var a, double offset) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    Matrix out = a.value().matrix().array() + offset;
    return t.push(Tensor(std::move(out)), {ia}, [ia](Tape& tp, const Tensor& g) { tp.accumulate(ia, g.matrix()); },
                  a.value().size(), "add_scalar");
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw DimensionError("concat of an empty list");
    if (axis != 0 && axis != 1) throw DimensionError("concat axis must be 0 or 1");
    Tape& t = parts.front().tape();
    std::vector<std::size_t> ids;
    std::vector<Index> extents;
    Index rows = 0, cols = 0;
    for (const Var& p : parts) {
        if (&p.tape() != &t) throw ContractError("concat operands live on different tapes");
        const Matrix& m = p.value().matrix();
        if (axis == 1) {
            if (rows == 0) rows = m.rows();
            if (m.rows() != rows) throw DimensionError("concat: row count mismatch");
            cols += m.cols();
            extents.push_back(m.cols());
        } else {
            if (cols == 0) cols = m.cols();
            if (m.cols() != cols) throw DimensionError("concat: column count mismatch");
            rows += m.rows();
            extents.push_back(m.rows());
        }
        ids.push_back(p.id());
    }
    Matrix out(rows, cols);
    Index offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Matrix& m = parts[i].value().matrix();
        if (axis == 1)
            out.middleCols(offset, extents[i]) = m;
        else
            out.middleRows(offset, extents[i]) = m;
        offset += extents[i];
    }
    return t.push(Tensor(std::move(out)), ids,
                  [ids, extents, axis](Tape& tp, const Tensor& g) {
                      Index off = 0;
                      for (std::size_t i = 0; i < ids.size(); ++i) {
                          if (tp.requires_grad(ids[i])) {
                              if (axis == 1)
                                  tp.accumulate(ids[i], g.matrix().middleCols(off, extents[i]));
                              else
                                  tp.accumulate(ids[i], g.matrix().middleRows(off, extents[i]));
                          }
                          off += extents[i];
                      }
                  },
                  static_cast<std::uint64_t>(rows * cols), "concat");
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    if (begin >= end || end > a.cols()) throw DimensionError("slice_cols: range out of bounds");
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const auto b = static_cast<Index>(begin);
    const auto n = static_cast<Index>(end - begin);
    Matrix out = a.value().matrix().middleCols(b, n);
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, b, n](Tape& tp, const Tensor& g) {
                      const Matrix& x = tp.value_of(ia).matrix();
                      Matrix full = Matrix::Zero(x.rows(), x.cols());
                      full.middleCols(b, n) = g.matrix();
                      tp.accumulate(ia, full);
                  },
                  0, "slice_cols");
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    if (begin >= end || end > a.rows()) throw DimensionError("slice_rows: range out of bounds");
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const auto b = static_cast<Index>(begin);
    const auto n = static_cast<Index>(end - begin);
    Matrix out = a.value().matrix().middleRows(b, n);
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, b, n](Tape& tp, const Tensor& g) {
                      const Matrix& x = tp.value_of(ia).matrix();
                      Matrix full = Matrix::Zero(x.rows(), x.cols());
                      full.middleRows(b, n) = g.matrix();
                      tp.accumulate(ia, full);
                  },
                  0, "slice_rows");
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw DimensionError("gather_rows: empty index list");
    Tape& t = a.tape();
    const Matrix& x = a.value().matrix();
    for (std::size_t r : rows)
        if (r >= a.rows()) throw DimensionError("gather_rows: index out of bounds");
    const std::size_t ia = a.id();
    Matrix out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(rows[i]));
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, rows](Tape& tp, const Tensor& g) {
                      const Matrix& xv = tp.value_of(ia).matrix();
                      Matrix full = Matrix::Zero(xv.rows(), xv.cols());
                      for (std::size_t i = 0; i < rows.size(); ++i)
                          full.row(static_cast<Index>(rows[i])) += g.matrix().row(static_cast<Index>(i));
                      tp.accumulate(ia, full);
                  },
                  0, "gather_rows");
}

Var sum(Var a) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const Index r = a.value().matrix().rows(), c = a.value().matrix().cols();
    return t.push(Tensor::scalar(a.value().matrix().sum()), {ia},
                  [ia, r, c](Tape& tp, const Tensor& g) { tp.accumulate(ia, Matrix::Constant(r, c, g.item())); },
                  a.value().size(), "sum");
}

Var sum_cols(Var a) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const Index c = a.value().matrix().cols();
    Matrix out = a.value().matrix().rowwise().sum();
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, c](Tape& tp, const Tensor& g) { tp.accumulate(ia, g.matrix().replicate(1, c)); },
                  a.value().size(), "sum_cols");
}

Var sum_rows(Var a) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const Index r = a.value().matrix().rows();
    Matrix out = a.value().matrix().colwise().sum();
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, r](Tape& tp, const Tensor& g) { tp.accumulate(ia, g.matrix().replicate(r, 1)); },
                  a.value().size(), "sum_rows");
}

Var segment_sum_rows(Var a, std::size_t group) {
    if (group == 0 || a.rows() % group != 0) throw DimensionError("segment_sum_rows: rows not divisible by group");
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const Matrix& x = a.value().matrix();
    const auto gsz = static_cast<Index>(group);
    const Index n = x.rows() / gsz;
    Matrix out = Matrix::Zero(n, x.cols());
    for (Index s = 0; s < n; ++s) out.row(s) = x.middleRows(s * gsz, gsz).colwise().sum();
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, gsz, n](Tape& tp, const Tensor& g) {
                      Matrix full(n * gsz, g.matrix().cols());
                      for (Index s = 0; s < n; ++s) full.middleRows(s * gsz, gsz) = g.matrix().row(s).replicate(gsz, 1);
                      tp.accumulate(ia, full);
                  },
                  a.value().size(), "segment_sum_rows");
}

Var max_over_set(const std::vector<Var>& set) {
    if (set.empty()) throw DimensionError("max_over_set of an empty set");
    Tape& t = set.front().tape();
    const Matrix& first = set.front().value().matrix();
    std::vector<std::size_t> ids;
    for (const Var& v : set) {
        if (&v.tape() != &t) throw ContractError("max_over_set operands live on different tapes");
        if (!v.value().same_shape(set.front().value())) throw DimensionError("max_over_set: shape mismatch");
        ids.push_back(v.id());
    }
    Matrix out = first;
    Eigen::MatrixXi arg = Eigen::MatrixXi::Zero(first.rows(), first.cols());
    for (std::size_t s = 1; s < set.size(); ++s) {
        const Matrix& m = set[s].value().matrix();
        for (Index j = 0; j < m.cols(); ++j)
            for (Index i = 0; i < m.rows(); ++i)
                if (m(i, j) > out(i, j)) {
                    out(i, j) = m(i, j);
                    arg(i, j) = static_cast<int>(s);
                }
    }
    return t.push(Tensor(std::move(out)), ids,
                  [ids, arg](Tape& tp, const Tensor& g) {
                      for (std::size_t s = 0; s < ids.size(); ++s) {
                          if (!tp.requires_grad(ids[s])) continue;
                          Matrix gs = (arg.array() == static_cast<int>(s)).cast<double>().matrix().cwiseProduct(g.matrix());
                          tp.accumulate(ids[s], gs);
                      }
                  },
                  first.size() * set.size(), "max_over_set");
}

Var max_over_neighbors(Var a, std::size_t group) {
    if (group == 0 || a.rows() % group != 0) throw DimensionError("max_over_neighbors: rows not divisible by group");
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    const Matrix& x = a.value().matrix();
    const auto gsz = static_cast<Index>(group);
    const Index blocks = x.rows() / gsz;
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    // source row of each output element, -1 where the neighborhood is empty
    Eigen::MatrixXi src = Eigen::MatrixXi::Constant(x.rows(), x.cols(), -1);
    if (gsz > 1) {
        for (Index b = 0; b < blocks; ++b) {
            const Index base = b * gsz;
            for (Index j = 0; j < x.cols(); ++j) {
                // lowest-index maximum, then lowest-index maximum of the rest
                Index best = base;
                for (Index i = base + 1; i < base + gsz; ++i)
                    if (x(i, j) > x(best, j)) best = i;
                Index second = best == base ? base + 1 : base;
                for (Index i = base; i < base + gsz; ++i)
                    if (i != best && x(i, j) > x(second, j)) second = i;
                for (Index k = base; k < base + gsz; ++k) {
                    const Index from = k == best ? second : best;
                    out(k, j) = x(from, j);
                    src(k, j) = static_cast<int>(from);
                }
            }
        }
    }
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, src](Tape& tp, const Tensor& g) {
                      Matrix full = Matrix::Zero(g.matrix().rows(), g.matrix().cols());
                      for (Index j = 0; j < src.cols(); ++j)
                          for (Index i = 0; i < src.rows(); ++i)
                              if (src(i, j) >= 0) full(src(i, j), j) += g.matrix()(i, j);
                      tp.accumulate(ia, full);
                  },
                  static_cast<std::uint64_t>(x.size() * 2), "max_over_neighbors");
}

Var square(Var a) {
    return unary(a, "square", [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var sqrt(Var a) {
    if ((a.value().matrix().array() <= 0.0).any()) throw DomainError("sqrt of non-positive argument");
    return unary(a, "sqrt", [](double v) { return std::sqrt(v); }, [](double v) { return 0.5 / std::sqrt(v); });
}

Var log(Var a) {
    if ((a.value().matrix().array() <= 0.0).any()) throw DomainError("log of non-positive argument");
    return unary(a, "log", [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Var exp(Var a) {
    return unary(a, "exp", [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var tanh(Var a) {
    return unary(a, "tanh", [](double v) { return std::tanh(v); },
                 [](double v) {
                     const double th = std::tanh(v);
                     return 1.0 - th * th;
                 });
}

Var prelu(Var x, Var slope) {
    Tape& t = common_tape(x, slope);
    const Matrix& xv = x.value().matrix();
    const Matrix& sv = slope.value().matrix();
    if (sv.rows() != 1 || (sv.cols() != 1 && sv.cols() != xv.cols())) {
        throw DimensionError("prelu: slope must be [1,1] or [1,cols]");
    }
    const std::size_t ix = x.id(), is = slope.id();
    const Matrix s = expand(sv, xv.rows(), xv.cols());
    Matrix out = (xv.array() >= 0.0).select(xv, s.cwiseProduct(xv));
    return t.push(Tensor(std::move(out)), {ix, is},
                  [ix, is](Tape& tp, const Tensor& g) {
                      const Matrix& xv2 = tp.value_of(ix).matrix();
                      const Matrix& sv2 = tp.value_of(is).matrix();
                      const Matrix s2 = expand(sv2, xv2.rows(), xv2.cols());
                      const auto neg = (xv2.array() < 0.0);
                      if (tp.requires_grad(ix)) tp.accumulate(ix, neg.select(s2.cwiseProduct(g.matrix()), g.matrix()));
                      if (tp.requires_grad(is)) {
                          Matrix ds = neg.select(xv2.cwiseProduct(g.matrix()), Matrix::Zero(xv2.rows(), xv2.cols()));
                          tp.accumulate(is, reduce_to(ds, sv2.rows(), sv2.cols()));
                      }
                  },
                  xv.size(), "prelu");
}

Var clamp_min(Var a, double floor) {
    Tape& t = a.tape();
    const std::size_t ia = a.id();
    Matrix out = a.value().matrix().cwiseMax(floor);
    return t.push(Tensor(std::move(out)), {ia},
                  [ia, floor](Tape& tp, const Tensor& g) {
                      const Matrix& x = tp.value_of(ia).matrix();
                      tp.accumulate(ia, (x.array() > floor).select(g.matrix(), 0.0));
                  },
                  a.value().size(), "clamp_min");
}

// ---- training utilities -----------------------------------------------------

void sgd_step(Tensor& param, const Tensor& grad, double lr) {
    if (!param.same_shape(grad)) {
        throw DimensionError("sgd_step: parameter " + param.shape_string() + " vs gradient " + grad.shape_string());
    }
    if (!(lr > 0.0)) throw DomainError("sgd_step: learning rate must be positive");
    param.matrix() -= lr * grad.matrix();
}

void sgd_step(ParameterSet& params, double lr) {
    for (auto& p : params.items()) sgd_step(p.value, p.grad, lr);
}

double grad_norm(const ParameterSet& params) {
    double acc = 0.0;
    for (const auto& p : params.items()) acc += p.grad.matrix().squaredNorm();
    return std::sqrt(acc);
}

void clip_grad_norm(ParameterSet& params, double max_norm) {
    const double n = grad_norm(params);
    if (n > max_norm && n > 0.0) {
        const double f = max_norm / n;
        for (auto& p : params.items()) p.grad.matrix() *= f;
    }
}

void MomentumSgd::step(ParameterSet& params) {
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        for (const auto& p : params.items()) velocity_.push_back(Matrix::Zero(p.value.matrix().rows(), p.value.matrix().cols()));
    }
    std::size_t i = 0;
    for (auto& p : params.items()) {
        Matrix& v = velocity_[i++];
        v = momentum_ * v + p.grad.matrix();
        p.value.matrix() -= lr_ * v;
    }
}

void Adam::step(ParameterSet& params) {
    if (m_.size() != params.size()) {
        m_.clear();
        v_.clear();
        for (const auto& p : params.items()) {
            m_.push_back(Matrix::Zero(p.value.matrix().rows(), p.value.matrix().cols()));
            v_.push_back(Matrix::Zero(p.value.matrix().rows(), p.value.matrix().cols()));
        }
    }
    ++step_count_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    std::size_t i = 0;
    for (auto& p : params.items()) {
        Matrix& m = m_[i];
        Matrix& v = v_[i];
        ++i;
        const Matrix& g = p.grad.matrix();
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        p.value.matrix().array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    }
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    Tensor w(fan_in, fan_out);
    for (std::size_t r = 0; r < fan_in; ++r)
        for (std::size_t c = 0; c < fan_out; ++c) w(r, c) = dist(rng);
    return w;
}

}  // namespace uavsec::ad
