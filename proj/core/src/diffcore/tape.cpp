#include "admrl/diffcore/tape.hpp"

#include "admrl/common/error.hpp"

#include <cmath>
#include <string>

namespace admrl::diff {

namespace {

std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Affine: return "affine";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Log: return "log";
    case Op::Exp: return "exp";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Square: return "square";
    case Op::MaxConst: return "max_const";
    case Op::MinConst: return "min_const";
    case Op::RowNorm: return "row_norm";
    case Op::RowSum: return "row_sum";
    case Op::Sign: return "sign";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddRow: return "add_row";
    case Op::MulRow: return "mul_row";
  }
  return "?";
}

void accumulate(Matrix& slot, const Matrix& g) {
  if (slot.size() == 0)
    slot = g;
  else
    slot += g;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("expected a scalar node, got " + shape_str(v));
  return v(0, 0);
}

Var Tape::push(Op op, Matrix value, std::size_t in0, std::size_t in1, std::size_t in2, double c) {
  nodes_.push_back(Node{op, in0, in1, in2, c, std::move(value)});
  return Var{this, nodes_.size() - 1};
}

void Tape::same_tape(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
}

Var Tape::leaf(Matrix value) { return push(Op::Leaf, std::move(value)); }
Var Tape::leaf_row(const Vector& v) { return leaf(v.transpose()); }
Var Tape::leaf_col(const Vector& v) { return leaf(v); }

Var Tape::affine(Var x, Var w, Var b) {
  same_tape(x), same_tape(w), same_tape(b);
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  const Matrix& B = value(b);
  if (X.cols() != W.cols()) throw ShapeError("affine: input width " + std::to_string(X.cols()) + " vs weight " + shape_str(W));
  if (B.rows() != 1 || B.cols() != W.rows()) throw ShapeError("affine: bias " + shape_str(B) + " vs weight " + shape_str(W));
  Matrix y = X * W.transpose();
  y.rowwise() += B.row(0);
  return push(Op::Affine, std::move(y), x.id, w.id, b.id);
}

Var Tape::tanh(Var x) {
  same_tape(x);
  // tanh via a vectorized exp: sign(x) (1 - e^{-2|x|}) / (1 + e^{-2|x|}).
  const auto& v = value(x).array();
  const Eigen::ArrayXXd e = (-2.0 * v.abs()).exp();
  return push(Op::Tanh, (v.sign() * (1.0 - e) / (1.0 + e)).matrix(), x.id);
}

Var Tape::sigmoid(Var x) {
  same_tape(x);
  return push(Op::Sigmoid, (1.0 / (1.0 + (-value(x).array()).exp())).matrix(), x.id);
}

Var Tape::log(Var x) { same_tape(x); return push(Op::Log, value(x).array().log().matrix(), x.id); }
Var Tape::exp(Var x) { same_tape(x); return push(Op::Exp, value(x).array().exp().matrix(), x.id); }

Var Tape::sum(Var x) {
  same_tape(x);
  Matrix y(1, 1);
  y(0, 0) = value(x).sum();
  return push(Op::Sum, std::move(y), x.id);
}

Var Tape::mean(Var x) {
  same_tape(x);
  if (value(x).size() == 0) throw ShapeError("mean of an empty matrix");
  Matrix y(1, 1);
  y(0, 0) = value(x).mean();
  return push(Op::Mean, std::move(y), x.id);
}

Var Tape::square(Var x) { same_tape(x); return push(Op::Square, value(x).array().square().matrix(), x.id); }

Var Tape::max_const(Var x, double c) {
  same_tape(x);
  return push(Op::MaxConst, value(x).array().max(c).matrix(), x.id, 0, 0, c);
}

Var Tape::min_const(Var x, double c) {
  same_tape(x);
  return push(Op::MinConst, value(x).array().min(c).matrix(), x.id, 0, 0, c);
}

Var Tape::row_norm(Var x) { same_tape(x); return push(Op::RowNorm, value(x).rowwise().norm(), x.id); }
Var Tape::row_sum(Var x) { same_tape(x); return push(Op::RowSum, value(x).rowwise().sum(), x.id); }

Var Tape::sign(Var x) {
  same_tape(x);
  Matrix y = value(x).unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  return push(Op::Sign, std::move(y), x.id);
}

Var Tape::scale(Var x, double s) { same_tape(x); return push(Op::Scale, s * value(x), x.id, 0, 0, s); }

Var Tape::add_scalar(Var x, double s) {
  same_tape(x);
  return push(Op::AddScalar, (value(x).array() + s).matrix(), x.id, 0, 0, s);
}

Var Tape::add(Var a, Var b) {
  same_tape(a), same_tape(b);
  require_same_shape(value(a), value(b), "add");
  return push(Op::Add, value(a) + value(b), a.id, b.id);
}

Var Tape::sub(Var a, Var b) {
  same_tape(a), same_tape(b);
  require_same_shape(value(a), value(b), "sub");
  return push(Op::Sub, value(a) - value(b), a.id, b.id);
}

Var Tape::mul(Var a, Var b) {
  same_tape(a), same_tape(b);
  require_same_shape(value(a), value(b), "mul");
  return push(Op::Mul, value(a).cwiseProduct(value(b)), a.id, b.id);
}

Var Tape::add_row(Var x, Var row) {
  same_tape(x), same_tape(row);
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != value(x).cols()) throw ShapeError("add_row: row " + shape_str(R) + " vs " + shape_str(value(x)));
  Matrix y = value(x);
  y.rowwise() += R.row(0);
  return push(Op::AddRow, std::move(y), x.id, row.id);
}

Var Tape::mul_row(Var x, Var row) {
  same_tape(x), same_tape(row);
  const Matrix& R = value(row);
  if (R.rows() != 1 || R.cols() != value(x).cols()) throw ShapeError("mul_row: row " + shape_str(R) + " vs " + shape_str(value(x)));
  Matrix y = value(x).array().rowwise() * R.row(0).array();
  return push(Op::MulRow, std::move(y), x.id, row.id);
}

void Tape::check_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!nodes_[i].value.allFinite())
      throw NumericError(std::string("non-finite value at node ") + std::to_string(i) + " (" + op_name(nodes_[i].op) + ")");
}

void Tape::backward(Var out) {
  same_tape(out);
  if (value(out).size() != 1) throw ContractError("backward: output must be scalar, got " + shape_str(value(out)));
  grads_.assign(nodes_.size(), Matrix());
  grads_[out.id] = Matrix::Ones(1, 1);

  for (std::size_t i = out.id + 1; i-- > 0;) {
    const Matrix& gy = grads_[i];
    if (gy.size() == 0) continue;
    const Node& n = nodes_[i];
    const Matrix& y = n.value;
    switch (n.op) {
      case Op::Leaf:
      case Op::Sign:
        break;
      case Op::Affine: {
        const Matrix& X = nodes_[n.in0].value;
        const Matrix& W = nodes_[n.in1].value;
        accumulate(grads_[n.in0], gy * W);
        accumulate(grads_[n.in1], gy.transpose() * X);
        accumulate(grads_[n.in2], gy.colwise().sum());
        break;
      }
      case Op::Tanh:
        accumulate(grads_[n.in0], (gy.array() * (1.0 - y.array().square())).matrix());
        break;
      case Op::Sigmoid:
        accumulate(grads_[n.in0], (gy.array() * y.array() * (1.0 - y.array())).matrix());
        break;
      case Op::Log:
        accumulate(grads_[n.in0], (gy.array() / nodes_[n.in0].value.array()).matrix());
        break;
      case Op::Exp:
        accumulate(grads_[n.in0], gy.cwiseProduct(y));
        break;
      case Op::Sum: {
        const Matrix& X = nodes_[n.in0].value;
        accumulate(grads_[n.in0], Matrix::Constant(X.rows(), X.cols(), gy(0, 0)));
        break;
      }
      case Op::Mean: {
        const Matrix& X = nodes_[n.in0].value;
        accumulate(grads_[n.in0], Matrix::Constant(X.rows(), X.cols(), gy(0, 0) / static_cast<double>(X.size())));
        break;
      }
      case Op::Square:
        accumulate(grads_[n.in0], (2.0 * gy.array() * nodes_[n.in0].value.array()).matrix());
        break;
      case Op::MaxConst:
        accumulate(grads_[n.in0], (nodes_[n.in0].value.array() > n.c).select(gy, 0.0).matrix());
        break;
      case Op::MinConst:
        accumulate(grads_[n.in0], (nodes_[n.in0].value.array() < n.c).select(gy, 0.0).matrix());
        break;
      case Op::RowNorm: {
        const Matrix& X = nodes_[n.in0].value;
        Matrix g(X.rows(), X.cols());
        for (Eigen::Index r = 0; r < X.rows(); ++r)
          if (y(r, 0) > 0.0) g.row(r) = (gy(r, 0) / y(r, 0)) * X.row(r);
          else g.row(r).setZero();
        accumulate(grads_[n.in0], g);
        break;
      }
      case Op::RowSum: {
        const Matrix& X = nodes_[n.in0].value;
        accumulate(grads_[n.in0], gy.replicate(1, X.cols()));
        break;
      }
      case Op::Scale:
        accumulate(grads_[n.in0], n.c * gy);
        break;
      case Op::AddScalar:
        accumulate(grads_[n.in0], gy);
        break;
      case Op::Add:
        accumulate(grads_[n.in0], gy);
        accumulate(grads_[n.in1], gy);
        break;
      case Op::Sub:
        accumulate(grads_[n.in0], gy);
        accumulate(grads_[n.in1], -gy);
        break;
      case Op::Mul:
        accumulate(grads_[n.in0], gy.cwiseProduct(nodes_[n.in1].value));
        accumulate(grads_[n.in1], gy.cwiseProduct(nodes_[n.in0].value));
        break;
      case Op::AddRow:
        accumulate(grads_[n.in0], gy);
        accumulate(grads_[n.in1], gy.colwise().sum());
        break;
      case Op::MulRow: {
        const Matrix& X = nodes_[n.in0].value;
        const Matrix& R = nodes_[n.in1].value;
        accumulate(grads_[n.in0], (gy.array().rowwise() * R.row(0).array()).matrix());
        accumulate(grads_[n.in1], gy.cwiseProduct(X).colwise().sum());
        break;
      }
    }
  }
}

const Matrix& Tape::grad(Var v) const {
  static const Matrix kEmpty;
  if (v.id >= grads_.size()) return kEmpty;
  return grads_[v.id];
}

Matrix Tape::jvp(Var out, const std::unordered_map<std::size_t, Matrix>& leaf_tangents) const {
  if (out.tape != this || out.id >= nodes_.size()) throw ContractError("jvp: variable does not belong to this tape");
  std::vector<Matrix> t(out.id + 1);
  auto zero_like = [](const Matrix& m) { return Matrix::Zero(m.rows(), m.cols()); };
  auto tan = [&](std::size_t id) -> Matrix { return t[id].size() == 0 ? zero_like(nodes_[id].value) : t[id]; };

  for (std::size_t i = 0; i <= out.id; ++i) {
    const Node& n = nodes_[i];
    const Matrix& y = n.value;
    switch (n.op) {
      case Op::Leaf: {
        auto it = leaf_tangents.find(i);
        if (it != leaf_tangents.end()) {
          require_same_shape(it->second, y, "jvp leaf tangent");
          t[i] = it->second;
        }
        break;
      }
      case Op::Sign:
        break;
      case Op::Affine: {
        if (t[n.in0].size() == 0 && t[n.in1].size() == 0 && t[n.in2].size() == 0) break;
        const Matrix& X = nodes_[n.in0].value;
        const Matrix& W = nodes_[n.in1].value;
        Matrix r = tan(n.in0) * W.transpose() + X * tan(n.in1).transpose();
        r.rowwise() += tan(n.in2).row(0);
        t[i] = std::move(r);
        break;
      }
      default: {
        const bool a = t[n.in0].size() != 0;
        const bool binary = n.op == Op::Add || n.op == Op::Sub || n.op == Op::Mul || n.op == Op::AddRow || n.op == Op::MulRow;
        const bool b = binary && t[n.in1].size() != 0;
        if (!a && !b) break;
        const Matrix& X = nodes_[n.in0].value;
        switch (n.op) {
          case Op::Tanh: t[i] = (tan(n.in0).array() * (1.0 - y.array().square())).matrix(); break;
          case Op::Sigmoid: t[i] = (tan(n.in0).array() * y.array() * (1.0 - y.array())).matrix(); break;
          case Op::Log: t[i] = (tan(n.in0).array() / X.array()).matrix(); break;
          case Op::Exp: t[i] = tan(n.in0).cwiseProduct(y); break;
          case Op::Sum: t[i] = Matrix::Constant(1, 1, tan(n.in0).sum()); break;
          case Op::Mean: t[i] = Matrix::Constant(1, 1, tan(n.in0).mean()); break;
          case Op::Square: t[i] = (2.0 * X.array() * tan(n.in0).array()).matrix(); break;
          case Op::MaxConst: t[i] = (X.array() > n.c).select(tan(n.in0), 0.0).matrix(); break;
          case Op::MinConst: t[i] = (X.array() < n.c).select(tan(n.in0), 0.0).matrix(); break;
          case Op::RowNorm: {
            Matrix r(X.rows(), 1);
            const Matrix tx = tan(n.in0);
            for (Eigen::Index k = 0; k < X.rows(); ++k) r(k, 0) = y(k, 0) > 0.0 ? X.row(k).dot(tx.row(k)) / y(k, 0) : 0.0;
            t[i] = std::move(r);
            break;
          }
          case Op::RowSum: t[i] = tan(n.in0).rowwise().sum(); break;
          case Op::Scale: t[i] = n.c * tan(n.in0); break;
          case Op::AddScalar: t[i] = tan(n.in0); break;
          case Op::Add: t[i] = tan(n.in0) + tan(n.in1); break;
          case Op::Sub: t[i] = tan(n.in0) - tan(n.in1); break;
          case Op::Mul: t[i] = tan(n.in0).cwiseProduct(nodes_[n.in1].value) + X.cwiseProduct(tan(n.in1)); break;
          case Op::AddRow: {
            Matrix r = tan(n.in0);
            r.rowwise() += tan(n.in1).row(0);
            t[i] = std::move(r);
            break;
          }
          case Op::MulRow: {
            const Matrix& R = nodes_[n.in1].value;
            Matrix r = (tan(n.in0).array().rowwise() * R.row(0).array()).matrix();
            r.array() += X.array().rowwise() * tan(n.in1).row(0).array();
            t[i] = std::move(r);
            break;
          }
          default: break;
        }
      }
    }
  }
  return tan(out.id);
}

BoundParams::BoundParams(Tape& tape, const ParamVector& params) : tape_(&tape), params_(&params) {
  const auto& segs = params.layout().segments();
  leaves_.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) leaves_.push_back(tape.leaf(Matrix(params.block(i))));
}

ParamVector BoundParams::gradient() const {
  ParamVector g = ParamVector::zeros_like(*params_);
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    const Matrix& gi = tape_->grad(leaves_[i]);
    if (gi.size() != 0) g.block(i) = gi;
  }
  return g;
}

std::unordered_map<std::size_t, Matrix> BoundParams::tangents(const Vector& direction) const {
  if (static_cast<std::size_t>(direction.size()) != params_->size()) throw ShapeError("tangent direction length mismatch");
  ParamVector d(params_->shared_layout(), direction);
  std::unordered_map<std::size_t, Matrix> out;
  for (std::size_t i = 0; i < leaves_.size(); ++i) out.emplace(leaves_[i].id, Matrix(d.block(i)));
  return out;
}

}  // namespace admrl::diff
