#pragma once

#include "admrl/diffcore/param_vector.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace admrl::diff {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

enum class Op : std::uint8_t {
  Leaf,
  Affine,     // x * W^T + 1 b
  Tanh,
  Sigmoid,
  Log,
  Exp,
  Sum,        // -> 1x1
  Mean,       // -> 1x1
  Square,
  MaxConst,
  MinConst,
  RowNorm,    // N x d -> N x 1, Euclidean norm of each row
  RowSum,     // N x d -> N x 1
  Sign,
  Scale,
  AddScalar,
  Add,
  Sub,
  Mul,        // elementwise, same shape
  AddRow,     // N x d + 1 x d
  MulRow,     // N x d (*) 1 x d
};

/// Reverse-mode tape over dense matrices. Nodes are appended in evaluation
/// order, so the node vector is already a topological order. A tape is built
/// for one evaluation and discarded.
class Tape {
 public:
  Tape() { nodes_.reserve(64); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value);
  Var leaf_row(const Vector& v);  // 1 x n
  Var leaf_col(const Vector& v);  // n x 1

  Var affine(Var x, Var w, Var b);
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var log(Var x);
  Var exp(Var x);
  Var sum(Var x);
  Var mean(Var x);
  Var square(Var x);
  Var max_const(Var x, double c);
  Var min_const(Var x, double c);
  Var clamp(Var x, double lo, double hi) { return min_const(max_const(x, lo), hi); }
  Var row_norm(Var x);
  Var row_sum(Var x);
  Var sign(Var x);
  Var scale(Var x, double s);
  Var add_scalar(Var x, double s);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var add_row(Var x, Var row);
  Var mul_row(Var x, Var row);

  /// Accumulates d(out)/d(node) for every node. `out` must be 1x1.
  void backward(Var out);
  const Matrix& grad(Var v) const;

  /// Forward-mode directional derivative: given tangents for some leaves
  /// (others are treated as constant), returns the tangent of `out`.
  Matrix jvp(Var out, const std::unordered_map<std::size_t, Matrix>& leaf_tangents) const;

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(Var v) const { return nodes_[v.id].op; }

  /// Throws NumericError naming the first node with a non-finite value.
  void check_finite() const;

 private:
  struct Node {
    Op op = Op::Leaf;
    std::size_t in0 = 0;
    std::size_t in1 = 0;
    std::size_t in2 = 0;
    double c = 0.0;
    Matrix value;
  };

  Var push(Op op, Matrix value, std::size_t in0 = 0, std::size_t in1 = 0, std::size_t in2 = 0, double c = 0.0);
  void same_tape(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
};

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator*(double s, Var a) { return a.tape->scale(a, s); }
inline Var operator*(Var a, double s) { return a.tape->scale(a, s); }
inline Var operator+(Var a, double s) { return a.tape->add_scalar(a, s); }
inline Var operator-(Var a) { return a.tape->scale(a, -1.0); }
inline Var tanh(Var x) { return x.tape->tanh(x); }
inline Var sigmoid(Var x) { return x.tape->sigmoid(x); }
inline Var log(Var x) { return x.tape->log(x); }
inline Var exp(Var x) { return x.tape->exp(x); }
inline Var sum(Var x) { return x.tape->sum(x); }
inline Var mean(Var x) { return x.tape->mean(x); }
inline Var square(Var x) { return x.tape->square(x); }

/// Parameter segments bound as leaves on a tape.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamVector& params);
  BoundParams(Tape&, ParamVector&&) = delete;

  Var operator[](std::string_view name) const { return leaves_[params_->layout().index_of(name)]; }
  Var operator[](std::size_t segment) const { return leaves_[segment]; }
  const std::vector<Var>& leaves() const noexcept { return leaves_; }
  const ParamVector& params() const noexcept { return *params_; }

  /// Gradient of the last backward() pass, laid out like the bound params.
  ParamVector gradient() const;

  /// Leaf tangent map for Tape::jvp from a direction in parameter space.
  std::unordered_map<std::size_t, Matrix> tangents(const Vector& direction) const;

 private:
  Tape* tape_;
  const ParamVector* params_;
  std::vector<Var> leaves_;
};

}  // namespace admrl::diff
