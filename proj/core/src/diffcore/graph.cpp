#include "admrl/diffcore/graph.hpp"

#include "admrl/common/error.hpp"

#include <string>

namespace admrl::diff {

namespace {

struct Evaluated {
  Var input;
  Var output;
};

Evaluated build(Tape& tape, const Graph& graph, const BoundParams& bound, std::span<const double> inputs) {
  if (inputs.size() != graph.input_arity)
    throw ShapeError("graph expects " + std::to_string(graph.input_arity) + " inputs, got " + std::to_string(inputs.size()));
  Matrix row(1, static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = inputs[i];
  Var in = tape.leaf(std::move(row));
  Var out = graph.build(tape, bound, in);
  tape.check_finite();
  return {in, out};
}

void require_scalar(Var out) {
  if (out.value().size() != 1)
    throw ContractError("graph output must be scalar, got " + std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
}

}  // namespace

double eval_scalar(const Graph& graph, const ParamVector& params, std::span<const double> inputs) {
  Tape tape;
  BoundParams bound(tape, params);
  auto e = build(tape, graph, bound, inputs);
  require_scalar(e.output);
  return e.output.scalar();
}

ParamVector grad_params(const Graph& graph, const ParamVector& params, std::span<const double> inputs) {
  Tape tape;
  BoundParams bound(tape, params);
  auto e = build(tape, graph, bound, inputs);
  require_scalar(e.output);
  tape.backward(e.output);
  return bound.gradient();
}

Vector grad_inputs(const Graph& graph, const ParamVector& params, std::span<const double> inputs) {
  Tape tape;
  BoundParams bound(tape, params);
  auto e = build(tape, graph, bound, inputs);
  require_scalar(e.output);
  tape.backward(e.output);
  const Matrix& g = tape.grad(e.input);
  if (g.size() == 0) return Vector::Zero(static_cast<Eigen::Index>(inputs.size()));
  return g.transpose();
}

}  // namespace admrl::diff
