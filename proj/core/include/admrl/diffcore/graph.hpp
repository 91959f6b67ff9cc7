#pragma once

#include "admrl/diffcore/tape.hpp"

#include <cstddef>
#include <functional>
#include <span>

namespace admrl::diff {

/// A differentiable program: given the tape, the bound parameters and the
/// input leaf (a 1 x arity row), it appends nodes and returns its output.
/// The tape is rebuilt on every call, so a Graph carries no evaluation state.
struct Graph {
  std::size_t input_arity = 0;
  std::function<Var(Tape&, const BoundParams&, Var)> build;
};

/// Forward value of a scalar-output graph. Throws ShapeError on an input
/// length mismatch and NumericError on any non-finite intermediate.
double eval_scalar(const Graph& graph, const ParamVector& params, std::span<const double> inputs);

/// dL/dparams with the same layout as `params`. Throws ContractError when the
/// output is not 1x1.
ParamVector grad_params(const Graph& graph, const ParamVector& params, std::span<const double> inputs);

/// dL/dinputs.
Vector grad_inputs(const Graph& graph, const ParamVector& params, std::span<const double> inputs);

}  // namespace admrl::diff
