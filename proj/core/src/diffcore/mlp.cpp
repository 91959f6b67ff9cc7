#include "admrl/diffcore/mlp.hpp"

#include "admrl/common/error.hpp"

#include <cmath>

namespace admrl::diff {

namespace {

std::string weight_name(const std::string& prefix, std::size_t i) { return prefix + "l" + std::to_string(i) + ".w"; }
std::string bias_name(const std::string& prefix, std::size_t i) { return prefix + "l" + std::to_string(i) + ".b"; }

}  // namespace

Layout Mlp::layout() const {
  if (sizes.size() < 2) throw ContractError("an MLP needs at least input and output sizes");
  Layout l;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    l.add(weight_name(prefix, i), sizes[i + 1], sizes[i]);
    l.add(bias_name(prefix, i), 1, sizes[i + 1]);
  }
  return l;
}

Var Mlp::forward(const BoundParams& params, Var x) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim())
    throw ShapeError("MLP '" + prefix + "' expects input width " + std::to_string(input_dim()) + ", got " + std::to_string(x.cols()));
  Tape& tape = *x.tape;
  Var h = x;
  for (std::size_t i = 0; i < layers(); ++i) {
    h = tape.affine(h, params[weight_name(prefix, i)], params[bias_name(prefix, i)]);
    if (i + 1 < layers() || output == Activation::Tanh) h = tape.tanh(h);
  }
  return h;
}

void Mlp::initialize(ParamVector& params, Rng& rng, double output_gain) const {
  for (std::size_t i = 0; i < layers(); ++i) {
    auto w = params.block(weight_name(prefix, i));
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes[i] + sizes[i + 1]));
    const double gain = i + 1 == layers() ? output_gain : 1.0;
    // Column-major fill order keeps initialization independent of Eigen internals.
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = gain * uniform(rng, -limit, limit);
    params.block(bias_name(prefix, i)).setZero();
  }
}

}  // namespace admrl::diff
