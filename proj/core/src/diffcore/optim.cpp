#include "admrl/diffcore/optim.hpp"

#include "admrl/common/error.hpp"

#include <cmath>

namespace admrl::diff {

namespace {

void require_layouts(const ParamVector& params, const ParamVector& grads) {
  if (!params.same_layout(grads)) throw ContractError("apply_update: parameter and gradient layouts differ");
}

}  // namespace

ParamVector apply_update(const ParamVector& params, const ParamVector& grads, const Sgd& rule) {
  require_layouts(params, grads);
  return ParamVector(params.shared_layout(), params.values() - rule.lr * grads.values());
}

AdamUpdate apply_update(const ParamVector& params, const ParamVector& grads, const Adam& rule, const AdamState& state) {
  require_layouts(params, grads);
  const auto n = static_cast<Eigen::Index>(params.size());
  AdamState next;
  next.m = state.m.size() == n ? state.m : Vector::Zero(n);
  next.v = state.v.size() == n ? state.v : Vector::Zero(n);
  next.step = state.step + 1;

  const Vector& g = grads.values();
  next.m = rule.beta1 * next.m + (1.0 - rule.beta1) * g;
  next.v = rule.beta2 * next.v + (1.0 - rule.beta2) * g.cwiseProduct(g);
  const double t = static_cast<double>(next.step);
  const double c1 = 1.0 - std::pow(rule.beta1, t);
  const double c2 = 1.0 - std::pow(rule.beta2, t);
  Vector step = (next.m.array() / c1) / ((next.v.array() / c2).sqrt() + rule.eps);
  return {ParamVector(params.shared_layout(), params.values() - rule.lr * step), std::move(next)};
}

}  // namespace admrl::diff
