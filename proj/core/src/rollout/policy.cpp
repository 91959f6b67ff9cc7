#include "admrl/rollout/policy.hpp"

#include "admrl/common/error.hpp"

#include <cmath>

namespace admrl::rollout {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
}

diff::Mlp PolicyArch::mean_net() const {
  std::vector<std::size_t> sizes;
  sizes.push_back(obs_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(act_dim);
  return diff::Mlp{std::move(sizes), "mean.", diff::Activation::Identity};
}

diff::Layout PolicyArch::layout() const {
  diff::Layout l = mean_net().layout();
  l.add("log_std", 1, act_dim);
  return l;
}

diff::ParamVector PolicyArch::initialize(Rng& rng) const {
  diff::ParamVector p(layout());
  mean_net().initialize(p, rng, output_gain);
  p.block("log_std").setConstant(init_log_std);
  return p;
}

PolicyNodes policy_forward(const PolicyArch& arch, const diff::BoundParams& params, diff::Var obs) {
  return {arch.mean_net().forward(params, obs), params["log_std"]};
}

diff::Var log_prob_rows(const PolicyNodes& nodes, const Matrix& actions) {
  diff::Tape& tape = *nodes.mean.tape;
  const auto dim = static_cast<double>(actions.cols());
  diff::Var a = tape.leaf(actions);
  diff::Var inv_std = tape.exp(tape.scale(nodes.log_std, -1.0));
  diff::Var z = tape.mul_row(tape.sub(a, nodes.mean), inv_std);
  diff::Var quad = tape.scale(tape.row_sum(tape.square(z)), -0.5);
  diff::Var norm = tape.add_scalar(tape.sum(nodes.log_std), dim * kHalfLog2Pi);
  return tape.add_row(quad, tape.scale(norm, -1.0));
}

ActionDistribution action_distribution(const GaussianPolicy& policy, const Matrix& obs) {
  if (static_cast<std::size_t>(obs.cols()) != policy.arch.obs_dim)
    throw ShapeError("policy expects observations of width " + std::to_string(policy.arch.obs_dim) + ", got " +
                     std::to_string(obs.cols()));
  diff::Tape tape;
  diff::BoundParams bound(tape, policy.params);
  auto nodes = policy_forward(policy.arch, bound, tape.leaf(obs));
  return {nodes.mean.value(), nodes.log_std.value().row(0).transpose().array().exp().matrix()};
}

double log_prob(const Vector& mean, const Vector& std, const Vector& action) {
  if (mean.size() != std.size() || mean.size() != action.size()) throw ShapeError("log_prob: dimension mismatch");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) / std[i];
    lp += -0.5 * z * z - std::log(std[i]) - kHalfLog2Pi;
  }
  return lp;
}

}  // namespace admrl::rollout
