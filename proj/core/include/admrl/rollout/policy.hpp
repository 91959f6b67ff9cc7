#pragma once

#include "admrl/common/random.hpp"
#include "admrl/diffcore/mlp.hpp"

#include <cstddef>
#include <vector>

namespace admrl::rollout {

using diff::Matrix;
using diff::Vector;

/// Tanh MLP for the action mean plus a state-independent log standard
/// deviation stored as the "log_std" segment (1 x action_dim).
struct PolicyArch {
  std::size_t obs_dim = 2;
  std::size_t act_dim = 2;
  std::vector<std::size_t> hidden{64, 64};
  double init_log_std = 0.0;
  double output_gain = 0.1;

  diff::Mlp mean_net() const;
  diff::Layout layout() const;
  diff::ParamVector initialize(Rng& rng) const;
};

struct GaussianPolicy {
  PolicyArch arch;
  diff::ParamVector params;

  GaussianPolicy with_params(diff::ParamVector p) const { return {arch, std::move(p)}; }
};

struct ActionDistribution {
  Matrix mean;  // N x act_dim
  Vector std;   // act_dim
};

/// Batched: one row of `obs` per sample. Throws ShapeError on width mismatch.
ActionDistribution action_distribution(const GaussianPolicy& policy, const Matrix& obs);

/// Sum over dimensions of the diagonal Gaussian log-density.
double log_prob(const Vector& mean, const Vector& std, const Vector& action);

/// Tape-level pieces shared by losses that differentiate through the policy.
struct PolicyNodes {
  diff::Var mean;     // N x act_dim
  diff::Var log_std;  // 1 x act_dim
};

PolicyNodes policy_forward(const PolicyArch& arch, const diff::BoundParams& params, diff::Var obs);

/// N x 1 column of log pi(a_i | obs_i) for fixed actions.
diff::Var log_prob_rows(const PolicyNodes& nodes, const Matrix& actions);

}  // namespace admrl::rollout
