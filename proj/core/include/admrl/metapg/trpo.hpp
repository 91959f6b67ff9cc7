#pragma once

#include "admrl/diffcore/param_vector.hpp"

#include <functional>

namespace admrl::metapg {

using diff::ParamVector;
using diff::Vector;

struct TrpoConfig {
  double max_kl = 0.01;
  int cg_iters = 10;
  double cg_damping = 1e-5;
  double backtrack_ratio = 0.8;
  int max_backtracks = 15;

  void validate() const;
};

/// Solves A x = b for symmetric positive-definite A given only products.
/// Stops early once the squared residual drops below `residual_tol`.
/// Returns an empty vector if an iterate becomes non-finite.
Vector conjugate_gradient(const std::function<Vector(const Vector&)>& product, const Vector& b, int iters,
                          double residual_tol = 1e-10);

struct TrpoResult {
  ParamVector params;
  bool accepted = false;
  bool fallback = false;    // no candidate improved the objective within the KL limit
  bool cg_aborted = false;  // conjugate gradient produced a non-finite iterate
  double kl = 0.0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  int backtracks = 0;
};

/// One trust-region step. `ascent` is the gradient of the objective to be
/// maximized; `objective(theta)` and `kl(theta)` evaluate candidates and
/// `fisher(v)` multiplies by the Fisher matrix at the current parameters.
/// The full step is s * sqrt(2 delta / s^T F s) with s = (F + damping I)^-1 g;
/// backtracking shrinks it until the objective improves and KL <= delta. If
/// nothing qualifies the parameters are returned unchanged.
TrpoResult trpo_step(const ParamVector& theta, const ParamVector& ascent,
                     const std::function<Vector(const Vector&)>& fisher,
                     const std::function<double(const ParamVector&)>& objective,
                     const std::function<double(const ParamVector&)>& kl, const TrpoConfig& cfg);

}  // namespace admrl::metapg
