#include "admrl/metapg/trpo.hpp"

#include "admrl/common/error.hpp"

#include <cmath>
#include <iostream>

namespace admrl::metapg {

void TrpoConfig::validate() const {
  if (!(max_kl > 0.0)) throw ContractError("trpo: max_kl must be > 0");
  if (cg_iters < 1) throw ContractError("trpo: cg_iters must be >= 1");
  if (cg_damping < 0.0) throw ContractError("trpo: cg_damping must be >= 0");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0)) throw ContractError("trpo: backtrack_ratio must lie in (0, 1)");
  if (max_backtracks < 1) throw ContractError("trpo: max_backtracks must be >= 1");
}

Vector conjugate_gradient(const std::function<Vector(const Vector&)>& product, const Vector& b, int iters,
                          double residual_tol) {
  Vector x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = b;
  double rr = r.squaredNorm();
  for (int i = 0; i < iters && rr > residual_tol; ++i) {
    const Vector Ap = product(p);
    const double pAp = p.dot(Ap);
    if (!std::isfinite(pAp)) return {};
    if (pAp <= 0.0) break;
    const double alpha = rr / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    const double rr_next = r.squaredNorm();
    if (!x.allFinite() || !std::isfinite(rr_next)) return {};
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

TrpoResult trpo_step(const ParamVector& theta, const ParamVector& ascent,
                     const std::function<Vector(const Vector&)>& fisher,
                     const std::function<double(const ParamVector&)>& objective,
                     const std::function<double(const ParamVector&)>& kl, const TrpoConfig& cfg) {
  cfg.validate();
  if (!theta.same_layout(ascent)) throw ContractError("trpo_step: gradient layout differs from parameters");

  TrpoResult result{theta};
  const Vector& g = ascent.values();
  if (g.isZero(0.0)) return result;

  auto damped = [&](const Vector& v) -> Vector { return fisher(v) + cfg.cg_damping * v; };
  const Vector s = conjugate_gradient(damped, g, cfg.cg_iters);
  if (s.size() == 0) {
    std::clog << "trpo: conjugate gradient diverged; keeping parameters\n";
    result.cg_aborted = true;
    result.fallback = true;
    return result;
  }
  const double sFs = s.dot(fisher(s));
  if (!std::isfinite(sFs) || sFs <= 0.0) {
    result.cg_aborted = true;
    result.fallback = true;
    return result;
  }
  const Vector full_step = std::sqrt(2.0 * cfg.max_kl / sFs) * s;

  result.objective_before = objective(theta);
  double frac = 1.0;
  for (int k = 0; k < cfg.max_backtracks; ++k, frac *= cfg.backtrack_ratio) {
    ParamVector candidate(theta.shared_layout(), theta.values() + frac * full_step);
    const double value = objective(candidate);
    const double divergence = kl(candidate);
    if (std::isfinite(value) && std::isfinite(divergence) && value > result.objective_before &&
        divergence <= cfg.max_kl) {
      result.params = std::move(candidate);
      result.accepted = true;
      result.kl = divergence;
      result.objective_after = value;
      result.backtracks = k;
      return result;
    }
  }
  result.fallback = true;
  result.objective_after = result.objective_before;
  result.backtracks = cfg.max_backtracks;
  return result;
}

}  // namespace admrl::metapg
