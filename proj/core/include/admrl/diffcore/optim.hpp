#pragma once

#include "admrl/diffcore/param_vector.hpp"

#include <cstdint>

namespace admrl::diff {

struct Sgd {
  double lr = 1e-2;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates. An empty state is treated as zeros.
struct AdamState {
  Vector m;
  Vector v;
  std::int64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

struct AdamUpdate {
  ParamVector params;
  AdamState state;
};

/// theta - lr * g. Throws ContractError on a layout mismatch.
ParamVector apply_update(const ParamVector& params, const ParamVector& grads, const Sgd& rule);

/// Bias-corrected Adam step; returns new params and new state.
AdamUpdate apply_update(const ParamVector& params, const ParamVector& grads, const Adam& rule, const AdamState& state);

}  // namespace admrl::diff
