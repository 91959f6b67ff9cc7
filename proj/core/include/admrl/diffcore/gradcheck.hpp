#pragma once

#include "admrl/diffcore/graph.hpp"

#include <cstddef>
#include <cstdint>

namespace admrl::diff {

struct GradcheckConfig {
  std::size_t cases = 100;
  std::uint64_t seed = 1;
  double step = 1e-5;          // central-difference h
  double relative_floor = 1e-4; // denominator floor for near-zero components
  double tolerance = 1e-4;
};

struct GradcheckReport {
  std::size_t cases = 0;
  double worst_params = 0.0;  // max relative error, grad_params vs finite differences
  double worst_inputs = 0.0;  // max relative error, grad_inputs vs finite differences
  std::size_t failures = 0;   // cases above tolerance (either gradient)

  bool passed() const noexcept { return failures == 0; }
};

/// Random smooth networks (random depth, widths, output activation, loss
/// mixing square/sigmoid/log/row-norm terms) checked against
/// finite_diff_oracle for both parameter and input gradients.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

}  // namespace admrl::diff
