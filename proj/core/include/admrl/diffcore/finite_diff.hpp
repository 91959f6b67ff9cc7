#pragma once

#include "admrl/diffcore/param_vector.hpp"

#include <functional>

namespace admrl::diff {

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h. Independent of the
/// tape; used as the oracle for every gradient check.
Vector finite_diff_oracle(const std::function<double(const Vector&)>& f, const Vector& point, double h);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps near-zero
/// components from dominating.
double max_relative_error(const Vector& a, const Vector& b, double floor = 1e-6);

}  // namespace admrl::diff
