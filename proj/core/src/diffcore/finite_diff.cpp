#include "admrl/diffcore/finite_diff.hpp"

#include "admrl/common/error.hpp"

#include <algorithm>
#include <cmath>

namespace admrl::diff {

Vector finite_diff_oracle(const std::function<double(const Vector&)>& f, const Vector& point, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_oracle: step h must be positive");
  Vector grad(point.size());
  Vector p = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double x = point[i];
    p[i] = x + h;
    const double up = f(p);
    p[i] = x - h;
    const double down = f(p);
    p[i] = x;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Vector& a, const Vector& b, double floor) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace admrl::diff
