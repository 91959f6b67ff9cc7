#pragma once

#include "admrl/common/random.hpp"
#include "admrl/diffcore/tape.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace admrl::diff {

enum class Activation { Identity, Tanh };

/// Fully connected network with tanh hidden layers. `sizes` is
/// {input, hidden..., output}; segments are "<prefix>l<i>.w" (out x in) and
/// "<prefix>l<i>.b" (1 x out).
struct Mlp {
  std::vector<std::size_t> sizes;
  std::string prefix;
  Activation output = Activation::Identity;

  std::size_t input_dim() const { return sizes.front(); }
  std::size_t output_dim() const { return sizes.back(); }
  std::size_t layers() const { return sizes.size() - 1; }

  Layout layout() const;
  Var forward(const BoundParams& params, Var x) const;

  /// Glorot-uniform weights and zero biases; the last layer's weights are
  /// multiplied by `output_gain`.
  void initialize(ParamVector& params, Rng& rng, double output_gain = 1.0) const;
};

}  // namespace admrl::diff
