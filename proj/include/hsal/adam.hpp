#pragma once

#include <cstdint>
#include <vector>

#include "hsal/tensor.hpp"

namespace hsal {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // L2 coefficient; lambda * theta is added to the gradient before the
  // moment update.
  double weight_decay = 1e-4;
};

/// Adam moments for every tensor of one ParameterSet.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig config);

  /// Applies one bias-corrected update using each tensor's grad buffer.
  /// Throws NumericError (and leaves everything untouched) if any gradient
  /// is not finite.
  void step(ParameterSet& params);

  const AdamConfig& config() const { return config_; }
  const AdamState& state() const { return state_; }

 private:
  AdamConfig config_;
  AdamState state_;
};

}  // namespace hsal
