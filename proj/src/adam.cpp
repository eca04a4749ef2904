#include "hsal/adam.hpp"

#include <cmath>

#include "hsal/errors.hpp"

namespace hsal {

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
  for (const auto& e : params) {
    state_.first_moment.emplace_back(e.tensor.size(), 0.0);
    state_.second_moment.emplace_back(e.tensor.size(), 0.0);
  }
}

void Adam::step(ParameterSet& params) {
  if (params.size() != state_.first_moment.size()) {
    throw ContractError("optimizer state was built for a different parameter set");
  }
  for (const auto& e : params) {
    for (double g : e.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + e.name);
    }
  }

  ++state_.step;
  const auto t = static_cast<double>(state_.step);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& tensor = params.tensor(p);
    auto theta = tensor.values();
    auto grad = tensor.mutable_grad();
    auto& m = state_.first_moment[p];
    auto& v = state_.second_moment[p];
    if (m.size() != theta.size()) throw ContractError("moment size mismatch for " + params[p].name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i] + config_.weight_decay * theta[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace hsal
