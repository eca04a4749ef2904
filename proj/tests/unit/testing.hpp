#pragma once

// Shared helpers for the unit tests: seeded random tensors and a
// central-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "hsal/autodiff.hpp"
#include "hsal/tensor.hpp"

namespace hsal::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// d f / d x[i] for every entry of x by central differences; x is restored.
inline std::vector<double> numeric_gradient(std::span<double> x, const std::function<double()>& f,
                                            double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// sum(out * R) for a fixed pseudo-random R of out's shape, reduced to [1].
inline Var weighted_sum(Var out, std::uint64_t seed = 99) {
  auto& tape = *out.tape;
  auto r = tape.constant(random_tensor(out.shape(), seed, 0.5, 1.5));
  auto prod = mul(out, r);
  auto s = reduce(Reduction::Sum, prod, 0);
  return s.shape()[0] == 1 ? s : reduce(Reduction::Sum, s, 0);
}

}  // namespace hsal::testing
