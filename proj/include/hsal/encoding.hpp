#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace hsal {

enum class PositionalKind { Sinusoidal, Rotary };

PositionalKind parse_positional(std::string_view name);
std::string_view to_string(PositionalKind kind);

/// P[2k] = sin(p / 10000^(2k/d)), P[2k+1] = cos(p / 10000^(2k/d)).
std::vector<double> encode_sinusoidal(double position, std::size_t d);

/// Rotates (h[2k], h[2k+1]) by theta_k * position, theta_k = 10000^(-2k/d).
std::vector<double> encode_rotary(std::span<const double> h, double position);

struct PositionalEncoder {
  PositionalKind kind = PositionalKind::Sinusoidal;
  std::size_t d = 0;

  PositionalEncoder(PositionalKind kind, std::size_t d);
};

}  // namespace hsal
