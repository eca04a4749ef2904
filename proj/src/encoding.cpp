#include "hsal/encoding.hpp"

#include <cmath>
#include <string>

#include "hsal/errors.hpp"

namespace hsal {

namespace {

void require_even(std::size_t d) {
  if (d < 2 || d % 2 != 0) {
    throw ConfigError("positional encodings need an even dimension >= 2, got " + std::to_string(d));
  }
}

double frequency(std::size_t k, std::size_t d) {
  return std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d));
}

}  // namespace

PositionalKind parse_positional(std::string_view name) {
  if (name == "sinusoidal") return PositionalKind::Sinusoidal;
  if (name == "rotary") return PositionalKind::Rotary;
  throw ConfigError("unknown positional encoding '" + std::string(name) +
                    "' (expected sinusoidal or rotary)");
}

std::string_view to_string(PositionalKind kind) {
  return kind == PositionalKind::Rotary ? "rotary" : "sinusoidal";
}

std::vector<double> encode_sinusoidal(double position, std::size_t d) {
  require_even(d);
  std::vector<double> out(d);
  for (std::size_t k = 0; k < d / 2; ++k) {
    const double angle = position * frequency(k, d);
    out[2 * k] = std::sin(angle);
    out[2 * k + 1] = std::cos(angle);
  }
  return out;
}

std::vector<double> encode_rotary(std::span<const double> h, double position) {
  const std::size_t d = h.size();
  require_even(d);
  std::vector<double> out(d);
  for (std::size_t k = 0; k < d / 2; ++k) {
    const double angle = position * frequency(k, d);
    const double c = std::cos(angle), s = std::sin(angle);
    out[2 * k] = c * h[2 * k] - s * h[2 * k + 1];
    out[2 * k + 1] = s * h[2 * k] + c * h[2 * k + 1];
  }
  return out;
}

PositionalEncoder::PositionalEncoder(PositionalKind kind_, std::size_t d_) : kind(kind_), d(d_) {
  require_even(d);
}

}  // namespace hsal
