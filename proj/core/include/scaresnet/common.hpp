#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scaresnet {

using Shape = std::vector<int>;

/// Tensor shapes incompatible with an operation; the message names the
/// offending axis.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A value outside an operation's domain (bad sizes, bad config, non-finite
/// evaluations).
struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int e : s) n *= static_cast<std::size_t>(e);
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline bool scalar_shaped(const Shape& s) {
  for (int e : s)
    if (e != 1) return false;
  return !s.empty();
}

/// floor((in + 2*pad - kernel) / stride) + 1. Caller guarantees
/// in + 2*pad >= kernel so the integer division is a true floor.
inline int conv_out_extent(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derives an independent RNG stream per named component so that adding or
/// removing one layer does not shift the draws of any other.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = splitmix64(seed);
  for (char c : tag) h = splitmix64(h ^ static_cast<std::uint8_t>(c));
  return h;
}

}  // namespace scaresnet
