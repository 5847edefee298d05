#pragma once

#include <random>

#include "scaresnet/tensor.hpp"

namespace scaresnet {

/// Fan-in-scaled uniform init U(-sqrt(1/fan_in), sqrt(1/fan_in)) for conv and
/// linear weights. Draws are made in double and narrowed, so a given seed
/// yields the same weight values for every element type.
template <typename T>
Tensor<T> uniform_fan_in(Shape shape, int fan_in, std::mt19937_64& rng) {
  if (fan_in < 1) throw ValueError("uniform_fan_in: fan_in must be >= 1");
  const double bound = std::sqrt(1.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> vals(numel(shape));
  for (auto& v : vals) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(vals));
}

template <typename T>
Tensor<T> uniform_in(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> vals(numel(shape));
  for (auto& v : vals) v = static_cast<T>(dist(rng));
  return Tensor<T>::from(std::move(shape), std::move(vals));
}

}  // namespace scaresnet
