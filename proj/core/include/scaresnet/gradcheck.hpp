#pragma once

#include <cmath>
#include <functional>

#include "scaresnet/tensor.hpp"

namespace scaresnet {

/// Central-difference gradient of a scalar-valued function, the independent
/// oracle for every analytic gradient in this project. Entry i is
/// (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps).
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f,
                           const Tensor<T>& x, T eps) {
  if (!(eps > T(0))) throw ValueError("finite_diff_grad: eps must be > 0");
  Tensor<T> probe = Tensor<T>::from(x.shape(), x.data());
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const T orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const T fp = f(probe);
    probe.data()[i] = orig - eps;
    const T fm = f(probe);
    probe.data()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw ValueError("finite_diff_grad: non-finite evaluation at index " +
                       std::to_string(i));
    out.data()[i] = (fp - fm) / (2 * eps);
  }
  return out;
}

/// Central difference along a single coordinate of a mutable tensor; the
/// function re-reads the tensor's current contents.
template <typename T, typename F>
T finite_diff_at(F&& f, Tensor<T>& t, std::size_t index, T eps) {
  T& v = t.data()[index];
  const T orig = v;
  v = orig + eps;
  const T fp = f();
  v = orig - eps;
  const T fm = f();
  v = orig;
  if (!std::isfinite(fp) || !std::isfinite(fm))
    throw ValueError("finite_diff_at: non-finite evaluation at index " +
                     std::to_string(index));
  return (fp - fm) / (2 * eps);
}

/// Relative error with a unit floor: |a - b| / max(|a|, |b|, 1). Pure
/// relative error above magnitude 1, absolute below, so that near-zero
/// gradients are not drowned by finite-difference noise.
template <typename T>
T rel_err(T a, T b) {
  const T denom = std::max(std::max(std::abs(a), std::abs(b)), T(1));
  return std::abs(a - b) / denom;
}

template <typename T>
T max_rel_err(const std::vector<T>& a, const std::vector<T>& b) {
  T worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

}  // namespace scaresnet
