#pragma once

#include <memory>
#include <utility>

#include "scaresnet/common.hpp"

namespace scaresnet {

template <typename T>
const char* dtype_name();
template <>
inline const char* dtype_name<float>() {
  return "float32";
}
template <>
inline const char* dtype_name<double>() {
  return "float64";
}

template <typename T>
class Graph;

namespace detail {

// Shared tensor state. The data buffer is immutable once an op has produced
// it; leaves (weights, inputs) may be rewritten by the owner between
// forward/backward passes. grad is installed by Graph::backward and stays
// readable after the graph is gone.
template <typename T>
struct TensorState {
  Shape shape;
  std::shared_ptr<std::vector<T>> data;
  std::shared_ptr<std::vector<T>> grad;
  std::uint64_t graph_id = 0;  // 0 = not bound to any graph
  int node_id = -1;
};

}  // namespace detail

/// Dense row-major tensor (channels x height x width for feature maps, flat
/// vectors for parameters). Value-semantic handle over shared state; the
/// element type is the dtype, so all tensors in one Graph<T> share it by
/// construction.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return filled(std::move(shape), static_cast<T>(0));
  }

  static Tensor filled(Shape shape, T value) {
    validate_shape(shape);
    auto st = std::make_shared<detail::TensorState<T>>();
    st->data = std::make_shared<std::vector<T>>(numel(shape), value);
    st->shape = std::move(shape);
    return Tensor(std::move(st));
  }

  static Tensor from(Shape shape, std::vector<T> values) {
    validate_shape(shape);
    if (values.size() != numel(shape))
      throw ShapeError("tensor: data length " + std::to_string(values.size()) +
                       " does not match shape " + shape_str(shape));
    auto st = std::make_shared<detail::TensorState<T>>();
    st->data = std::make_shared<std::vector<T>>(std::move(values));
    st->shape = std::move(shape);
    return Tensor(std::move(st));
  }

  bool valid() const { return static_cast<bool>(state_); }
  const Shape& shape() const { return state_->shape; }
  std::size_t size() const { return state_->data->size(); }

  std::vector<T>& data() { return *state_->data; }
  const std::vector<T>& data() const { return *state_->data; }

  bool has_grad() const { return state_ && state_->grad != nullptr; }
  const std::vector<T>& grad() const {
    if (!has_grad()) throw ValueError("tensor: gradient absent");
    return *state_->grad;
  }

  // CHW accessors
  T& operator()(int c, int h, int w) {
    const Shape& s = state_->shape;
    return (*state_->data)[(static_cast<std::size_t>(c) * s[1] + h) * s[2] + w];
  }
  T operator()(int c, int h, int w) const {
    const Shape& s = state_->shape;
    return (*state_->data)[(static_cast<std::size_t>(c) * s[1] + h) * s[2] + w];
  }

  bool same_state(const Tensor& other) const { return state_ == other.state_; }

 private:
  static void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor: empty shape");
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (shape[i] <= 0)
        throw ShapeError("tensor: non-positive extent at axis " +
                         std::to_string(i));
  }

  explicit Tensor(std::shared_ptr<detail::TensorState<T>> s)
      : state_(std::move(s)) {}

  std::shared_ptr<detail::TensorState<T>> state_;
  friend class Graph<T>;
};

}  // namespace scaresnet
