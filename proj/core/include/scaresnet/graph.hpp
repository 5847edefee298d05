#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

#include "scaresnet/tensor.hpp"

namespace scaresnet {

enum class OpKind {
  kLeaf,
  kAdd,
  kMul,
  kScale,
  kMatmul,
  kConv2d,
  kDepthwiseConv2d,
  kPointwiseConv2d,
  kMaxPool2d,
  kGlobalAvgPool,
  kRelu,
  kSigmoid,
  kSoftmaxLastAxis,
  kLinear,
  kConcat,
  kReshape,
  kGroupNorm,
  kSum,
  kSliceChannels,
  kCcaAggregate,
  kBceLogitLoss,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kDepthwiseConv2d: return "depthwise-conv2d";
    case OpKind::kPointwiseConv2d: return "pointwise-conv2d";
    case OpKind::kMaxPool2d: return "maxpool2d";
    case OpKind::kGlobalAvgPool: return "global-avg-pool";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmaxLastAxis: return "softmax-last-axis";
    case OpKind::kLinear: return "linear";
    case OpKind::kConcat: return "concat-channels";
    case OpKind::kReshape: return "reshape";
    case OpKind::kGroupNorm: return "group-norm";
    case OpKind::kSum: return "sum";
    case OpKind::kSliceChannels: return "slice-channels";
    case OpKind::kCcaAggregate: return "cca-aggregate";
    case OpKind::kBceLogitLoss: return "bce-logit-loss";
  }
  return "?";
}

/// Attribute set shared by all op kinds; each kind reads the fields it
/// documents and ignores the rest.
struct Attrs {
  int kh = 0, kw = 0;  // pooling kernel
  int sh = 1, sw = 1;  // stride
  int ph = 0, pw = 0;  // padding
  int groups = 8;      // group-norm
  int axis = 0;        // concat axis (0 = channels)
  int begin = 0;       // slice-channels
  int count = 0;       // slice-channels
  double factor = 1.0;   // scale
  double eps = 1e-5;     // group-norm
  double target = 0.0;   // bce-logit-loss label
  Shape shape;           // reshape target
};

namespace detail {

inline std::uint64_t next_graph_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

// Flat index into a broadcast operand: axes with extent 1 stay at 0.
struct BcastIndexer {
  std::vector<int> out_ext;
  std::vector<std::size_t> stride;  // 0 on broadcast axes

  BcastIndexer(const Shape& out, const Shape& in) {
    out_ext.assign(out.begin(), out.end());
    stride.resize(out.size());
    std::size_t s = 1;
    for (int d = static_cast<int>(out.size()) - 1; d >= 0; --d) {
      stride[d] = (in[d] == 1) ? 0 : s;
      s *= static_cast<std::size_t>(in[d]);
    }
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    std::vector<int> idx(out_ext.size(), 0);
    std::size_t n = 1;
    for (int e : out_ext) n *= static_cast<std::size_t>(e);
    std::size_t in_flat = 0;
    for (std::size_t out_flat = 0; out_flat < n; ++out_flat) {
      fn(out_flat, in_flat);
      for (int d = static_cast<int>(idx.size()) - 1; d >= 0; --d) {
        ++idx[d];
        in_flat += stride[d];
        if (idx[d] < out_ext[d]) break;
        in_flat -= stride[d] * static_cast<std::size_t>(out_ext[d]);
        idx[d] = 0;
      }
    }
  }
};

// Criss-cross affinity softmax at one position: weights over the W row
// entries of row i (position (i,j) included at r=j) followed by the H-1
// column entries of column j with row i skipped.
template <typename T>
void cca_alpha_at(const T* q, const T* k, int dq, int H, int W, int i, int j,
                  std::vector<T>& e) {
  const int S = H + W - 1;
  e.assign(S, T(0));
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t u = static_cast<std::size_t>(i) * W + j;
  for (int r = 0; r < W; ++r) {
    const std::size_t p = static_cast<std::size_t>(i) * W + r;
    T acc = 0;
    for (int c = 0; c < dq; ++c) acc += q[c * plane + u] * k[c * plane + p];
    e[r] = acc;
  }
  for (int r = W; r < S; ++r) {
    int ii = r - W;
    if (ii >= i) ++ii;
    const std::size_t p = static_cast<std::size_t>(ii) * W + j;
    T acc = 0;
    for (int c = 0; c < dq; ++c) acc += q[c * plane + u] * k[c * plane + p];
    e[r] = acc;
  }
  T m = e[0];
  for (int r = 1; r < S; ++r) m = std::max(m, e[r]);
  T z = 0;
  for (int r = 0; r < S; ++r) {
    e[r] = std::exp(e[r] - m);
    z += e[r];
  }
  for (int r = 0; r < S; ++r) e[r] /= z;
}

}  // namespace detail

/// Append-only operation tape. Nodes are recorded in topological order
/// (every parent precedes its child); backward walks the tape once in
/// reverse. One graph is single-writer; independent samples should use
/// independent graphs.
template <typename T>
class Graph {
  using State = detail::TensorState<T>;

 public:
  Graph() : id_(detail::next_graph_id()) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  std::size_t size() const { return nodes_.size(); }

  /// Registers a free tensor as a leaf of this graph (idempotent).
  Tensor<T> leaf(const Tensor<T>& t) {
    bind(t);
    return t;
  }

  /// Applies one operation from the op table and appends its node.
  Tensor<T> forward(OpKind kind, const std::vector<Tensor<T>>& inputs,
                    const Attrs& attrs = {}) {
    if (kind == OpKind::kLeaf)
      throw ValueError("forward: leaf is not an executable op");
    std::vector<int> parents;
    parents.reserve(inputs.size());
    for (const auto& t : inputs) {
      if (!t.valid()) throw ValueError("forward: invalid input tensor");
      parents.push_back(bind(t));
    }
    Node node;
    node.kind = kind;
    node.attrs = attrs;
    node.parents = std::move(parents);
    node.out = std::make_shared<State>();
    compute(node);
    node.out->graph_id = id_;
    node.out->node_id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    return Tensor<T>(node.out);
  }

  /// Reverse-mode sweep from a scalar-shaped root. Gradients of all
  /// reachable tensors are overwritten (never accumulated across calls);
  /// unreachable tensors end with grad absent.
  void backward(const Tensor<T>& root) {
    if (!root.valid() || root.state_->graph_id != id_)
      throw ValueError("backward: root does not belong to this graph");
    if (!scalar_shaped(root.shape()))
      throw ValueError("backward: root must be scalar-shaped, got " +
                       shape_str(root.shape()));
    const int root_id = root.state_->node_id;

    for (auto& n : nodes_) n.out->grad.reset();

    std::vector<char> reachable(nodes_.size(), 0);
    std::vector<int> stack{root_id};
    reachable[root_id] = 1;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      for (int p : nodes_[id].parents)
        if (!reachable[p]) {
          reachable[p] = 1;
          stack.push_back(p);
        }
    }

    grad_buf(*nodes_[root_id].out)[0] = T(1);
    for (int id = root_id; id >= 0; --id) {
      if (!reachable[id]) continue;
      const Node& n = nodes_[id];
      if (n.kind == OpKind::kLeaf || !n.out->grad) continue;
      vjp(n);
    }
  }

  // ---- convenience builders -------------------------------------------

  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return forward(OpKind::kAdd, {a, b});
  }
  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return forward(OpKind::kMul, {a, b});
  }
  Tensor<T> scale(const Tensor<T>& x, double factor) {
    Attrs at;
    at.factor = factor;
    return forward(OpKind::kScale, {x}, at);
  }
  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    return forward(OpKind::kMatmul, {a, b});
  }
  Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w,
                   const Attrs& at = {}) {
    return forward(OpKind::kConv2d, {x, w}, at);
  }
  Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                   const Attrs& at = {}) {
    return forward(OpKind::kConv2d, {x, w, b}, at);
  }
  Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& w,
                             const Attrs& at = {}) {
    return forward(OpKind::kDepthwiseConv2d, {x, w}, at);
  }
  Tensor<T> pointwise_conv2d(const Tensor<T>& x, const Tensor<T>& w) {
    return forward(OpKind::kPointwiseConv2d, {x, w});
  }
  Tensor<T> maxpool2d(const Tensor<T>& x, const Attrs& at) {
    return forward(OpKind::kMaxPool2d, {x}, at);
  }
  Tensor<T> maxpool2d(const Tensor<T>& x, int k, int s, int p) {
    Attrs at;
    at.kh = at.kw = k;
    at.sh = at.sw = s;
    at.ph = at.pw = p;
    return forward(OpKind::kMaxPool2d, {x}, at);
  }
  Tensor<T> global_avg_pool(const Tensor<T>& x) {
    return forward(OpKind::kGlobalAvgPool, {x});
  }
  Tensor<T> relu(const Tensor<T>& x) { return forward(OpKind::kRelu, {x}); }
  Tensor<T> sigmoid(const Tensor<T>& x) {
    return forward(OpKind::kSigmoid, {x});
  }
  Tensor<T> softmax_last_axis(const Tensor<T>& x) {
    return forward(OpKind::kSoftmaxLastAxis, {x});
  }
  Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w) {
    return forward(OpKind::kLinear, {x, w});
  }
  Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w,
                   const Tensor<T>& b) {
    return forward(OpKind::kLinear, {x, w, b});
  }
  Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis = 0) {
    Attrs at;
    at.axis = axis;
    return forward(OpKind::kConcat, xs, at);
  }
  Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    Attrs at;
    at.shape = std::move(shape);
    return forward(OpKind::kReshape, {x}, at);
  }
  Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                       const Tensor<T>& beta, int groups = 8,
                       double eps = 1e-5) {
    Attrs at;
    at.groups = groups;
    at.eps = eps;
    return forward(OpKind::kGroupNorm, {x, gamma, beta}, at);
  }
  Tensor<T> sum(const Tensor<T>& x) { return forward(OpKind::kSum, {x}); }
  Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count) {
    Attrs at;
    at.begin = begin;
    at.count = count;
    return forward(OpKind::kSliceChannels, {x}, at);
  }
  Tensor<T> cca_aggregate(const Tensor<T>& q, const Tensor<T>& k,
                          const Tensor<T>& v) {
    return forward(OpKind::kCcaAggregate, {q, k, v});
  }
  Tensor<T> bce_logit_loss(const Tensor<T>& z, double target) {
    Attrs at;
    at.target = target;
    return forward(OpKind::kBceLogitLoss, {z}, at);
  }

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    Attrs attrs;
    std::vector<int> parents;
    std::shared_ptr<State> out;
  };

  std::vector<Node> nodes_;
  std::uint64_t id_;

  int bind(const Tensor<T>& t) {
    State& st = *t.state_;
    if (st.graph_id == id_) return st.node_id;
    Node node;
    node.kind = OpKind::kLeaf;
    node.out = t.state_;
    st.graph_id = id_;
    st.node_id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(node));
    return st.node_id;
  }

  static std::vector<T>& grad_buf(State& st) {
    if (!st.grad)
      st.grad = std::make_shared<std::vector<T>>(st.data->size(), T(0));
    return *st.grad;
  }

  const State& parent(const Node& n, std::size_t i) const {
    return *nodes_[n.parents[i]].out;
  }
  State& parent_mut(const Node& n, std::size_t i) const {
    return *nodes_[n.parents[i]].out;
  }

  [[noreturn]] static void axis_mismatch(OpKind k, const char* what, int axis,
                                         int expected, int got) {
    throw ShapeError(std::string(op_name(k)) + ": " + what + " at axis " +
                     std::to_string(axis) + ": expected " +
                     std::to_string(expected) + ", got " +
                     std::to_string(got));
  }

  static void require_rank(OpKind k, const char* what, const Shape& s,
                           std::size_t rank) {
    if (s.size() != rank)
      throw ShapeError(std::string(op_name(k)) + ": " + what + " must have " +
                       std::to_string(rank) + " axes, got " + shape_str(s));
  }

  static void check_broadcast(OpKind k, const Shape& a, const Shape& b) {
    if (a.size() != b.size())
      throw ShapeError(std::string(op_name(k)) + ": rank mismatch " +
                       shape_str(a) + " vs " + shape_str(b));
    for (std::size_t d = 0; d < a.size(); ++d)
      if (b[d] != a[d] && b[d] != 1)
        axis_mismatch(k, "extent mismatch", static_cast<int>(d), a[d], b[d]);
  }

  // Output extent for a conv/pool axis, rejecting non-positive results.
  static int out_extent(OpKind k, const char* axis_name, int in, int kernel,
                        int stride, int pad) {
    if (kernel < 1 || stride < 1 || pad < 0)
      throw ValueError(std::string(op_name(k)) +
                       ": kernel/stride must be >= 1 and padding >= 0");
    if (in + 2 * pad < kernel || conv_out_extent(in, kernel, stride, pad) < 1)
      throw ShapeError(std::string(op_name(k)) +
                       ": non-positive output extent on " + axis_name +
                       " (in=" + std::to_string(in) +
                       ", kernel=" + std::to_string(kernel) +
                       ", stride=" + std::to_string(stride) +
                       ", padding=" + std::to_string(pad) + ")");
    return conv_out_extent(in, kernel, stride, pad);
  }

  void compute(Node& n);
  void vjp(const Node& n);
};

// ---------------------------------------------------------------------------
// forward kernels
// ---------------------------------------------------------------------------

template <typename T>
void Graph<T>::compute(Node& n) {
  const OpKind k = n.kind;
  const Attrs& at = n.attrs;
  auto in = [&](std::size_t i) -> const State& { return parent(n, i); };
  auto narg = n.parents.size();
  auto expect_args = [&](std::size_t lo, std::size_t hi) {
    if (narg < lo || narg > hi)
      throw ShapeError(std::string(op_name(k)) + ": wrong input count " +
                       std::to_string(narg));
  };

  Shape out_shape;
  switch (k) {
    case OpKind::kAdd:
    case OpKind::kMul: {
      expect_args(2, 2);
      check_broadcast(k, in(0).shape, in(1).shape);
      out_shape = in(0).shape;
      break;
    }
    case OpKind::kScale:
    case OpKind::kRelu:
    case OpKind::kSigmoid:
    case OpKind::kSoftmaxLastAxis: {
      expect_args(1, 1);
      out_shape = in(0).shape;
      break;
    }
    case OpKind::kMatmul: {
      expect_args(2, 2);
      require_rank(k, "lhs", in(0).shape, 2);
      require_rank(k, "rhs", in(1).shape, 2);
      if (in(0).shape[1] != in(1).shape[0])
        axis_mismatch(k, "inner extent mismatch", 1, in(0).shape[1],
                      in(1).shape[0]);
      out_shape = {in(0).shape[0], in(1).shape[1]};
      break;
    }
    case OpKind::kConv2d: {
      expect_args(2, 3);
      require_rank(k, "input", in(0).shape, 3);
      require_rank(k, "weight", in(1).shape, 4);
      if (in(1).shape[1] != in(0).shape[0])
        axis_mismatch(k, "input channel mismatch", 0, in(1).shape[1],
                      in(0).shape[0]);
      if (narg == 3) {
        require_rank(k, "bias", in(2).shape, 1);
        if (in(2).shape[0] != in(1).shape[0])
          axis_mismatch(k, "bias extent mismatch", 0, in(1).shape[0],
                        in(2).shape[0]);
      }
      int oh = out_extent(k, "height", in(0).shape[1], in(1).shape[2], at.sh,
                          at.ph);
      int ow = out_extent(k, "width", in(0).shape[2], in(1).shape[3], at.sw,
                          at.pw);
      out_shape = {in(1).shape[0], oh, ow};
      break;
    }
    case OpKind::kDepthwiseConv2d: {
      expect_args(2, 3);
      require_rank(k, "input", in(0).shape, 3);
      require_rank(k, "weight", in(1).shape, 3);
      if (in(1).shape[0] != in(0).shape[0])
        axis_mismatch(k, "channel mismatch", 0, in(0).shape[0],
                      in(1).shape[0]);
      if (narg == 3) {
        require_rank(k, "bias", in(2).shape, 1);
        if (in(2).shape[0] != in(0).shape[0])
          axis_mismatch(k, "bias extent mismatch", 0, in(0).shape[0],
                        in(2).shape[0]);
      }
      int oh = out_extent(k, "height", in(0).shape[1], in(1).shape[1], at.sh,
                          at.ph);
      int ow = out_extent(k, "width", in(0).shape[2], in(1).shape[2], at.sw,
                          at.pw);
      out_shape = {in(0).shape[0], oh, ow};
      break;
    }
    case OpKind::kPointwiseConv2d: {
      expect_args(2, 3);
      require_rank(k, "input", in(0).shape, 3);
      require_rank(k, "weight", in(1).shape, 2);
      if (in(1).shape[1] != in(0).shape[0])
        axis_mismatch(k, "input channel mismatch", 0, in(1).shape[1],
                      in(0).shape[0]);
      if (narg == 3) {
        require_rank(k, "bias", in(2).shape, 1);
        if (in(2).shape[0] != in(1).shape[0])
          axis_mismatch(k, "bias extent mismatch", 0, in(1).shape[0],
                        in(2).shape[0]);
      }
      out_shape = {in(1).shape[0], in(0).shape[1], in(0).shape[2]};
      break;
    }
    case OpKind::kMaxPool2d: {
      expect_args(1, 1);
      require_rank(k, "input", in(0).shape, 3);
      if (2 * at.ph > at.kh || 2 * at.pw > at.kw)
        throw ValueError(
            "maxpool2d: padding may not exceed half the kernel size");
      int oh = out_extent(k, "height", in(0).shape[1], at.kh, at.sh, at.ph);
      int ow = out_extent(k, "width", in(0).shape[2], at.kw, at.sw, at.pw);
      out_shape = {in(0).shape[0], oh, ow};
      break;
    }
    case OpKind::kGlobalAvgPool: {
      expect_args(1, 1);
      require_rank(k, "input", in(0).shape, 3);
      out_shape = {in(0).shape[0]};
      break;
    }
    case OpKind::kLinear: {
      expect_args(2, 3);
      require_rank(k, "input", in(0).shape, 1);
      require_rank(k, "weight", in(1).shape, 2);
      if (in(1).shape[1] != in(0).shape[0])
        axis_mismatch(k, "input extent mismatch", 1, in(1).shape[1],
                      in(0).shape[0]);
      if (narg == 3) {
        require_rank(k, "bias", in(2).shape, 1);
        if (in(2).shape[0] != in(1).shape[0])
          axis_mismatch(k, "bias extent mismatch", 0, in(1).shape[0],
                        in(2).shape[0]);
      }
      out_shape = {in(1).shape[0]};
      break;
    }
    case OpKind::kConcat: {
      expect_args(1, 64);
      const Shape& s0 = in(0).shape;
      const int axis = at.axis;
      if (axis < 0 || axis >= static_cast<int>(s0.size()))
        throw ShapeError("concat-channels: axis out of range");
      int total = 0;
      for (std::size_t i = 0; i < narg; ++i) {
        const Shape& s = in(i).shape;
        if (s.size() != s0.size())
          throw ShapeError("concat-channels: rank mismatch " + shape_str(s0) +
                           " vs " + shape_str(s));
        for (std::size_t d = 0; d < s.size(); ++d)
          if (static_cast<int>(d) != axis && s[d] != s0[d])
            axis_mismatch(k, "extent mismatch", static_cast<int>(d), s0[d],
                          s[d]);
        total += s[axis];
      }
      out_shape = s0;
      out_shape[axis] = total;
      break;
    }
    case OpKind::kReshape: {
      expect_args(1, 1);
      if (at.shape.empty())
        throw ShapeError("reshape: empty target shape");
      for (std::size_t i = 0; i < at.shape.size(); ++i)
        if (at.shape[i] <= 0)
          throw ShapeError("reshape: non-positive extent at axis " +
                           std::to_string(i));
      if (numel(at.shape) != numel(in(0).shape))
        throw ShapeError("reshape: element count mismatch " +
                         shape_str(in(0).shape) + " -> " +
                         shape_str(at.shape));
      out_shape = at.shape;
      break;
    }
    case OpKind::kGroupNorm: {
      expect_args(3, 3);
      require_rank(k, "input", in(0).shape, 3);
      require_rank(k, "gamma", in(1).shape, 1);
      require_rank(k, "beta", in(2).shape, 1);
      const int C = in(0).shape[0];
      if (in(1).shape[0] != C)
        axis_mismatch(k, "gamma extent mismatch", 0, C, in(1).shape[0]);
      if (in(2).shape[0] != C)
        axis_mismatch(k, "beta extent mismatch", 0, C, in(2).shape[0]);
      if (at.groups < 1 || C % at.groups != 0)
        throw ValueError("group-norm: groups (" + std::to_string(at.groups) +
                         ") must divide channels (" + std::to_string(C) + ")");
      out_shape = in(0).shape;
      break;
    }
    case OpKind::kSum: {
      expect_args(1, 1);
      out_shape = {1};
      break;
    }
    case OpKind::kSliceChannels: {
      expect_args(1, 1);
      if (in(0).shape.empty()) throw ShapeError("slice-channels: rank 0");
      if (at.begin < 0 || at.count < 1 ||
          at.begin + at.count > in(0).shape[0])
        throw ShapeError("slice-channels: range [" + std::to_string(at.begin) +
                         ", " + std::to_string(at.begin + at.count) +
                         ") out of bounds for axis 0 extent " +
                         std::to_string(in(0).shape[0]));
      out_shape = in(0).shape;
      out_shape[0] = at.count;
      break;
    }
    case OpKind::kCcaAggregate: {
      expect_args(3, 3);
      require_rank(k, "query", in(0).shape, 3);
      require_rank(k, "key", in(1).shape, 3);
      require_rank(k, "value", in(2).shape, 3);
      if (in(0).shape != in(1).shape)
        throw ShapeError("cca-aggregate: query/key shape mismatch " +
                         shape_str(in(0).shape) + " vs " +
                         shape_str(in(1).shape));
      if (in(2).shape[1] != in(0).shape[1] ||
          in(2).shape[2] != in(0).shape[2])
        throw ShapeError("cca-aggregate: value spatial mismatch " +
                         shape_str(in(2).shape) + " vs " +
                         shape_str(in(0).shape));
      out_shape = in(2).shape;
      break;
    }
    case OpKind::kBceLogitLoss: {
      expect_args(1, 1);
      if (numel(in(0).shape) != 1)
        throw ShapeError("bce-logit-loss: logit must be scalar-shaped, got " +
                         shape_str(in(0).shape));
      out_shape = {1};
      break;
    }
    case OpKind::kLeaf:
      throw ValueError("leaf has no kernel");
  }

  n.out->shape = out_shape;
  n.out->data = std::make_shared<std::vector<T>>(numel(out_shape), T(0));
  std::vector<T>& y = *n.out->data;

  switch (k) {
    case OpKind::kAdd: {
      const auto& a = *in(0).data;
      const auto& b = *in(1).data;
      detail::BcastIndexer bi(in(0).shape, in(1).shape);
      bi.for_each([&](std::size_t o, std::size_t i) { y[o] = a[o] + b[i]; });
      break;
    }
    case OpKind::kMul: {
      const auto& a = *in(0).data;
      const auto& b = *in(1).data;
      detail::BcastIndexer bi(in(0).shape, in(1).shape);
      bi.for_each([&](std::size_t o, std::size_t i) { y[o] = a[o] * b[i]; });
      break;
    }
    case OpKind::kScale: {
      const auto& x = *in(0).data;
      const T f = static_cast<T>(at.factor);
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = f * x[i];
      break;
    }
    case OpKind::kMatmul: {
      const auto& a = *in(0).data;
      const auto& b = *in(1).data;
      const int M = in(0).shape[0], K = in(0).shape[1], N = in(1).shape[1];
      for (int m = 0; m < M; ++m)
        for (int kk = 0; kk < K; ++kk) {
          const T av = a[m * K + kk];
          for (int nn = 0; nn < N; ++nn) y[m * N + nn] += av * b[kk * N + nn];
        }
      break;
    }
    case OpKind::kConv2d: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      const T* bias = narg == 3 ? in(2).data->data() : nullptr;
      const int Ci = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int Co = in(1).shape[0], KH = in(1).shape[2], KW = in(1).shape[3];
      const int OH = n.out->shape[1], OW = n.out->shape[2];
      for (int co = 0; co < Co; ++co)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T acc = bias ? bias[co] : T(0);
            for (int ci = 0; ci < Ci; ++ci)
              for (int r = 0; r < KH; ++r) {
                const int ih = oh * at.sh - at.ph + r;
                if (ih < 0 || ih >= H) continue;
                for (int c = 0; c < KW; ++c) {
                  const int iw = ow * at.sw - at.pw + c;
                  if (iw < 0 || iw >= W) continue;
                  acc += w[((co * Ci + ci) * KH + r) * KW + c] *
                         x[(ci * H + ih) * W + iw];
                }
              }
            y[(co * OH + oh) * OW + ow] = acc;
          }
      break;
    }
    case OpKind::kDepthwiseConv2d: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      const T* bias = narg == 3 ? in(2).data->data() : nullptr;
      const int C = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int KH = in(1).shape[1], KW = in(1).shape[2];
      const int OH = n.out->shape[1], OW = n.out->shape[2];
      for (int c0 = 0; c0 < C; ++c0)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T acc = bias ? bias[c0] : T(0);
            for (int r = 0; r < KH; ++r) {
              const int ih = oh * at.sh - at.ph + r;
              if (ih < 0 || ih >= H) continue;
              for (int c = 0; c < KW; ++c) {
                const int iw = ow * at.sw - at.pw + c;
                if (iw < 0 || iw >= W) continue;
                acc += w[(c0 * KH + r) * KW + c] * x[(c0 * H + ih) * W + iw];
              }
            }
            y[(c0 * OH + oh) * OW + ow] = acc;
          }
      break;
    }
    case OpKind::kPointwiseConv2d: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      const T* bias = narg == 3 ? in(2).data->data() : nullptr;
      const int Ci = in(0).shape[0];
      const std::size_t plane =
          static_cast<std::size_t>(in(0).shape[1]) * in(0).shape[2];
      const int Co = in(1).shape[0];
      for (int co = 0; co < Co; ++co) {
        T* yo = y.data() + co * plane;
        if (bias)
          for (std::size_t p = 0; p < plane; ++p) yo[p] = bias[co];
        for (int ci = 0; ci < Ci; ++ci) {
          const T wv = w[co * Ci + ci];
          const T* xi = x.data() + ci * plane;
          for (std::size_t p = 0; p < plane; ++p) yo[p] += wv * xi[p];
        }
      }
      break;
    }
    case OpKind::kMaxPool2d: {
      const auto& x = *in(0).data;
      const int C = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int OH = n.out->shape[1], OW = n.out->shape[2];
      for (int c0 = 0; c0 < C; ++c0)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T best = -std::numeric_limits<T>::infinity();
            for (int r = 0; r < at.kh; ++r) {
              const int ih = oh * at.sh - at.ph + r;
              if (ih < 0 || ih >= H) continue;
              for (int c = 0; c < at.kw; ++c) {
                const int iw = ow * at.sw - at.pw + c;
                if (iw < 0 || iw >= W) continue;
                best = std::max(best, x[(c0 * H + ih) * W + iw]);
              }
            }
            y[(c0 * OH + oh) * OW + ow] = best;
          }
      break;
    }
    case OpKind::kGlobalAvgPool: {
      const auto& x = *in(0).data;
      const int C = in(0).shape[0];
      const std::size_t plane =
          static_cast<std::size_t>(in(0).shape[1]) * in(0).shape[2];
      for (int c = 0; c < C; ++c) {
        T acc = 0;
        for (std::size_t p = 0; p < plane; ++p) acc += x[c * plane + p];
        y[c] = acc / static_cast<T>(plane);
      }
      break;
    }
    case OpKind::kRelu: {
      const auto& x = *in(0).data;
      for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    }
    case OpKind::kSigmoid: {
      const auto& x = *in(0).data;
      for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = detail::stable_sigmoid(x[i]);
      break;
    }
    case OpKind::kSoftmaxLastAxis: {
      const auto& x = *in(0).data;
      const int L = in(0).shape.back();
      const std::size_t rows = x.size() / static_cast<std::size_t>(L);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * L;
        T* yr = y.data() + r * L;
        T m = xr[0];
        for (int i = 1; i < L; ++i) m = std::max(m, xr[i]);
        T z = 0;
        for (int i = 0; i < L; ++i) {
          yr[i] = std::exp(xr[i] - m);
          z += yr[i];
        }
        for (int i = 0; i < L; ++i) yr[i] /= z;
      }
      break;
    }
    case OpKind::kLinear: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      const int M = in(1).shape[0], N = in(1).shape[1];
      for (int m = 0; m < M; ++m) {
        T acc = narg == 3 ? (*in(2).data)[m] : T(0);
        for (int i = 0; i < N; ++i) acc += w[m * N + i] * x[i];
        y[m] = acc;
      }
      break;
    }
    case OpKind::kConcat: {
      const int axis = at.axis;
      const Shape& os = n.out->shape;
      std::size_t inner = 1;
      for (std::size_t d = axis + 1; d < os.size(); ++d)
        inner *= static_cast<std::size_t>(os[d]);
      std::size_t outer = 1;
      for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(os[d]);
      std::size_t off = 0;
      for (std::size_t i = 0; i < narg; ++i) {
        const auto& x = *in(i).data;
        const std::size_t block =
            static_cast<std::size_t>(in(i).shape[axis]) * inner;
        const std::size_t ostride = static_cast<std::size_t>(os[axis]) * inner;
        for (std::size_t o = 0; o < outer; ++o)
          std::copy_n(x.data() + o * block, block,
                      y.data() + o * ostride + off);
        off += block;
      }
      break;
    }
    case OpKind::kReshape: {
      y = *in(0).data;
      break;
    }
    case OpKind::kGroupNorm: {
      const auto& x = *in(0).data;
      const auto& gamma = *in(1).data;
      const auto& beta = *in(2).data;
      const int C = in(0).shape[0];
      const std::size_t plane =
          static_cast<std::size_t>(in(0).shape[1]) * in(0).shape[2];
      const int gs = C / at.groups;  // channels per group
      const T eps = static_cast<T>(at.eps);
      for (int g = 0; g < at.groups; ++g) {
        const std::size_t base = static_cast<std::size_t>(g) * gs * plane;
        const std::size_t cnt = static_cast<std::size_t>(gs) * plane;
        T mean = 0;
        for (std::size_t i = 0; i < cnt; ++i) mean += x[base + i];
        mean /= static_cast<T>(cnt);
        T var = 0;
        for (std::size_t i = 0; i < cnt; ++i) {
          const T d = x[base + i] - mean;
          var += d * d;
        }
        var /= static_cast<T>(cnt);
        const T inv = T(1) / std::sqrt(var + eps);
        for (int cc = 0; cc < gs; ++cc) {
          const int c = g * gs + cc;
          for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            y[i] = gamma[c] * (x[i] - mean) * inv + beta[c];
          }
        }
      }
      break;
    }
    case OpKind::kSum: {
      const auto& x = *in(0).data;
      T acc = 0;
      for (T v : x) acc += v;
      y[0] = acc;
      break;
    }
    case OpKind::kSliceChannels: {
      const auto& x = *in(0).data;
      const std::size_t inner = numel(in(0).shape) / in(0).shape[0];
      std::copy_n(x.data() + at.begin * inner, at.count * inner, y.data());
      break;
    }
    case OpKind::kCcaAggregate: {
      const auto& q = *in(0).data;
      const auto& kk = *in(1).data;
      const auto& v = *in(2).data;
      const int dq = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int dv = in(2).shape[0];
      const int S = H + W - 1;
      const std::size_t plane = static_cast<std::size_t>(H) * W;
      std::vector<T> alpha;
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          detail::cca_alpha_at(q.data(), kk.data(), dq, H, W, i, j, alpha);
          const std::size_t u = static_cast<std::size_t>(i) * W + j;
          for (int r = 0; r < S; ++r) {
            std::size_t p;
            if (r < W) {
              p = static_cast<std::size_t>(i) * W + r;
            } else {
              int ii = r - W;
              if (ii >= i) ++ii;
              p = static_cast<std::size_t>(ii) * W + j;
            }
            const T a = alpha[r];
            for (int c = 0; c < dv; ++c) y[c * plane + u] += a * v[c * plane + p];
          }
        }
      break;
    }
    case OpKind::kBceLogitLoss: {
      const T z = (*in(0).data)[0];
      const T t = static_cast<T>(at.target);
      y[0] = std::max(z, T(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
      break;
    }
    case OpKind::kLeaf:
      break;
  }
}

// ---------------------------------------------------------------------------
// backward kernels (vector-Jacobian products)
// ---------------------------------------------------------------------------

template <typename T>
void Graph<T>::vjp(const Node& n) {
  const Attrs& at = n.attrs;
  const std::vector<T>& gy = *n.out->grad;
  auto in = [&](std::size_t i) -> const State& { return parent(n, i); };
  auto gin = [&](std::size_t i) -> std::vector<T>& {
    return grad_buf(parent_mut(n, i));
  };
  const auto narg = n.parents.size();

  switch (n.kind) {
    case OpKind::kAdd: {
      auto& ga = gin(0);
      auto& gb = gin(1);
      detail::BcastIndexer bi(in(0).shape, in(1).shape);
      bi.for_each([&](std::size_t o, std::size_t i) {
        ga[o] += gy[o];
        gb[i] += gy[o];
      });
      break;
    }
    case OpKind::kMul: {
      const auto& a = *in(0).data;
      const auto& b = *in(1).data;
      auto& ga = gin(0);
      auto& gb = gin(1);
      detail::BcastIndexer bi(in(0).shape, in(1).shape);
      bi.for_each([&](std::size_t o, std::size_t i) {
        ga[o] += gy[o] * b[i];
        gb[i] += gy[o] * a[o];
      });
      break;
    }
    case OpKind::kScale: {
      auto& gx = gin(0);
      const T f = static_cast<T>(at.factor);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += f * gy[i];
      break;
    }
    case OpKind::kMatmul: {
      const auto& a = *in(0).data;
      const auto& b = *in(1).data;
      auto& ga = gin(0);
      auto& gb = gin(1);
      const int M = in(0).shape[0], K = in(0).shape[1], N = in(1).shape[1];
      for (int m = 0; m < M; ++m)
        for (int kk = 0; kk < K; ++kk) {
          T acc = 0;
          for (int nn = 0; nn < N; ++nn) acc += gy[m * N + nn] * b[kk * N + nn];
          ga[m * K + kk] += acc;
        }
      for (int kk = 0; kk < K; ++kk)
        for (int nn = 0; nn < N; ++nn) {
          T acc = 0;
          for (int m = 0; m < M; ++m) acc += a[m * K + kk] * gy[m * N + nn];
          gb[kk * N + nn] += acc;
        }
      break;
    }
    case OpKind::kConv2d: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      auto& gx = gin(0);
      auto& gw = gin(1);
      T* gb = narg == 3 ? gin(2).data() : nullptr;
      const int Ci = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int Co = in(1).shape[0], KH = in(1).shape[2], KW = in(1).shape[3];
      const int OH = n.out->shape[1], OW = n.out->shape[2];
      for (int co = 0; co < Co; ++co)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            const T g = gy[(co * OH + oh) * OW + ow];
            if (gb) gb[co] += g;
            for (int ci = 0; ci < Ci; ++ci)
              for (int r = 0; r < KH; ++r) {
                const int ih = oh * at.sh - at.ph + r;
                if (ih < 0 || ih >= H) continue;
                for (int c = 0; c < KW; ++c) {
                  const int iw = ow * at.sw - at.pw + c;
                  if (iw < 0 || iw >= W) continue;
                  const std::size_t wi = ((co * Ci + ci) * KH + r) * KW + c;
                  const std::size_t xi = (ci * H + ih) * W + iw;
                  gw[wi] += g * x[xi];
                  gx[xi] += g * w[wi];
                }
              }
          }
      break;
    }
    case OpKind::kDepthwiseConv2d: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      auto& gx = gin(0);
      auto& gw = gin(1);
      T* gb = narg == 3 ? gin(2).data() : nullptr;
      const int C = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int KH = in(1).shape[1], KW = in(1).shape[2];
      const int OH = n.out->shape[1], OW = n.out->shape[2];
      for (int c0 = 0; c0 < C; ++c0)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            const T g = gy[(c0 * OH + oh) * OW + ow];
            if (gb) gb[c0] += g;
            for (int r = 0; r < KH; ++r) {
              const int ih = oh * at.sh - at.ph + r;
              if (ih < 0 || ih >= H) continue;
              for (int c = 0; c < KW; ++c) {
                const int iw = ow * at.sw - at.pw + c;
                if (iw < 0 || iw >= W) continue;
                const std::size_t wi = (c0 * KH + r) * KW + c;
                const std::size_t xi = (c0 * H + ih) * W + iw;
                gw[wi] += g * x[xi];
                gx[xi] += g * w[wi];
              }
            }
          }
      break;
    }
    case OpKind::kPointwiseConv2d: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      auto& gx = gin(0);
      auto& gw = gin(1);
      const int Ci = in(0).shape[0];
      const std::size_t plane =
          static_cast<std::size_t>(in(0).shape[1]) * in(0).shape[2];
      const int Co = in(1).shape[0];
      for (int co = 0; co < Co; ++co) {
        const T* g = gy.data() + co * plane;
        if (narg == 3) {
          T acc = 0;
          for (std::size_t p = 0; p < plane; ++p) acc += g[p];
          gin(2)[co] += acc;
        }
        for (int ci = 0; ci < Ci; ++ci) {
          const T* xi = x.data() + ci * plane;
          T* gxi = gx.data() + ci * plane;
          const T wv = w[co * Ci + ci];
          T acc = 0;
          for (std::size_t p = 0; p < plane; ++p) {
            acc += g[p] * xi[p];
            gxi[p] += g[p] * wv;
          }
          gw[co * Ci + ci] += acc;
        }
      }
      break;
    }
    case OpKind::kMaxPool2d: {
      // Re-derives the argmax (first maximum in window order); ties route
      // the whole gradient to the first occurrence.
      const auto& x = *in(0).data;
      auto& gx = gin(0);
      const int C = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int OH = n.out->shape[1], OW = n.out->shape[2];
      for (int c0 = 0; c0 < C; ++c0)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T best = -std::numeric_limits<T>::infinity();
            std::size_t bi = 0;
            for (int r = 0; r < at.kh; ++r) {
              const int ih = oh * at.sh - at.ph + r;
              if (ih < 0 || ih >= H) continue;
              for (int c = 0; c < at.kw; ++c) {
                const int iw = ow * at.sw - at.pw + c;
                if (iw < 0 || iw >= W) continue;
                const std::size_t xi = (c0 * H + ih) * W + iw;
                if (x[xi] > best) {
                  best = x[xi];
                  bi = xi;
                }
              }
            }
            gx[bi] += gy[(c0 * OH + oh) * OW + ow];
          }
      break;
    }
    case OpKind::kGlobalAvgPool: {
      auto& gx = gin(0);
      const int C = in(0).shape[0];
      const std::size_t plane =
          static_cast<std::size_t>(in(0).shape[1]) * in(0).shape[2];
      for (int c = 0; c < C; ++c) {
        const T g = gy[c] / static_cast<T>(plane);
        for (std::size_t p = 0; p < plane; ++p) gx[c * plane + p] += g;
      }
      break;
    }
    case OpKind::kRelu: {
      const auto& x = *in(0).data;
      auto& gx = gin(0);
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > T(0)) gx[i] += gy[i];
      break;
    }
    case OpKind::kSigmoid: {
      const auto& y = *n.out->data;
      auto& gx = gin(0);
      for (std::size_t i = 0; i < y.size(); ++i)
        gx[i] += gy[i] * y[i] * (T(1) - y[i]);
      break;
    }
    case OpKind::kSoftmaxLastAxis: {
      const auto& y = *n.out->data;
      auto& gx = gin(0);
      const int L = in(0).shape.back();
      const std::size_t rows = y.size() / static_cast<std::size_t>(L);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* yr = y.data() + r * L;
        const T* gr = gy.data() + r * L;
        T dot = 0;
        for (int i = 0; i < L; ++i) dot += gr[i] * yr[i];
        T* gxr = gx.data() + r * L;
        for (int i = 0; i < L; ++i) gxr[i] += yr[i] * (gr[i] - dot);
      }
      break;
    }
    case OpKind::kLinear: {
      const auto& x = *in(0).data;
      const auto& w = *in(1).data;
      auto& gx = gin(0);
      auto& gw = gin(1);
      const int M = in(1).shape[0], N = in(1).shape[1];
      for (int m = 0; m < M; ++m) {
        const T g = gy[m];
        if (narg == 3) gin(2)[m] += g;
        for (int i = 0; i < N; ++i) {
          gw[m * N + i] += g * x[i];
          gx[i] += g * w[m * N + i];
        }
      }
      break;
    }
    case OpKind::kConcat: {
      const int axis = at.axis;
      const Shape& os = n.out->shape;
      std::size_t inner = 1;
      for (std::size_t d = axis + 1; d < os.size(); ++d)
        inner *= static_cast<std::size_t>(os[d]);
      std::size_t outer = 1;
      for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(os[d]);
      std::size_t off = 0;
      for (std::size_t i = 0; i < narg; ++i) {
        auto& gx = gin(i);
        const std::size_t block =
            static_cast<std::size_t>(in(i).shape[axis]) * inner;
        const std::size_t ostride = static_cast<std::size_t>(os[axis]) * inner;
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t b = 0; b < block; ++b)
            gx[o * block + b] += gy[o * ostride + off + b];
        off += block;
      }
      break;
    }
    case OpKind::kReshape: {
      auto& gx = gin(0);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
      break;
    }
    case OpKind::kGroupNorm: {
      const auto& x = *in(0).data;
      const auto& gamma = *in(1).data;
      auto& gx = gin(0);
      auto& ggamma = gin(1);
      auto& gbeta = gin(2);
      const int C = in(0).shape[0];
      const std::size_t plane =
          static_cast<std::size_t>(in(0).shape[1]) * in(0).shape[2];
      const int gs = C / at.groups;
      const T eps = static_cast<T>(at.eps);
      std::vector<T> xhat(static_cast<std::size_t>(gs) * plane);
      std::vector<T> ghat(static_cast<std::size_t>(gs) * plane);
      for (int g = 0; g < at.groups; ++g) {
        const std::size_t base = static_cast<std::size_t>(g) * gs * plane;
        const std::size_t cnt = static_cast<std::size_t>(gs) * plane;
        T mean = 0;
        for (std::size_t i = 0; i < cnt; ++i) mean += x[base + i];
        mean /= static_cast<T>(cnt);
        T var = 0;
        for (std::size_t i = 0; i < cnt; ++i) {
          const T d = x[base + i] - mean;
          var += d * d;
        }
        var /= static_cast<T>(cnt);
        const T inv = T(1) / std::sqrt(var + eps);
        T mg = 0, mgx = 0;  // mean(ghat), mean(ghat * xhat)
        for (int cc = 0; cc < gs; ++cc) {
          const int c = g * gs + cc;
          for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = cc * plane + p;
            xhat[i] = (x[base + i] - mean) * inv;
            ghat[i] = gy[base + i] * gamma[c];
            mg += ghat[i];
            mgx += ghat[i] * xhat[i];
            ggamma[c] += gy[base + i] * xhat[i];
            gbeta[c] += gy[base + i];
          }
        }
        mg /= static_cast<T>(cnt);
        mgx /= static_cast<T>(cnt);
        for (std::size_t i = 0; i < cnt; ++i)
          gx[base + i] += (ghat[i] - mg - xhat[i] * mgx) * inv;
      }
      break;
    }
    case OpKind::kSum: {
      auto& gx = gin(0);
      const T g = gy[0];
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
      break;
    }
    case OpKind::kSliceChannels: {
      auto& gx = gin(0);
      const std::size_t inner = numel(in(0).shape) / in(0).shape[0];
      for (std::size_t i = 0; i < gy.size(); ++i)
        gx[at.begin * inner + i] += gy[i];
      break;
    }
    case OpKind::kCcaAggregate: {
      const auto& q = *in(0).data;
      const auto& kk = *in(1).data;
      const auto& v = *in(2).data;
      auto& gq = gin(0);
      auto& gk = gin(1);
      auto& gv = gin(2);
      const int dq = in(0).shape[0], H = in(0).shape[1], W = in(0).shape[2];
      const int dv = in(2).shape[0];
      const int S = H + W - 1;
      const std::size_t plane = static_cast<std::size_t>(H) * W;
      std::vector<T> alpha, dalpha(S);
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          detail::cca_alpha_at(q.data(), kk.data(), dq, H, W, i, j, alpha);
          const std::size_t u = static_cast<std::size_t>(i) * W + j;
          auto pos = [&](int r) -> std::size_t {
            if (r < W) return static_cast<std::size_t>(i) * W + r;
            int ii = r - W;
            if (ii >= i) ++ii;
            return static_cast<std::size_t>(ii) * W + j;
          };
          // dalpha[r] = <dout(u), v(pos)>, dv accumulation
          for (int r = 0; r < S; ++r) {
            const std::size_t p = pos(r);
            T acc = 0;
            for (int c = 0; c < dv; ++c) {
              const T g = gy[c * plane + u];
              acc += g * v[c * plane + p];
              gv[c * plane + p] += alpha[r] * g;
            }
            dalpha[r] = acc;
          }
          // softmax vjp: de = alpha .* (dalpha - <alpha, dalpha>)
          T dot = 0;
          for (int r = 0; r < S; ++r) dot += alpha[r] * dalpha[r];
          for (int r = 0; r < S; ++r) {
            const T de = alpha[r] * (dalpha[r] - dot);
            const std::size_t p = pos(r);
            for (int c = 0; c < dq; ++c) {
              gq[c * plane + u] += de * kk[c * plane + p];
              gk[c * plane + p] += de * q[c * plane + u];
            }
          }
        }
      break;
    }
    case OpKind::kBceLogitLoss: {
      const T z = (*in(0).data)[0];
      gin(0)[0] +=
          gy[0] * (detail::stable_sigmoid(z) - static_cast<T>(at.target));
      break;
    }
    case OpKind::kLeaf:
      break;
  }
}

}  // namespace scaresnet
