#pragma once

#include <random>

#include "scaresnet/graph.hpp"
#include "scaresnet/init.hpp"
#include "scaresnet/sppr_math.hpp"

namespace scaresnet {

/// Pyramid levels and parameter-formula interpretation for the SPPR layer.
/// Pooling kind is max throughout.
struct SPPRConfig {
  LevelQuadruple levels = LevelQuadruple::production();
  Interpretation interpretation = Interpretation::kLiteral;

  void validate() const { levels.validate(); }
};

struct SPPRCSPConfig {
  SPPRConfig sppr;
  int se_ratio = 16;
  int dse_kernel = 3;
  int c_out = 0;           // 0 = same as input channels
  bool dse_before = true;  // DSEConv position on the main branch
  bool dse_after = true;
  bool se_enabled = true;

  void validate() const {
    sppr.validate();
    if (se_ratio < 1) throw ValueError("spprcsp: se_ratio must be >= 1");
    if (dse_kernel < 1 || dse_kernel % 2 == 0)
      throw ValueError("spprcsp: dse_kernel must be a positive odd number");
  }
};

/// Squeeze-and-excitation weights: two linear maps C -> hidden -> C with
/// hidden = max(1, C / ratio).
template <typename T>
struct SEWeights {
  Tensor<T> w1, b1;  // (hidden, C), (hidden)
  Tensor<T> w2, b2;  // (C, hidden), (C)
  bool enabled = true;

  static SEWeights init(int channels, int ratio, std::mt19937_64& rng) {
    const int hidden = std::max(1, channels / ratio);
    SEWeights w;
    w.w1 = uniform_fan_in<T>({hidden, channels}, channels, rng);
    w.b1 = Tensor<T>::zeros({hidden});
    w.w2 = uniform_fan_in<T>({channels, hidden}, hidden, rng);
    w.b2 = Tensor<T>::zeros({channels});
    return w;
  }
};

/// Depthwise + pointwise convolution pair with SE gating on the output.
template <typename T>
struct DSEConvWeights {
  Tensor<T> depthwise;  // (C_in, k, k)
  Tensor<T> pointwise;  // (C_out, C_in)
  SEWeights<T> se;

  static DSEConvWeights init(int c_in, int c_out, int kernel, int se_ratio,
                             bool se_enabled, std::mt19937_64& rng) {
    DSEConvWeights w;
    w.depthwise = uniform_fan_in<T>({c_in, kernel, kernel}, kernel * kernel, rng);
    w.pointwise = uniform_fan_in<T>({c_out, c_in}, c_in, rng);
    w.se = SEWeights<T>::init(c_out, se_ratio, rng);
    w.se.enabled = se_enabled;
    return w;
  }
};

template <typename T>
struct SPPRCSPWeights {
  Tensor<T> compress_main;  // (C/2, C)
  Tensor<T> compress_skip;  // (C/2, C)
  DSEConvWeights<T> dse_pre;
  DSEConvWeights<T> dse_post;
  Tensor<T> fuse;  // (C_out, C)

  static SPPRCSPWeights init(int c_in, const SPPRCSPConfig& cfg,
                             std::mt19937_64& rng) {
    cfg.validate();
    if (c_in < 2 || c_in % 2 != 0)
      throw ValueError("spprcsp: input channels (" + std::to_string(c_in) +
                       ") must be even for the C -> C/2 compression");
    const int half = c_in / 2;
    const int c_out = cfg.c_out > 0 ? cfg.c_out : c_in;
    SPPRCSPWeights w;
    w.compress_main = uniform_fan_in<T>({half, c_in}, c_in, rng);
    w.compress_skip = uniform_fan_in<T>({half, c_in}, c_in, rng);
    w.dse_pre = DSEConvWeights<T>::init(half, half, cfg.dse_kernel,
                                        cfg.se_ratio, cfg.se_enabled, rng);
    w.dse_post = DSEConvWeights<T>::init(half, half, cfg.dse_kernel,
                                         cfg.se_ratio, cfg.se_enabled, rng);
    w.fuse = uniform_fan_in<T>({c_out, c_in}, c_in, rng);
    return w;
  }
};

/// SPPR: max-pool to each pyramid level (descending), flatten per channel,
/// concatenate into x^2+y^2+z^2 = w^2 values per channel, reshape to w x w.
/// Output is C x w x w for any input with H, W >= max level.
template <typename T>
Tensor<T> sppr_forward(Graph<T>& g, const Tensor<T>& x,
                       const SPPRConfig& cfg) {
  cfg.validate();
  if (x.shape().size() != 3)
    throw ShapeError("sppr_forward: input must be CxHxW");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const int maxl = cfg.levels.max_level();
  if (H < maxl || W < maxl)
    throw ValueError("sppr_forward: input " + std::to_string(H) + "x" +
                     std::to_string(W) + " below minimum pooled level " +
                     std::to_string(maxl));
  std::vector<Tensor<T>> flats;
  for (int l : cfg.levels.levels_descending()) {
    const AxisPoolingParams prow = pooling_params(H, l, cfg.interpretation);
    const AxisPoolingParams pcol = pooling_params(W, l, cfg.interpretation);
    Attrs at;
    at.kh = prow.kernel;
    at.sh = prow.stride;
    at.ph = prow.padding;
    at.kw = pcol.kernel;
    at.sw = pcol.stride;
    at.pw = pcol.padding;
    Tensor<T> pooled = g.maxpool2d(x, at);
    flats.push_back(g.reshape(pooled, {C, l * l}));
  }
  Tensor<T> cat = g.concat(flats, 1);
  const int w = cfg.levels.w;
  return g.reshape(cat, {C, w, w});
}

/// SE channel gating: exact per-channel spatial mean, two linear maps with
/// relu and sigmoid, then per-channel scaling of the input.
template <typename T>
Tensor<T> se_forward(Graph<T>& g, const Tensor<T>& x, const SEWeights<T>& w) {
  if (!w.enabled) return x;
  const int C = x.shape()[0];
  Tensor<T> squeeze = g.global_avg_pool(x);
  Tensor<T> hidden = g.relu(g.linear(squeeze, w.w1, w.b1));
  Tensor<T> gate = g.sigmoid(g.linear(hidden, w.w2, w.b2));
  return g.mul(x, g.reshape(gate, {C, 1, 1}));
}

template <typename T>
Tensor<T> dseconv_forward(Graph<T>& g, const Tensor<T>& x,
                          const DSEConvWeights<T>& w, int stride = 1,
                          int padding = -1) {
  const int k = w.depthwise.shape()[1];
  Attrs at;
  at.sh = at.sw = stride;
  at.ph = at.pw = padding >= 0 ? padding : k / 2;
  Tensor<T> dw = g.depthwise_conv2d(x, w.depthwise, at);
  Tensor<T> pw = g.pointwise_conv2d(dw, w.pointwise);
  return se_forward(g, pw, w.se);
}

/// SPPRCSP: main branch compresses to C/2, runs DSEConv / SPPR / DSEConv;
/// the skip branch compresses to C/2 and runs a parameter-free SPPR so both
/// reach w x w; branches concatenate back to C channels and fuse to C_out.
template <typename T>
Tensor<T> spprcsp_forward(Graph<T>& g, const Tensor<T>& x,
                          const SPPRCSPWeights<T>& w,
                          const SPPRCSPConfig& cfg) {
  cfg.validate();
  if (x.shape().size() != 3)
    throw ShapeError("spprcsp_forward: input must be CxHxW");
  Tensor<T> main = g.pointwise_conv2d(x, w.compress_main);
  if (cfg.dse_before) main = dseconv_forward(g, main, w.dse_pre);
  main = sppr_forward(g, main, cfg.sppr);
  if (cfg.dse_after) main = dseconv_forward(g, main, w.dse_post);
  Tensor<T> skip = g.pointwise_conv2d(x, w.compress_skip);
  skip = sppr_forward(g, skip, cfg.sppr);
  Tensor<T> cat = g.concat({main, skip}, 0);
  return g.pointwise_conv2d(cat, w.fuse);
}

// ---- parameter accounting (bias-free convolutions) ------------------------

/// Depthwise + pointwise weight count: c_in*k^2 + c_in*c_out.
inline std::size_t dseconv_conv_params(int c_in, int c_out, int kernel) {
  return static_cast<std::size_t>(c_in) * kernel * kernel +
         static_cast<std::size_t>(c_in) * c_out;
}

/// Weight count of the plain convolution the pair replaces: c_in*c_out*k^2.
inline std::size_t plain_conv_params(int c_in, int c_out, int kernel) {
  return static_cast<std::size_t>(c_in) * c_out * kernel * kernel;
}

inline std::size_t se_params(int channels, int ratio) {
  const std::size_t hidden = std::max(1, channels / ratio);
  return hidden * channels + hidden + channels * hidden + channels;
}

}  // namespace scaresnet
