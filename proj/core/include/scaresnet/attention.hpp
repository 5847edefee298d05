#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "scaresnet/graph.hpp"
#include "scaresnet/init.hpp"

namespace scaresnet {

/// Multi-head criss-cross attention hyperparameters. heads must divide
/// channels; qk_channels_per_head <= 0 selects the default
/// max(1, channels / (8 * heads)).
struct MHCCAConfig {
  int channels = 0;
  int heads = 4;
  int qk_channels_per_head = 0;
  int recurrence = 2;
  double pe_base = 10000.0;
  double residual_scale_init = 0.0;

  int qk_channels() const {
    if (qk_channels_per_head > 0) return qk_channels_per_head;
    return std::max(1, channels / (8 * heads));
  }
  int head_channels() const { return channels / heads; }

  void validate() const {
    if (channels < 1) throw ValueError("mhcca: channels must be >= 1");
    if (heads < 1) throw ValueError("mhcca: heads must be >= 1");
    if (channels % heads != 0)
      throw ValueError("mhcca: heads (" + std::to_string(heads) +
                       ") must divide channels (" + std::to_string(channels) +
                       ")");
    if (recurrence < 1) throw ValueError("mhcca: recurrence must be >= 1");
    if (pe_base <= 0) throw ValueError("mhcca: pe_base must be > 0");
  }
};

/// Per-head 1x1 query/key/value projections, a 1x1 output projection over
/// the concatenated heads, and the learnable residual scale gamma.
template <typename T>
struct MHCCAWeights {
  std::vector<Tensor<T>> query;  // per head: (dq, C/N)
  std::vector<Tensor<T>> key;    // per head: (dq, C/N)
  std::vector<Tensor<T>> value;  // per head: (C/N, C/N)
  Tensor<T> proj;                // (C, C)
  Tensor<T> gamma;               // (1), init residual_scale_init

  static MHCCAWeights init(const MHCCAConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const int hc = cfg.head_channels();
    const int dq = cfg.qk_channels();
    MHCCAWeights w;
    for (int h = 0; h < cfg.heads; ++h) {
      w.query.push_back(uniform_fan_in<T>({dq, hc}, hc, rng));
      w.key.push_back(uniform_fan_in<T>({dq, hc}, hc, rng));
      w.value.push_back(uniform_fan_in<T>({hc, hc}, hc, rng));
    }
    w.proj = uniform_fan_in<T>({cfg.channels, cfg.channels}, cfg.channels, rng);
    w.gamma = Tensor<T>::filled({1}, static_cast<T>(cfg.residual_scale_init));
    return w;
  }
};

/// Sinusoidal positional encoding over a CxHxW grid: the first C/2 channels
/// encode the row index, the last C/2 the column index; within each half,
/// channel pair (2k, 2k+1) holds sin and cos of pos / base^(2k / (C/2)).
/// Deterministic and weight-free. C must be divisible by 4.
template <typename T>
Tensor<T> sinusoidal_pe(int C, int H, int W, double base) {
  if (C < 4 || C % 4 != 0)
    throw ValueError("sinusoidal_pe: channels (" + std::to_string(C) +
                     ") must be divisible by 4");
  if (H < 1 || W < 1 || base <= 0)
    throw ValueError("sinusoidal_pe: invalid size or base");
  Tensor<T> pe = Tensor<T>::zeros({C, H, W});
  const int half = C / 2;
  for (int p = 0; p < half; ++p) {
    const int k = p / 2;
    const double freq = 1.0 / std::pow(base, 2.0 * k / half);
    const bool is_sin = p % 2 == 0;
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        const double row_angle = i * freq;
        const double col_angle = j * freq;
        pe(p, i, j) =
            static_cast<T>(is_sin ? std::sin(row_angle) : std::cos(row_angle));
        pe(half + p, i, j) =
            static_cast<T>(is_sin ? std::sin(col_angle) : std::cos(col_angle));
      }
  }
  return pe;
}

/// One criss-cross attention pass. Channels split into head slices; per head
/// and position u, affinities are dot products of query(u) with key(j) over
/// the H+W-1 positions sharing u's row or column (u counted once), softmaxed
/// and used to weight value(j). Heads are concatenated, projected, scaled by
/// gamma and added back onto the input.
template <typename T>
Tensor<T> criss_cross_step(Graph<T>& g, const Tensor<T>& x,
                           const MHCCAWeights<T>& w, const MHCCAConfig& cfg) {
  cfg.validate();
  if (x.shape().size() != 3 || x.shape()[0] != cfg.channels)
    throw ShapeError("criss_cross_step: input " + shape_str(x.shape()) +
                     " does not match configured channels " +
                     std::to_string(cfg.channels));
  const int hc = cfg.head_channels();
  std::vector<Tensor<T>> heads;
  heads.reserve(cfg.heads);
  for (int h = 0; h < cfg.heads; ++h) {
    Tensor<T> slice = g.slice_channels(x, h * hc, hc);
    Tensor<T> q = g.pointwise_conv2d(slice, w.query[h]);
    Tensor<T> k = g.pointwise_conv2d(slice, w.key[h]);
    Tensor<T> v = g.pointwise_conv2d(slice, w.value[h]);
    heads.push_back(g.cca_aggregate(q, k, v));
  }
  Tensor<T> cat = cfg.heads == 1 ? heads[0] : g.concat(heads, 0);
  Tensor<T> proj = g.pointwise_conv2d(cat, w.proj);
  Tensor<T> gamma3 = g.reshape(w.gamma, {1, 1, 1});
  return g.add(x, g.mul(proj, gamma3));
}

/// Full module: positional encoding is added once, the criss-cross pass runs
/// recurrence times with shared weights, and the encoding's direct
/// contribution is removed again so that only its effect on the attention
/// increments survives. With gamma == 0 the module is exactly the identity.
template <typename T>
Tensor<T> mhcca_forward(Graph<T>& g, const Tensor<T>& x,
                        const MHCCAWeights<T>& w, const MHCCAConfig& cfg) {
  cfg.validate();
  if (x.shape().size() != 3)
    throw ShapeError("mhcca_forward: input must be CxHxW");
  Tensor<T> pe =
      sinusoidal_pe<T>(cfg.channels, x.shape()[1], x.shape()[2], cfg.pe_base);
  Tensor<T> z0 = g.add(x, pe);
  Tensor<T> z = z0;
  for (int r = 0; r < cfg.recurrence; ++r) z = criss_cross_step(g, z, w, cfg);
  Tensor<T> delta = g.add(z, g.scale(z0, -1.0));
  return g.add(x, delta);
}

/// Softmaxed criss-cross affinity vector at one position, computed by the
/// same kernel the aggregate op uses. Exposed for property checks.
template <typename T>
std::vector<T> cca_attention_weights(const Tensor<T>& q, const Tensor<T>& k,
                                     int i, int j) {
  if (q.shape() != k.shape() || q.shape().size() != 3)
    throw ShapeError("cca_attention_weights: query/key shape mismatch");
  std::vector<T> alpha;
  detail::cca_alpha_at(q.data().data(), k.data().data(), q.shape()[0],
                       q.shape()[1], q.shape()[2], i, j, alpha);
  return alpha;
}

}  // namespace scaresnet
