#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "scaresnet/attention.hpp"
#include "scaresnet/spprcsp.hpp"

namespace scaresnet {

// ---- reports ---------------------------------------------------------------

struct TraceDetail {
  std::string name;
  std::size_t params = 0;
  std::size_t mult_adds = 0;
};

struct TraceRow {
  std::string layer;
  Shape in;
  Shape out;
  std::size_t params = 0;
  std::size_t mult_adds = 0;
  std::vector<TraceDetail> details;
};

/// Per-layer shape/parameter/mult-add walk; consecutive rows chain (row i's
/// output shape is row i+1's input shape).
struct ShapeTrace {
  Shape input;
  std::vector<TraceRow> rows;
  std::size_t total_params = 0;
  std::size_t total_mult_adds = 0;
};

struct LayerCount {
  std::string layer;
  std::size_t params = 0;
  std::size_t mult_adds = 0;
};

struct ParamCountReport {
  Shape input;
  std::size_t params = 0;
  std::size_t mult_adds = 0;
  bool compared_plain = false;
  std::size_t plain_params = 0;      // DSEConv units replaced by plain convs
  std::size_t plain_mult_adds = 0;
  double param_ratio = 0.0;          // configured / plain
  double mult_add_ratio = 0.0;
  std::vector<LayerCount> layers;
};

// ---- configuration ---------------------------------------------------------

enum class BlockType { kBasic, kBottleneck };

const char* block_type_name(BlockType t);
BlockType block_type_from_name(const std::string& name);

struct StemSpec {
  int kernel = 3;
  int stride = 2;
  int out_channels = 8;
  bool maxpool = false;  // 3x3/2 pool after the stem conv
};

struct StageSpec {
  int blocks = 1;
  BlockType type = BlockType::kBasic;
  int out_channels = 16;
  int stride = 2;
};

/// Stage stack with MH-CCA insertions and a terminal SPPRCSP. Accepted
/// inputs are multiples of the cumulative stride whose pre-SPPR feature map
/// reaches the largest pooled level on both axes.
struct BackboneConfig {
  std::string preset = "custom";
  StemSpec stem;
  std::vector<StageSpec> stages;
  std::vector<int> cca_after = {};  // stage indices gaining an MH-CCA module
  MHCCAConfig cca;                  // channels are taken from the host stage
  SPPRCSPConfig spprcsp;
  int gn_groups = 8;

  int cumulative_stride() const {
    int s = stem.stride * (stem.maxpool ? 2 : 1);
    for (const auto& st : stages) s *= st.stride;
    return s;
  }
  int min_input_extent() const {
    return cumulative_stride() * spprcsp.sppr.levels.max_level();
  }

  /// Two-stage basic-block net with total stride 8, small enough for
  /// finite-difference checks and the training demo.
  static BackboneConfig mini();
  /// 50-layer bottleneck layout (3,4,6,3) with total stride 32.
  static BackboneConfig scaresnet50();
  static BackboneConfig preset_by_name(const std::string& name);
};

// ---- layers ----------------------------------------------------------------

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const std::string& name() const = 0;
  virtual Tensor<T> forward(Graph<T>& g, const Tensor<T>& x) const = 0;
  virtual Shape out_shape(const Shape& in) const = 0;
  virtual std::size_t params() const = 0;
  virtual std::size_t mult_adds(const Shape& in) const = 0;
  virtual std::vector<TraceDetail> details(const Shape& in) const {
    return {};
  }
  // Counts for the comparison variant with plain convolutions in place of
  // DSEConv units; identical to the regular counts everywhere else.
  virtual std::size_t plain_params() const { return params(); }
  virtual std::size_t plain_mult_adds(const Shape& in) const {
    return mult_adds(in);
  }
  virtual void collect(
      std::vector<std::pair<std::string, Tensor<T>>>& out) = 0;
};

namespace detail {

inline std::size_t conv_macs(int c_in, int c_out, int k, const Shape& out) {
  return static_cast<std::size_t>(c_in) * c_out * k * k * out[1] * out[2];
}

// conv -> group-norm building brick shared by the stem and the residual
// blocks. Convolutions are bias-free; the affine norm provides the shift.
template <typename T>
struct ConvGN {
  Tensor<T> w, gamma, beta;
  int in_c = 0, out_c = 0, kernel = 1, stride = 1, pad = 0, groups = 8;

  static ConvGN init(int in_c, int out_c, int kernel, int stride, int groups,
                     std::mt19937_64& rng) {
    if (out_c % groups != 0)
      throw ValueError("group-norm groups (" + std::to_string(groups) +
                       ") must divide channels (" + std::to_string(out_c) +
                       ")");
    ConvGN u;
    u.in_c = in_c;
    u.out_c = out_c;
    u.kernel = kernel;
    u.stride = stride;
    u.pad = kernel / 2;
    u.groups = groups;
    u.w = uniform_fan_in<T>({out_c, in_c, kernel, kernel},
                            in_c * kernel * kernel, rng);
    u.gamma = Tensor<T>::filled({out_c}, T(1));
    u.beta = Tensor<T>::zeros({out_c});
    return u;
  }

  Tensor<T> forward(Graph<T>& g, const Tensor<T>& x) const {
    Attrs at;
    at.sh = at.sw = stride;
    at.ph = at.pw = pad;
    return g.group_norm(g.conv2d(x, w, at), gamma, beta, groups);
  }
  Shape out_shape(const Shape& in) const {
    return {out_c, conv_out_extent(in[1], kernel, stride, pad),
            conv_out_extent(in[2], kernel, stride, pad)};
  }
  std::size_t params() const {
    return static_cast<std::size_t>(out_c) * in_c * kernel * kernel +
           2 * static_cast<std::size_t>(out_c);
  }
  std::size_t macs(const Shape& in) const {
    return conv_macs(in_c, out_c, kernel, out_shape(in));
  }
  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, Tensor<T>>>& out) {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
};

template <typename T>
class StemLayer final : public Layer<T> {
 public:
  StemLayer(std::string name, const StemSpec& spec, int groups,
            std::mt19937_64& rng)
      : name_(std::move(name)),
        conv_(ConvGN<T>::init(3, spec.out_channels, spec.kernel, spec.stride,
                              groups, rng)),
        maxpool_(spec.maxpool) {}

  const std::string& name() const override { return name_; }
  Tensor<T> forward(Graph<T>& g, const Tensor<T>& x) const override {
    Tensor<T> y = g.relu(conv_.forward(g, x));
    if (maxpool_) y = g.maxpool2d(y, 3, 2, 1);
    return y;
  }
  Shape out_shape(const Shape& in) const override {
    Shape s = conv_.out_shape(in);
    if (maxpool_) {
      s[1] = conv_out_extent(s[1], 3, 2, 1);
      s[2] = conv_out_extent(s[2], 3, 2, 1);
    }
    return s;
  }
  std::size_t params() const override { return conv_.params(); }
  std::size_t mult_adds(const Shape& in) const override {
    return conv_.macs(in);
  }
  void collect(
      std::vector<std::pair<std::string, Tensor<T>>>& out) override {
    conv_.collect(name_, out);
  }

 private:
  std::string name_;
  ConvGN<T> conv_;
  bool maxpool_;
};

template <typename T>
class ResidualBlockLayer final : public Layer<T> {
 public:
  ResidualBlockLayer(std::string name, BlockType type, int in_c, int out_c,
                     int stride, int groups, std::mt19937_64& rng)
      : name_(std::move(name)), type_(type) {
    if (type == BlockType::kBottleneck) {
      if (out_c % 4 != 0)
        throw ValueError(name_ + ": bottleneck channels (" +
                         std::to_string(out_c) + ") must be divisible by 4");
      const int mid = out_c / 4;
      units_.push_back(ConvGN<T>::init(in_c, mid, 1, 1, groups, rng));
      units_.push_back(ConvGN<T>::init(mid, mid, 3, stride, groups, rng));
      units_.push_back(ConvGN<T>::init(mid, out_c, 1, 1, groups, rng));
    } else {
      units_.push_back(ConvGN<T>::init(in_c, out_c, 3, stride, groups, rng));
      units_.push_back(ConvGN<T>::init(out_c, out_c, 3, 1, groups, rng));
    }
    if (in_c != out_c || stride != 1) {
      skip_ = ConvGN<T>::init(in_c, out_c, 1, stride, groups, rng);
      has_skip_conv_ = true;
    }
  }

  const std::string& name() const override { return name_; }

  Tensor<T> forward(Graph<T>& g, const Tensor<T>& x) const override {
    Tensor<T> y = x;
    for (std::size_t i = 0; i < units_.size(); ++i) {
      y = units_[i].forward(g, y);
      if (i + 1 < units_.size()) y = g.relu(y);
    }
    Tensor<T> shortcut = has_skip_conv_ ? skip_.forward(g, x) : x;
    return g.relu(g.add(y, shortcut));
  }

  Shape out_shape(const Shape& in) const override {
    Shape s = in;
    for (const auto& u : units_) s = u.out_shape(s);
    return s;
  }

  std::size_t params() const override {
    std::size_t p = 0;
    for (const auto& u : units_) p += u.params();
    if (has_skip_conv_) p += skip_.params();
    return p;
  }

  std::size_t mult_adds(const Shape& in) const override {
    std::size_t m = 0;
    Shape s = in;
    for (const auto& u : units_) {
      m += u.macs(s);
      s = u.out_shape(s);
    }
    if (has_skip_conv_) m += skip_.macs(in);
    return m;
  }

  std::vector<TraceDetail> details(const Shape& in) const override {
    std::vector<TraceDetail> out;
    Shape s = in;
    for (std::size_t i = 0; i < units_.size(); ++i) {
      out.push_back({"conv" + std::to_string(i + 1), units_[i].params(),
                     units_[i].macs(s)});
      s = units_[i].out_shape(s);
    }
    if (has_skip_conv_)
      out.push_back({"skip", skip_.params(), skip_.macs(in)});
    return out;
  }

  void collect(
      std::vector<std::pair<std::string, Tensor<T>>>& out) override {
    for (std::size_t i = 0; i < units_.size(); ++i)
      units_[i].collect(name_ + ".conv" + std::to_string(i + 1), out);
    if (has_skip_conv_) skip_.collect(name_ + ".skip", out);
  }

 private:
  std::string name_;
  BlockType type_;
  std::vector<ConvGN<T>> units_;
  ConvGN<T> skip_;
  bool has_skip_conv_ = false;
};

template <typename T>
class MHCCALayer final : public Layer<T> {
 public:
  MHCCALayer(std::string name, MHCCAConfig cfg, std::mt19937_64& rng)
      : name_(std::move(name)), cfg_(cfg) {
    cfg_.validate();
    if (cfg_.channels % 4 != 0)
      throw ValueError(name_ + ": channels (" +
                       std::to_string(cfg_.channels) +
                       ") must be divisible by 4 for the positional encoding");
    weights_ = MHCCAWeights<T>::init(cfg_, rng);
  }

  const std::string& name() const override { return name_; }
  const MHCCAConfig& config() const { return cfg_; }
  MHCCAWeights<T>& weights() { return weights_; }

  Tensor<T> forward(Graph<T>& g, const Tensor<T>& x) const override {
    return mhcca_forward(g, x, weights_, cfg_);
  }
  Shape out_shape(const Shape& in) const override { return in; }

  std::size_t params() const override {
    const std::size_t hc = cfg_.head_channels();
    const std::size_t dq = cfg_.qk_channels();
    return cfg_.heads * (2 * dq * hc + hc * hc) +
           static_cast<std::size_t>(cfg_.channels) * cfg_.channels + 1;
  }

  std::size_t mult_adds(const Shape& in) const override {
    const std::size_t hw = static_cast<std::size_t>(in[1]) * in[2];
    const std::size_t S = static_cast<std::size_t>(in[1]) + in[2] - 1;
    const std::size_t hc = cfg_.head_channels();
    const std::size_t dq = cfg_.qk_channels();
    const std::size_t per_head =
        hw * hc * (2 * dq + hc)   // q/k/v projections
        + hw * S * dq             // affinities
        + hw * S * hc;            // weighted aggregation
    const std::size_t proj =
        hw * static_cast<std::size_t>(cfg_.channels) * cfg_.channels;
    return static_cast<std::size_t>(cfg_.recurrence) *
           (cfg_.heads * per_head + proj);
  }

  void collect(
      std::vector<std::pair<std::string, Tensor<T>>>& out) override {
    for (int h = 0; h < cfg_.heads; ++h) {
      const std::string p = name_ + ".head" + std::to_string(h + 1);
      out.emplace_back(p + ".q", weights_.query[h]);
      out.emplace_back(p + ".k", weights_.key[h]);
      out.emplace_back(p + ".v", weights_.value[h]);
    }
    out.emplace_back(name_ + ".proj", weights_.proj);
    out.emplace_back(name_ + ".gamma", weights_.gamma);
  }

 private:
  std::string name_;
  MHCCAConfig cfg_;
  MHCCAWeights<T> weights_;
};

template <typename T>
class SPPRCSPLayer final : public Layer<T> {
 public:
  SPPRCSPLayer(std::string name, int in_c, SPPRCSPConfig cfg,
               std::mt19937_64& rng)
      : name_(std::move(name)), in_c_(in_c), cfg_(cfg) {
    weights_ = SPPRCSPWeights<T>::init(in_c, cfg_, rng);
  }

  const std::string& name() const override { return name_; }
  const SPPRCSPConfig& config() const { return cfg_; }

  int out_channels() const {
    return cfg_.c_out > 0 ? cfg_.c_out : in_c_;
  }

  Tensor<T> forward(Graph<T>& g, const Tensor<T>& x) const override {
    return spprcsp_forward(g, x, weights_, cfg_);
  }

  Shape out_shape(const Shape& in) const override {
    const int maxl = cfg_.sppr.levels.max_level();
    if (in[1] < maxl || in[2] < maxl)
      throw ValueError(name_ + ": pre-SPPR feature map " +
                       std::to_string(in[1]) + "x" + std::to_string(in[2]) +
                       " below minimum pooled level " + std::to_string(maxl));
    const int w = cfg_.sppr.levels.w;
    return {out_channels(), w, w};
  }

  // pre-SPPR section: both compressions plus the main-branch DSEConv that
  // runs at input resolution. post-SPPR: the DSEConv and fusion at w x w.
  std::size_t pre_params(bool plain) const {
    const int half = in_c_ / 2;
    std::size_t p = 2 * static_cast<std::size_t>(half) * in_c_;
    if (cfg_.dse_before) p += unit_params(half, plain);
    return p;
  }
  std::size_t post_params(bool plain) const {
    const int half = in_c_ / 2;
    std::size_t p = static_cast<std::size_t>(out_channels()) * in_c_;
    if (cfg_.dse_after) p += unit_params(half, plain);
    return p;
  }
  std::size_t pre_macs(const Shape& in, bool plain) const {
    const int half = in_c_ / 2;
    const std::size_t hw = static_cast<std::size_t>(in[1]) * in[2];
    std::size_t m = 2 * hw * static_cast<std::size_t>(in_c_) * half;
    if (cfg_.dse_before) m += unit_macs(half, hw, plain);
    return m;
  }
  std::size_t post_macs(bool plain) const {
    const int half = in_c_ / 2;
    const int w = cfg_.sppr.levels.w;
    const std::size_t ww = static_cast<std::size_t>(w) * w;
    std::size_t m = ww * static_cast<std::size_t>(in_c_) * out_channels();
    if (cfg_.dse_after) m += unit_macs(half, ww, plain);
    return m;
  }

  std::size_t params() const override {
    return pre_params(false) + post_params(false);
  }
  std::size_t mult_adds(const Shape& in) const override {
    return pre_macs(in, false) + post_macs(false);
  }
  std::size_t plain_params() const override {
    return pre_params(true) + post_params(true);
  }
  std::size_t plain_mult_adds(const Shape& in) const override {
    return pre_macs(in, true) + post_macs(true);
  }

  std::vector<TraceDetail> details(const Shape& in) const override {
    const int half = in_c_ / 2;
    const std::size_t hw = static_cast<std::size_t>(in[1]) * in[2];
    const int w = cfg_.sppr.levels.w;
    const std::size_t ww = static_cast<std::size_t>(w) * w;
    std::vector<TraceDetail> out;
    const std::size_t cp = static_cast<std::size_t>(half) * in_c_;
    out.push_back({"compress_main", cp, hw * cp});
    if (cfg_.dse_before)
      out.push_back(
          {"dse_pre", unit_params(half, false), unit_macs(half, hw, false)});
    out.push_back({"sppr_main", 0, 0});
    if (cfg_.dse_after)
      out.push_back(
          {"dse_post", unit_params(half, false), unit_macs(half, ww, false)});
    out.push_back({"compress_skip", cp, hw * cp});
    out.push_back({"sppr_skip", 0, 0});
    out.push_back({"fuse", static_cast<std::size_t>(out_channels()) * in_c_,
                   ww * static_cast<std::size_t>(in_c_) * out_channels()});
    return out;
  }

  void collect(
      std::vector<std::pair<std::string, Tensor<T>>>& out) override {
    out.emplace_back(name_ + ".compress_main", weights_.compress_main);
    out.emplace_back(name_ + ".compress_skip", weights_.compress_skip);
    auto dse = [&](const std::string& p, DSEConvWeights<T>& w) {
      out.emplace_back(p + ".dw", w.depthwise);
      out.emplace_back(p + ".pw", w.pointwise);
      if (w.se.enabled) {
        out.emplace_back(p + ".se.w1", w.se.w1);
        out.emplace_back(p + ".se.b1", w.se.b1);
        out.emplace_back(p + ".se.w2", w.se.w2);
        out.emplace_back(p + ".se.b2", w.se.b2);
      }
    };
    if (cfg_.dse_before) dse(name_ + ".dse_pre", weights_.dse_pre);
    if (cfg_.dse_after) dse(name_ + ".dse_post", weights_.dse_post);
    out.emplace_back(name_ + ".fuse", weights_.fuse);
  }

 private:
  // one DSEConv unit (or its plain-conv replacement) at C channels
  std::size_t unit_params(int c, bool plain) const {
    if (plain) return plain_conv_params(c, c, cfg_.dse_kernel);
    std::size_t p = dseconv_conv_params(c, c, cfg_.dse_kernel);
    if (cfg_.se_enabled) p += se_params(c, cfg_.se_ratio);
    return p;
  }
  std::size_t unit_macs(int c, std::size_t hw, bool plain) const {
    const int k = cfg_.dse_kernel;
    if (plain) return hw * static_cast<std::size_t>(c) * c * k * k;
    std::size_t m = hw * (static_cast<std::size_t>(c) * k * k +
                          static_cast<std::size_t>(c) * c);
    if (cfg_.se_enabled) {
      const std::size_t hidden = std::max(1, c / cfg_.se_ratio);
      m += 2 * hidden * static_cast<std::size_t>(c);
    }
    return m;
  }

  std::string name_;
  int in_c_;
  SPPRCSPConfig cfg_;
  SPPRCSPWeights<T> weights_;
};

}  // namespace detail

// ---- backbone --------------------------------------------------------------

template <typename T>
class Backbone {
 public:
  const BackboneConfig& config() const { return cfg_; }
  int cumulative_stride() const { return cfg_.cumulative_stride(); }
  int min_input_extent() const { return cfg_.min_input_extent(); }
  int out_channels() const { return out_channels_; }

  /// Accepted inputs: 3xHxW with H and W multiples of the cumulative stride
  /// and the pre-SPPR map at least the largest pooled level per axis.
  void validate_input(int H, int W) const {
    const int s = cumulative_stride();
    const int minext = min_input_extent();
    if (H < 1 || W < 1 || H % s != 0 || W % s != 0 || H < minext ||
        W < minext)
      throw ValueError(
          "backbone: input " + std::to_string(H) + "x" + std::to_string(W) +
          " invalid; extents must be multiples of the cumulative stride " +
          std::to_string(s) + ", smallest valid square input is " +
          std::to_string(minext) + "x" + std::to_string(minext));
  }

  Tensor<T> forward(Graph<T>& g, const Tensor<T>& x,
                    std::vector<Shape>* shape_log = nullptr) const {
    if (x.shape().size() != 3 || x.shape()[0] != 3)
      throw ShapeError("backbone: input must be 3xHxW, got " +
                       shape_str(x.shape()));
    validate_input(x.shape()[1], x.shape()[2]);
    Tensor<T> y = x;
    for (const auto& layer : layers_) {
      y = layer->forward(g, y);
      if (shape_log) shape_log->push_back(y.shape());
    }
    return y;
  }

  ShapeTrace shape_trace(int H, int W) const {
    validate_input(H, W);
    ShapeTrace trace;
    trace.input = {3, H, W};
    Shape s = trace.input;
    for (const auto& layer : layers_) {
      TraceRow row;
      row.layer = layer->name();
      row.in = s;
      row.out = layer->out_shape(s);
      row.params = layer->params();
      row.mult_adds = layer->mult_adds(s);
      row.details = layer->details(s);
      trace.total_params += row.params;
      trace.total_mult_adds += row.mult_adds;
      s = row.out;
      trace.rows.push_back(std::move(row));
    }
    return trace;
  }

  ParamCountReport count_params_flops(int H, int W,
                                      bool compare_plain) const {
    validate_input(H, W);
    ParamCountReport rep;
    rep.input = {3, H, W};
    rep.compared_plain = compare_plain;
    Shape s = rep.input;
    for (const auto& layer : layers_) {
      auto* sppr = dynamic_cast<const detail::SPPRCSPLayer<T>*>(layer.get());
      if (sppr) {
        rep.layers.push_back({layer->name() + ".pre_sppr",
                              sppr->pre_params(false),
                              sppr->pre_macs(s, false)});
        rep.layers.push_back({layer->name() + ".post_sppr",
                              sppr->post_params(false),
                              sppr->post_macs(false)});
      } else {
        rep.layers.push_back(
            {layer->name(), layer->params(), layer->mult_adds(s)});
      }
      rep.params += layer->params();
      rep.mult_adds += layer->mult_adds(s);
      if (compare_plain) {
        rep.plain_params += layer->plain_params();
        rep.plain_mult_adds += layer->plain_mult_adds(s);
      }
      s = layer->out_shape(s);
    }
    if (compare_plain) {
      rep.param_ratio =
          static_cast<double>(rep.params) / static_cast<double>(rep.plain_params);
      rep.mult_add_ratio = static_cast<double>(rep.mult_adds) /
                           static_cast<double>(rep.plain_mult_adds);
    }
    return rep;
  }

  std::vector<std::pair<std::string, Tensor<T>>> named_params() {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    for (const auto& layer : layers_) layer->collect(out);
    return out;
  }

  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }

 private:
  template <typename U>
  friend Backbone<U> build_scaresnet(const BackboneConfig&, std::uint64_t);

  BackboneConfig cfg_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  int out_channels_ = 0;
};

/// Deterministic seeded construction. Each layer draws from an RNG stream
/// keyed by (seed, layer name), so configs sharing layer names share those
/// layers' weights bit for bit.
template <typename T>
Backbone<T> build_scaresnet(const BackboneConfig& cfg, std::uint64_t seed) {
  if (cfg.stages.empty())
    throw ValueError("backbone: at least one stage is required");
  cfg.spprcsp.validate();
  Backbone<T> net;
  net.cfg_ = cfg;

  auto rng_for = [&](const std::string& name) {
    return std::mt19937_64(mix_seed(seed, name));
  };

  {
    auto rng = rng_for("stem");
    net.layers_.push_back(std::make_unique<detail::StemLayer<T>>(
        "stem", cfg.stem, cfg.gn_groups, rng));
  }

  int channels = cfg.stem.out_channels;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const StageSpec& st = cfg.stages[i];
    if (st.blocks < 1)
      throw ValueError("stage" + std::to_string(i + 1) +
                       ": block count must be >= 1");
    for (int b = 0; b < st.blocks; ++b) {
      const std::string name = "stage" + std::to_string(i + 1) + ".block" +
                               std::to_string(b + 1);
      auto rng = rng_for(name);
      net.layers_.push_back(std::make_unique<detail::ResidualBlockLayer<T>>(
          name, st.type, channels, st.out_channels, b == 0 ? st.stride : 1,
          cfg.gn_groups, rng));
      channels = st.out_channels;
    }
    for (int site : cfg.cca_after)
      if (site == static_cast<int>(i)) {
        const std::string name = "stage" + std::to_string(i + 1) + ".cca";
        auto rng = rng_for(name);
        MHCCAConfig mc = cfg.cca;
        mc.channels = channels;
        net.layers_.push_back(
            std::make_unique<detail::MHCCALayer<T>>(name, mc, rng));
      }
  }

  {
    auto rng = rng_for("spprcsp");
    auto layer = std::make_unique<detail::SPPRCSPLayer<T>>(
        "spprcsp", channels, cfg.spprcsp, rng);
    net.out_channels_ = layer->out_channels();
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

inline const char* block_type_name(BlockType t) {
  return t == BlockType::kBasic ? "basic" : "bottleneck";
}

inline BlockType block_type_from_name(const std::string& name) {
  if (name == "basic") return BlockType::kBasic;
  if (name == "bottleneck") return BlockType::kBottleneck;
  throw ValueError("unknown block type '" + name + "'");
}

inline BackboneConfig BackboneConfig::mini() {
  BackboneConfig cfg;
  cfg.preset = "mini";
  cfg.stem = {3, 2, 8, false};
  cfg.stages = {{1, BlockType::kBasic, 16, 2}, {1, BlockType::kBasic, 16, 2}};
  cfg.cca_after = {0};
  cfg.cca.heads = 4;
  cfg.spprcsp.c_out = 16;
  return cfg;
}

inline BackboneConfig BackboneConfig::scaresnet50() {
  BackboneConfig cfg;
  cfg.preset = "scaresnet-50";
  cfg.stem = {7, 2, 64, true};
  cfg.stages = {{3, BlockType::kBottleneck, 256, 1},
                {4, BlockType::kBottleneck, 512, 2},
                {6, BlockType::kBottleneck, 1024, 2},
                {3, BlockType::kBottleneck, 2048, 2}};
  cfg.cca_after = {2};
  cfg.cca.heads = 4;
  cfg.spprcsp.c_out = 2048;
  return cfg;
}

inline BackboneConfig BackboneConfig::preset_by_name(const std::string& name) {
  if (name == "mini") return mini();
  if (name == "scaresnet-50") return scaresnet50();
  throw ValueError("unknown preset '" + name +
                   "' (expected mini or scaresnet-50)");
}

}  // namespace scaresnet
