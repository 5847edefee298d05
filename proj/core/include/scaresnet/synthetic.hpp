#pragma once

#include <array>
#include <filesystem>
#include <optional>

#include "scaresnet/tensor.hpp"

namespace scaresnet {

/// One generated sample: a textured 3xHxW image that either contains a
/// single dark line segment (label 1) or background clutter only (label 0).
struct SyntheticSample {
  Tensor<float> image;
  int label = 0;
  int index = 0;
  std::uint64_t seed = 0;
  std::optional<std::array<int, 4>> bbox;  // r0, c0, r1, c1 inclusive
};

struct GenConfig {
  int n = 200;
  int size_min = 96;
  int size_max = 128;
  std::uint64_t seed = 0;
  int stride_multiple = 8;  // drawn extents are multiples of this
};

/// Generates one sample deterministically from (cfg.seed, index).
SyntheticSample make_sample(const GenConfig& cfg, int index);

/// Writes cfg.n samples under dir/samples/NNNN/{meta.json, data.bin} with
/// exactly ceil(n/2) positives. Byte-identical across reruns with the same
/// configuration.
void gen_synthetic(const GenConfig& cfg, const std::filesystem::path& dir);

std::vector<SyntheticSample> load_dataset(const std::filesystem::path& dir);

}  // namespace scaresnet
