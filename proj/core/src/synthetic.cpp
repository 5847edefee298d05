#include "scaresnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "scaresnet/serialize.hpp"

namespace scaresnet {

namespace {

// Bilinear value-noise background in roughly [0.4, 0.8].
void fill_background(Tensor<float>& img, std::mt19937_64& rng) {
  const int H = img.shape()[1], W = img.shape()[2];
  const int knots = 6;
  std::uniform_real_distribution<double> knot_dist(0.45, 0.75);
  std::vector<double> grid(knots * knots);
  for (auto& v : grid) v = knot_dist(rng);
  std::uniform_real_distribution<double> tint_dist(-0.03, 0.03);
  const double tint[3] = {tint_dist(rng), tint_dist(rng), tint_dist(rng)};
  std::uniform_real_distribution<double> speckle(-0.04, 0.04);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const double gy = static_cast<double>(i) / (H - 1) * (knots - 1);
      const double gx = static_cast<double>(j) / (W - 1) * (knots - 1);
      const int y0 = std::min(static_cast<int>(gy), knots - 2);
      const int x0 = std::min(static_cast<int>(gx), knots - 2);
      const double fy = gy - y0, fx = gx - x0;
      const double v = grid[y0 * knots + x0] * (1 - fy) * (1 - fx) +
                       grid[y0 * knots + x0 + 1] * (1 - fy) * fx +
                       grid[(y0 + 1) * knots + x0] * fy * (1 - fx) +
                       grid[(y0 + 1) * knots + x0 + 1] * fy * fx;
      const double s = speckle(rng);
      for (int c = 0; c < 3; ++c)
        img(c, i, j) = static_cast<float>(v + s + tint[c]);
    }
}

// Light rectangular blobs in both classes so darkness of the line, not the
// mere presence of structure, carries the label.
void add_clutter(Tensor<float>& img, std::mt19937_64& rng) {
  const int H = img.shape()[1], W = img.shape()[2];
  std::uniform_int_distribution<int> count_dist(3, 8);
  std::uniform_int_distribution<int> size_dist(2, 5);
  std::uniform_real_distribution<double> shift_dist(0.05, 0.15);
  const int count = count_dist(rng);
  for (int b = 0; b < count; ++b) {
    const int bh = size_dist(rng), bw = size_dist(rng);
    std::uniform_int_distribution<int> rdist(0, H - bh);
    std::uniform_int_distribution<int> cdist(0, W - bw);
    const int r0 = rdist(rng), c0 = cdist(rng);
    const double shift = shift_dist(rng);
    for (int i = r0; i < r0 + bh; ++i)
      for (int j = c0; j < c0 + bw; ++j)
        for (int c = 0; c < 3; ++c)
          img(c, i, j) = static_cast<float>(img(c, i, j) + shift);
  }
}

std::array<int, 4> add_line(Tensor<float>& img, std::mt19937_64& rng) {
  const int H = img.shape()[1], W = img.shape()[2];
  std::uniform_real_distribution<double> len_dist(8.0, 20.0);
  std::uniform_real_distribution<double> thick_dist(2.0, 3.0);
  std::uniform_real_distribution<double> angle_dist(0.0, 3.14159265358979);
  std::uniform_real_distribution<double> dark_dist(0.05, 0.15);
  const double len = len_dist(rng);
  const double thick = thick_dist(rng);
  const double angle = angle_dist(rng);
  const double dark = dark_dist(rng);
  const double dy = std::sin(angle), dx = std::cos(angle);

  const int margin = static_cast<int>(len + thick) + 2;
  std::uniform_int_distribution<int> rdist(margin, H - 1 - margin);
  std::uniform_int_distribution<int> cdist(margin, W - 1 - margin);
  const double r0 = rdist(rng), c0 = cdist(rng);
  const double r1 = r0 + dy * len, c1 = c0 + dx * len;

  int br0 = H, bc0 = W, br1 = -1, bc1 = -1;
  const int lo_r = static_cast<int>(std::floor(std::min(r0, r1) - thick));
  const int hi_r = static_cast<int>(std::ceil(std::max(r0, r1) + thick));
  const int lo_c = static_cast<int>(std::floor(std::min(c0, c1) - thick));
  const int hi_c = static_cast<int>(std::ceil(std::max(c0, c1) + thick));
  const double seg_len2 = (r1 - r0) * (r1 - r0) + (c1 - c0) * (c1 - c0);
  for (int i = std::max(0, lo_r); i <= std::min(H - 1, hi_r); ++i)
    for (int j = std::max(0, lo_c); j <= std::min(W - 1, hi_c); ++j) {
      double t = ((i - r0) * (r1 - r0) + (j - c0) * (c1 - c0)) / seg_len2;
      t = std::clamp(t, 0.0, 1.0);
      const double pr = r0 + t * (r1 - r0), pc = c0 + t * (c1 - c0);
      const double d = std::hypot(i - pr, j - pc);
      if (d <= thick / 2) {
        for (int c = 0; c < 3; ++c) img(c, i, j) = static_cast<float>(dark);
        br0 = std::min(br0, i);
        bc0 = std::min(bc0, j);
        br1 = std::max(br1, i);
        bc1 = std::max(bc1, j);
      }
    }
  return {br0, bc0, br1, bc1};
}

int pick_extent(const GenConfig& cfg, std::mt19937_64& rng) {
  const int m = cfg.stride_multiple;
  const int lo = (cfg.size_min + m - 1) / m;
  const int hi = cfg.size_max / m;
  if (hi < lo)
    throw ValueError("gen_synthetic: no multiple of " + std::to_string(m) +
                     " inside [" + std::to_string(cfg.size_min) + ", " +
                     std::to_string(cfg.size_max) + "]");
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(rng) * m;
}

}  // namespace

SyntheticSample make_sample(const GenConfig& cfg, int index) {
  if (cfg.n < 2) throw ValueError("gen_synthetic: n must be >= 2");
  std::mt19937_64 rng(
      mix_seed(cfg.seed, "sample" + std::to_string(index)));
  SyntheticSample s;
  s.index = index;
  s.seed = cfg.seed;
  s.label = index % 2 == 0 ? 1 : 0;
  const int H = pick_extent(cfg, rng);
  const int W = pick_extent(cfg, rng);
  s.image = Tensor<float>::zeros({3, H, W});
  fill_background(s.image, rng);
  add_clutter(s.image, rng);
  if (s.label == 1) s.bbox = add_line(s.image, rng);
  for (auto& v : s.image.data()) v = std::clamp(v, 0.0f, 1.0f);
  return s;
}

void gen_synthetic(const GenConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.n < 2) throw ValueError("gen_synthetic: n must be >= 2");
  std::filesystem::create_directories(dir / "samples");
  for (int i = 0; i < cfg.n; ++i) {
    SyntheticSample s = make_sample(cfg, i);
    char name[16];
    std::snprintf(name, sizeof(name), "%04d", i);
    nlohmann::json meta;
    meta["index"] = s.index;
    meta["label"] = s.label;
    meta["seed"] = s.seed;
    if (s.bbox)
      meta["bbox"] = *s.bbox;
    else
      meta["bbox"] = nullptr;
    save_tensor(s.image, dir / "samples" / name, std::move(meta));
  }
  nlohmann::json ds;
  ds["n"] = cfg.n;
  ds["size_min"] = cfg.size_min;
  ds["size_max"] = cfg.size_max;
  ds["seed"] = cfg.seed;
  ds["stride_multiple"] = cfg.stride_multiple;
  std::ofstream f(dir / "dataset.json");
  f << ds.dump(2) << "\n";
}

std::vector<SyntheticSample> load_dataset(const std::filesystem::path& dir) {
  const auto samples_dir = dir / "samples";
  if (!std::filesystem::is_directory(samples_dir))
    throw ValueError("load_dataset: missing " + samples_dir.string());
  std::vector<std::filesystem::path> entries;
  for (const auto& e : std::filesystem::directory_iterator(samples_dir))
    if (e.is_directory()) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  std::vector<SyntheticSample> out;
  for (const auto& p : entries) {
    nlohmann::json meta;
    SyntheticSample s;
    s.image = load_tensor<float>(p, &meta);
    s.index = meta.at("index").get<int>();
    s.label = meta.at("label").get<int>();
    s.seed = meta.at("seed").get<std::uint64_t>();
    if (!meta.at("bbox").is_null())
      s.bbox = meta.at("bbox").get<std::array<int, 4>>();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace scaresnet
