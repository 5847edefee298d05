#include "scaresnet/sppr_math.hpp"

#include <algorithm>

namespace scaresnet {

const char* interpretation_name(Interpretation i) {
  return i == Interpretation::kLiteral ? "literal" : "swapped";
}

Interpretation interpretation_from_name(const std::string& name) {
  if (name == "literal") return Interpretation::kLiteral;
  if (name == "swapped") return Interpretation::kSwapped;
  throw ValueError("unknown interpretation '" + name +
                   "' (expected literal or swapped)");
}

const char* pool_branch_name(PoolBranch b) {
  return b == PoolBranch::kEq4 ? "eq4" : "eq5";
}

void LevelQuadruple::validate() const {
  for (int v : {x, y, z, w, a, b, c, d})
    if (v < 1) throw ValueError("level quadruple: all components must be >= 1");
  const long long sq = 1LL * x * x + 1LL * y * y + 1LL * z * z;
  if (sq != 1LL * w * w)
    throw ValueError("level quadruple: x^2+y^2+z^2 != w^2 for (" +
                     std::to_string(x) + "," + std::to_string(y) + "," +
                     std::to_string(z) + "," + std::to_string(w) + ")");
  std::array<int, 3> lhs{x, y, z};
  std::array<int, 3> rhs{2 * a, 2 * b, 2 * c - 1};
  std::sort(lhs.begin(), lhs.end());
  std::sort(rhs.begin(), rhs.end());
  if (lhs != rhs)
    throw ValueError("level quadruple: {x,y,z} does not match {2a,2b,2c-1}");
  if (w != 2 * c + 2 * d - 1)
    throw ValueError("level quadruple: w != 2c+2d-1");
  if (1LL * a * a + 1LL * b * b != 1LL * d * (2 * c + d - 1))
    throw ValueError("level quadruple: a^2+b^2 != d*(2c+d-1)");
}

std::array<int, 3> LevelQuadruple::levels_descending() const {
  std::array<int, 3> ls{x, y, z};
  std::sort(ls.begin(), ls.end(), std::greater<int>());
  return ls;
}

int LevelQuadruple::max_level() const { return std::max({x, y, z}); }

std::vector<LevelQuadruple> enumerate_level_solutions(int max_abcd) {
  if (max_abcd < 1)
    throw ValueError("enumerate_level_solutions: max_abcd must be >= 1");
  std::vector<LevelQuadruple> out;
  for (int a = 1; a <= max_abcd; ++a)
    for (int b = 1; b <= max_abcd; ++b)
      for (int c = 1; c <= max_abcd; ++c)
        for (int d = 1; d <= max_abcd; ++d) {
          if (1LL * a * a + 1LL * b * b != 1LL * d * (2 * c + d - 1)) continue;
          LevelQuadruple q{2 * a, 2 * b, 2 * c - 1, 2 * c + 2 * d - 1,
                           a,     b,     c,         d};
          q.validate();
          out.push_back(q);
        }
  std::sort(out.begin(), out.end(),
            [](const LevelQuadruple& l, const LevelQuadruple& r) {
              if (l.w != r.w) return l.w < r.w;
              if (l.x != r.x) return l.x < r.x;
              if (l.y != r.y) return l.y < r.y;
              return l.z < r.z;
            });
  return out;
}

int judgment_value(int h, int l, Interpretation interp) {
  if (l < 2) throw ValueError("judgment_value: level must be >= 2");
  if (h < l)
    throw ValueError("judgment_value: h (" + std::to_string(h) +
                     ") below minimum feature-map size l (" +
                     std::to_string(l) + ")");
  const int quot = interp == Interpretation::kLiteral ? l / h : h / l;
  return quot + (h % l) + 1;
}

int pooled_output_size(int h, int kernel, int stride, int padding) {
  if (h < 1 || kernel < 1 || stride < 1 || padding < 0)
    throw ValueError("pooled_output_size: h, kernel, stride must be >= 1 and "
                     "padding >= 0");
  if (h + 2 * padding < kernel)
    throw ValueError("pooled_output_size: kernel " + std::to_string(kernel) +
                     " exceeds padded extent " +
                     std::to_string(h + 2 * padding));
  return (h + 2 * padding - kernel) / stride + 1;
}

AxisPoolingParams pooling_params(int h, int l, Interpretation interp) {
  const int t = judgment_value(h, l, interp);

  // Branch condition: (t > l) or (t == l and h/(l-1) is an even integer).
  bool eq4 = t > l;
  if (!eq4 && t == l && h % (l - 1) == 0 && (h / (l - 1)) % 2 == 0) eq4 = true;

  AxisPoolingParams p;
  p.judgment = t;
  if (eq4) {
    p.branch = PoolBranch::kEq4;
    p.stride = (h + l - 1) / l;  // ceil(h/l)
    p.kernel = p.stride;
    const int overshoot = l * p.kernel - h;
    p.padding = overshoot > 0 ? (overshoot + 1) / 2 : 0;  // ceil(./2)
  } else {
    p.branch = PoolBranch::kEq5;
    p.stride = h / l;
    p.kernel = h - (l - 1) * p.stride;
    p.padding = 0;
  }

  // Validate rather than silently returning bad parameters; a failure here
  // means the branch formulas are inconsistent for this (h, l).
  const auto describe = [&] {
    return "(h=" + std::to_string(h) + ", l=" + std::to_string(l) +
           ", branch=" + pool_branch_name(p.branch) +
           ", kernel=" + std::to_string(p.kernel) +
           ", stride=" + std::to_string(p.stride) +
           ", padding=" + std::to_string(p.padding) + ")";
  };
  if (p.kernel < 1 || p.stride < 1 || p.padding < 0)
    throw ValueError("pooling_params: degenerate parameters " + describe());
  if (2 * p.padding > p.kernel)
    throw ValueError("pooling_params: padding exceeds half the kernel " +
                     describe());
  if (pooled_output_size(h, p.kernel, p.stride, p.padding) != l)
    throw ValueError("pooling_params: output size check failed " + describe());
  return p;
}

}  // namespace scaresnet
