#pragma once

#include <array>
#include <string>
#include <vector>

#include "scaresnet/common.hpp"

namespace scaresnet {

/// Reading of the judgment-value formula. The printed form uses
/// floor(l/h), which vanishes for every h > l; the swapped reading uses
/// floor(h/l). Both produce valid pooling parameters on the supported
/// domain, so both ship behind this flag; literal is the default.
enum class Interpretation { kLiteral, kSwapped };

const char* interpretation_name(Interpretation i);
Interpretation interpretation_from_name(const std::string& name);

/// Pooled-level tuple (x, y, z, w) together with its positive-integer
/// witness (a, b, c, d):
///   x^2 + y^2 + z^2 == w^2
///   {x, y, z} == {2a, 2b, 2c-1} as multisets, w == 2c + 2d - 1
///   a^2 + b^2 == d * (2c + d - 1)
struct LevelQuadruple {
  int x = 0, y = 0, z = 0, w = 0;
  int a = 0, b = 0, c = 0, d = 0;

  void validate() const;                      // throws ValueError on violation
  std::array<int, 3> levels_descending() const;
  int max_level() const;

  /// The production configuration: levels 9, 6, 2 reshaped to 11x11.
  static LevelQuadruple production() { return {6, 2, 9, 11, 3, 1, 5, 1}; }
};

/// All quadruples whose witness components lie in [1, max_abcd], sorted
/// ascending by w then x. Every (a, b) ordering is reported separately.
std::vector<LevelQuadruple> enumerate_level_solutions(int max_abcd);

enum class PoolBranch { kEq4, kEq5 };

const char* pool_branch_name(PoolBranch b);

/// Per-axis pooling parameters for one pyramid level, plus the branch taken
/// and the judgment value that selected it. Invariants (checked on
/// construction): 2*padding <= kernel, and the pooled output size over the
/// producing (h, l) equals l.
struct AxisPoolingParams {
  int kernel = 0;
  int stride = 0;
  int padding = 0;
  PoolBranch branch = PoolBranch::kEq5;
  int judgment = 0;
};

/// Judgment value t selecting the parameter branch.
///   literal: t = floor(l/h) + (h mod l) + 1
///   swapped: t = floor(h/l) + (h mod l) + 1
/// Requires h >= l >= 2.
int judgment_value(int h, int l, Interpretation interp);

/// Kernel/stride/padding pooling an axis of extent h down to l cells.
/// Branch selection: eq4 when t > l, or t == l and h is divisible by (l-1)
/// with an even quotient; eq5 otherwise.
///   eq4: stride = kernel = ceil(h/l), padding = ceil((l*kernel - h) / 2)
///   eq5: stride = floor(h/l), kernel = h - (l-1)*stride, padding = 0
/// The result is validated against pooled_output_size before returning; a
/// failure raises ValueError describing (h, l, branch, kernel, stride,
/// padding) rather than handing back bad parameters.
AxisPoolingParams pooling_params(int h, int l, Interpretation interp);

/// floor((h + 2*padding - kernel) / stride) + 1, the standard pooled
/// output-size identity used as the oracle for pooling_params.
int pooled_output_size(int h, int kernel, int stride, int padding);

}  // namespace scaresnet
