#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stdn {

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckEps = 1e-5;

struct GradCheckEntry {
  std::string op;    // e.g. "conv2d/kernels"
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;

  bool passed() const { return max_rel_error < kGradCheckTolerance; }
};

/// Finite-difference checks in double precision for every differentiable op
/// and for the composed STN and classifier, on seeded random inputs chosen
/// away from ReLU, max-pool and pixel-boundary kinks.
std::vector<GradCheckEntry> run_grad_check_suite(std::uint64_t seed = 20240611);

}  // namespace stdn
