#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "stdn/rng.hpp"
#include "stdn/stn.hpp"
#include "stdn/tensor.hpp"

namespace stdn {

/// Random affine augmentation ranges. Rotation is in degrees, translation is
/// a fraction of the image side per axis, scale is the content zoom factor.
struct AugmentSpec {
  double rot_min = -180.0;
  double rot_max = 180.0;
  double trans_min = -0.25;
  double trans_max = 0.25;
  double scale_min = 0.5;
  double scale_max = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AffineDraw {
  double rotation_deg = 0.0;
  double tx = 0.0;  // fraction of width
  double ty = 0.0;  // fraction of height
  double scale = 1.0;
  AffineParams theta;
};

/// Sampling matrix that shows the content scaled by s, rotated by R and then
/// shifted by (tx, ty). Positive R turns the content counter-clockwise on
/// screen (x right, y down). The matrix stores the inverse map, target to
/// source, as the grid generator expects:
///   theta = [ Rot(R)/s | -Rot(R)/s * d ],  d = (2 tx, 2 ty),
///   Rot(R) = [[cos R, -sin R], [sin R, cos R]].
AffineParams compose_affine(double rotation_deg, double tx, double ty, double scale);

// Draws R, tx, ty, s uniformly (in that order) and composes them.
AffineDraw random_affine_params(const AugmentSpec& spec, Rng& rng);

// Warp with the same grid generator and sampler the STN uses.
Tensor<float> apply_affine(const Tensor<float>& images, std::span<const AffineParams> theta);

struct NormStats {
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};

  void validate() const;
};

// Per-channel (x - mean) / std on [N,3,H,W] or [3,H,W]; no graph.
Tensor<float> normalize(const Tensor<float>& images, const NormStats& stats);
Tensor<float> denormalize(const Tensor<float>& images, const NormStats& stats);

}  // namespace stdn
