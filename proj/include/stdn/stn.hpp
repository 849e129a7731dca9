#pragma once

// Spatial transformer: localization CNN -> affine regressor -> grid
// generator -> bilinear sampler, differentiable end to end.
//
// Coordinates are normalized to [-1, 1] with align-corners semantics: pixel 0
// sits at -1, the last pixel at +1 and a single-pixel axis at 0. A grid maps
// each output pixel to the source location it reads from; source locations
// outside the image read zeros.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "stdn/ops.hpp"
#include "stdn/rng.hpp"
#include "stdn/tensor.hpp"

namespace stdn {

/// 2x3 affine matrix [[a1, b1, a3], [b2, a2, b3]] stored row-major.
/// (u, v) = A * (x, y, 1) maps a target coordinate to its source coordinate.
struct AffineParams {
  std::array<double, 6> theta{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AffineParams identity() { return {}; }

  // Source coordinate for target (x, y).
  std::array<double, 2> apply(double x, double y) const {
    return {theta[0] * x + theta[1] * y + theta[2], theta[3] * x + theta[4] * y + theta[5]};
  }

  bool operator==(const AffineParams&) const = default;
};

// Align-corners position of index i on an axis of n samples.
double normalized_coord(std::size_t i, std::size_t n);

template <typename T>
Tensor<T> affine_batch_tensor(std::span<const AffineParams> batch, bool requires_grad = false);

template <typename T>
std::vector<AffineParams> affine_batch_values(const Tensor<T>& theta);

/// theta [N,2,3] -> grid [N,out_h,out_w,2] of (u, v); differentiable in theta.
template <typename T>
Tensor<T> affine_grid(const Tensor<T>& theta, std::size_t out_h, std::size_t out_w);

/// input [N,C,H,W] sampled at grid [N,Ho,Wo,2] -> [N,C,Ho,Wo]. Gradients flow
/// to both the input values and the grid coordinates.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& input, const Tensor<T>& grid);

// affine_grid at the input's own size followed by bilinear_sample.
template <typename T>
Tensor<T> warp_affine(const Tensor<T>& input, const Tensor<T>& theta);

struct LocNetConfig {
  std::vector<std::size_t> channel_plan{32, 32, 64, 64, 128};
  std::size_t hidden = 128;

  // Prefix of the five-stage plan that leaves at least a 3x3 map for images
  // of this size (3 stages at 32, 5 at 96).
  static LocNetConfig for_image_size(std::size_t size);
};

template <typename T>
struct LocNetParams {
  std::vector<ConvWeights<T>> convs;
  Tensor<T> fc1_weight;  // [flat, hidden]
  Tensor<T> fc1_bias;
  Tensor<T> fc2_weight;  // [hidden, 6]
  Tensor<T> fc2_bias;

  ParamList<T> named(const std::string& prefix = "stn.") const;
};

// Size of the flattened feature map entering the regressor, or throws
// DimensionError when the image cannot be halved once per stage.
std::size_t locnet_flat_size(const LocNetConfig& cfg, std::size_t image_h, std::size_t image_w);

/// Fan-in scaled random convolutions and hidden layer. The output layer has
/// zero weights and bias [1,0,0,0,1,0], so the initial transform is identity.
template <typename T>
LocNetParams<T> init_locnet(const LocNetConfig& cfg, std::size_t image_h, std::size_t image_w, Rng& rng);

/// Each stage is conv3x3 (stride 1, pad 1) -> maxpool 2x2 -> ReLU; then
/// flatten -> hidden linear -> ReLU -> linear(6) -> [N,2,3].
template <typename T>
Tensor<T> localization_forward(const Tensor<T>& image, const LocNetConfig& cfg, const LocNetParams<T>& params);

template <typename T>
Tensor<T> stn_forward(const Tensor<T>& image, const LocNetConfig& cfg, const LocNetParams<T>& params);

}  // namespace stdn
