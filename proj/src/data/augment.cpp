#include "stdn/augment.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stdn/error.hpp"

namespace stdn {

void AugmentSpec::validate() const {
  if (rot_min > rot_max || trans_min > trans_max || scale_min > scale_max) {
    throw ContractError("augmentation ranges must satisfy min <= max");
  }
  if (scale_min <= 0.0) throw ContractError("augmentation scale minimum must be positive");
}

AffineParams compose_affine(double rotation_deg, double tx, double ty, double scale) {
  if (!(scale > 0.0)) throw ContractError("affine scale must be positive");
  const double r = rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(r) / scale;
  const double s = std::sin(r) / scale;
  const double dx = 2.0 * tx, dy = 2.0 * ty;
  AffineParams a;
  a.theta = {c, -s, -(c * dx - s * dy), s, c, -(s * dx + c * dy)};
  return a;
}

AffineDraw random_affine_params(const AugmentSpec& spec, Rng& rng) {
  AffineDraw d;
  d.rotation_deg = rng.uniform(spec.rot_min, spec.rot_max);
  d.tx = rng.uniform(spec.trans_min, spec.trans_max);
  d.ty = rng.uniform(spec.trans_min, spec.trans_max);
  d.scale = rng.uniform(spec.scale_min, spec.scale_max);
  d.theta = compose_affine(d.rotation_deg, d.tx, d.ty, d.scale);
  return d;
}

Tensor<float> apply_affine(const Tensor<float>& images, std::span<const AffineParams> theta) {
  if (images.rank() != 4) throw DimensionError("apply_affine: expected [N,C,H,W], got " + shape_string(images.shape()));
  if (theta.size() != images.dim(0)) {
    throw DimensionError("apply_affine: " + std::to_string(theta.size()) + " transforms for batch of " +
                         std::to_string(images.dim(0)));
  }
  return warp_affine(images.detach(), affine_batch_tensor<float>(theta)).detach();
}

void NormStats::validate() const {
  for (double s : std) {
    if (!(s > 0.0)) throw ContractError("normalization std entries must be positive");
  }
}

namespace {

Tensor<float> per_channel(const Tensor<float>& images, const NormStats& stats, bool forward) {
  stats.validate();
  std::size_t channel_axis = 0;
  if (images.rank() == 4) {
    channel_axis = 1;
  } else if (images.rank() != 3) {
    throw DimensionError("normalize: expected [N,3,H,W] or [3,H,W], got " + shape_string(images.shape()));
  }
  if (images.dim(channel_axis) != 3) {
    throw DimensionError("normalize: expected 3 channels, got " + shape_string(images.shape()));
  }
  const std::size_t batch = channel_axis == 1 ? images.dim(0) : 1;
  const std::size_t area = images.dim(channel_axis + 1) * images.dim(channel_axis + 2);
  auto src = images.data();
  std::vector<float> out(src.size());
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < 3; ++c) {
      const float mean = static_cast<float>(stats.mean[c]);
      const float sd = static_cast<float>(stats.std[c]);
      const std::size_t off = (n * 3 + c) * area;
      for (std::size_t i = 0; i < area; ++i) {
        out[off + i] = forward ? (src[off + i] - mean) / sd : src[off + i] * sd + mean;
      }
    }
  return Tensor<float>(images.shape(), std::move(out));
}

}  // namespace

Tensor<float> normalize(const Tensor<float>& images, const NormStats& stats) {
  return per_channel(images, stats, true);
}

Tensor<float> denormalize(const Tensor<float>& images, const NormStats& stats) {
  return per_channel(images, stats, false);
}

}  // namespace stdn
