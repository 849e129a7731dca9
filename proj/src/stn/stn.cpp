#include "stdn/stn.hpp"

#include <string>

#include "stdn/error.hpp"
#include "stdn/init.hpp"
#include "stdn/kernels.hpp"

namespace stdn {

double normalized_coord(std::size_t i, std::size_t n) {
  if (n <= 1) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

template <typename T>
Tensor<T> affine_batch_tensor(std::span<const AffineParams> batch, bool requires_grad) {
  if (batch.empty()) throw DimensionError("affine batch must not be empty");
  std::vector<T> values;
  values.reserve(batch.size() * 6);
  for (const auto& a : batch)
    for (double v : a.theta) values.push_back(static_cast<T>(v));
  return Tensor<T>({batch.size(), 2, 3}, std::move(values), requires_grad);
}

template <typename T>
std::vector<AffineParams> affine_batch_values(const Tensor<T>& theta) {
  if (theta.rank() != 3 || theta.dim(1) != 2 || theta.dim(2) != 3) {
    throw DimensionError("theta must be [N,2,3], got " + shape_string(theta.shape()));
  }
  std::vector<AffineParams> out(theta.dim(0));
  auto d = theta.data();
  for (std::size_t n = 0; n < out.size(); ++n)
    for (std::size_t j = 0; j < 6; ++j) out[n].theta[j] = static_cast<double>(d[n * 6 + j]);
  return out;
}

template <typename T>
Tensor<T> affine_grid(const Tensor<T>& theta, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) {
    throw DimensionError("affine_grid: output size must be positive, got " + std::to_string(out_h) + "x" +
                         std::to_string(out_w));
  }
  if (theta.rank() != 3 || theta.dim(1) != 2 || theta.dim(2) != 3) {
    throw DimensionError("affine_grid: theta must be [N,2,3], got " + shape_string(theta.shape()));
  }
  detail::require_finite(theta.data(), "affine_grid theta");
  const std::size_t n = theta.dim(0);
  std::vector<T> xs(out_w), ys(out_h);
  for (std::size_t j = 0; j < out_w; ++j) xs[j] = static_cast<T>(normalized_coord(j, out_w));
  for (std::size_t i = 0; i < out_h; ++i) ys[i] = static_cast<T>(normalized_coord(i, out_h));

  auto th = theta.data();
  std::vector<T> grid(n * out_h * out_w * 2);
  for (std::size_t b = 0; b < n; ++b) {
    const T* a = th.data() + b * 6;
    T* g = grid.data() + b * out_h * out_w * 2;
    for (std::size_t i = 0; i < out_h; ++i)
      for (std::size_t j = 0; j < out_w; ++j) {
        const std::size_t q = (i * out_w + j) * 2;
        g[q] = a[0] * xs[j] + a[1] * ys[i] + a[2];
        g[q + 1] = a[3] * xs[j] + a[4] * ys[i] + a[5];
      }
  }
  return detail::make_result<T>("affine_grid", {n, out_h, out_w, 2}, std::move(grid), {theta},
                                [n, out_h, out_w, xs, ys](TensorNode<T>& self) {
                                  auto& dtheta = self.inputs[0]->grad;
                                  for (std::size_t b = 0; b < n; ++b) {
                                    const T* g = self.grad.data() + b * out_h * out_w * 2;
                                    T acc[6] = {0, 0, 0, 0, 0, 0};
                                    for (std::size_t i = 0; i < out_h; ++i)
                                      for (std::size_t j = 0; j < out_w; ++j) {
                                        const std::size_t q = (i * out_w + j) * 2;
                                        acc[0] += g[q] * xs[j];
                                        acc[1] += g[q] * ys[i];
                                        acc[2] += g[q];
                                        acc[3] += g[q + 1] * xs[j];
                                        acc[4] += g[q + 1] * ys[i];
                                        acc[5] += g[q + 1];
                                      }
                                    for (int k = 0; k < 6; ++k) dtheta[b * 6 + k] += acc[k];
                                  }
                                });
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& input, const Tensor<T>& grid) {
  if (input.rank() != 4) throw DimensionError("bilinear_sample: input must be NCHW, got " + shape_string(input.shape()));
  if (grid.rank() != 4 || grid.dim(3) != 2) {
    throw DimensionError("bilinear_sample: grid must be [N,H,W,2], got " + shape_string(grid.shape()));
  }
  if (grid.dim(0) != input.dim(0)) {
    throw DimensionError("bilinear_sample: grid batch " + std::to_string(grid.dim(0)) + " != input batch " +
                         std::to_string(input.dim(0)));
  }
  kernels::SampleGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), grid.dim(1), grid.dim(2)};
  std::vector<T> out(g.batch * g.channels * g.out_h * g.out_w);
  kernels::bilinear_forward<T>(g, input.data(), grid.data(), out);
  return detail::make_result<T>("bilinear_sample", {g.batch, g.channels, g.out_h, g.out_w}, std::move(out),
                                {input, grid}, [g](TensorNode<T>& self) {
                                  auto& in = *self.inputs[0];
                                  auto& gr = *self.inputs[1];
                                  kernels::bilinear_backward<T>(g, in.data, gr.data, self.grad,
                                                                in.requires_grad ? std::span<T>(in.grad) : std::span<T>(),
                                                                gr.requires_grad ? std::span<T>(gr.grad) : std::span<T>());
                                });
}

template <typename T>
Tensor<T> warp_affine(const Tensor<T>& input, const Tensor<T>& theta) {
  if (input.rank() != 4) throw DimensionError("warp_affine: input must be NCHW, got " + shape_string(input.shape()));
  return bilinear_sample(input, affine_grid(theta, input.dim(2), input.dim(3)));
}

LocNetConfig LocNetConfig::for_image_size(std::size_t size) {
  const std::vector<std::size_t> full{32, 32, 64, 64, 128};
  std::size_t stages = 1;
  for (std::size_t s = 1; s <= full.size(); ++s) {
    const std::size_t scale = std::size_t{1} << s;
    if (size % scale == 0 && size / scale >= 3) stages = s;
  }
  LocNetConfig cfg;
  cfg.channel_plan.assign(full.begin(), full.begin() + static_cast<long>(stages));
  return cfg;
}

std::size_t locnet_flat_size(const LocNetConfig& cfg, std::size_t image_h, std::size_t image_w) {
  if (cfg.channel_plan.empty()) throw ContractError("localization channel plan must not be empty");
  if (cfg.hidden == 0) throw ContractError("localization hidden width must be positive");
  const std::size_t scale = std::size_t{1} << cfg.channel_plan.size();
  if (image_h % scale != 0 || image_w % scale != 0) {
    throw DimensionError("localization net with " + std::to_string(cfg.channel_plan.size()) +
                         " pooling stages needs image sides divisible by " + std::to_string(scale) + ", got " +
                         std::to_string(image_h) + "x" + std::to_string(image_w));
  }
  return cfg.channel_plan.back() * (image_h / scale) * (image_w / scale);
}

template <typename T>
ParamList<T> LocNetParams<T>::named(const std::string& prefix) const {
  ParamList<T> out;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    out.push_back({prefix + "conv" + std::to_string(i) + ".kernels", convs[i].kernels});
    out.push_back({prefix + "conv" + std::to_string(i) + ".biases", convs[i].biases});
  }
  out.push_back({prefix + "fc1.weight", fc1_weight});
  out.push_back({prefix + "fc1.bias", fc1_bias});
  out.push_back({prefix + "fc2.weight", fc2_weight});
  out.push_back({prefix + "fc2.bias", fc2_bias});
  return out;
}

template <typename T>
LocNetParams<T> init_locnet(const LocNetConfig& cfg, std::size_t image_h, std::size_t image_w, Rng& rng) {
  const std::size_t flat = locnet_flat_size(cfg, image_h, image_w);
  LocNetParams<T> p;
  std::size_t in_ch = 3;
  for (auto out_ch : cfg.channel_plan) {
    p.convs.push_back(kaiming_conv<T>(out_ch, in_ch, 3, 3, rng));
    in_ch = out_ch;
  }
  p.fc1_weight = kaiming_matrix<T>(flat, cfg.hidden, rng);
  p.fc1_bias = Tensor<T>({cfg.hidden}, true);
  p.fc2_weight = Tensor<T>({cfg.hidden, 6}, true);
  p.fc2_bias = Tensor<T>({6}, std::vector<T>{1, 0, 0, 0, 1, 0}, true);
  return p;
}

template <typename T>
Tensor<T> localization_forward(const Tensor<T>& image, const LocNetConfig& cfg, const LocNetParams<T>& params) {
  if (image.rank() != 4 || image.dim(1) != 3) {
    throw DimensionError("localization_forward: expected [N,3,H,W], got " + shape_string(image.shape()));
  }
  const std::size_t flat = locnet_flat_size(cfg, image.dim(2), image.dim(3));
  if (params.convs.size() != cfg.channel_plan.size()) {
    throw ContractError("localization params have " + std::to_string(params.convs.size()) +
                        " conv stages, config has " + std::to_string(cfg.channel_plan.size()));
  }
  Tensor<T> x = image;
  for (const auto& conv : params.convs) x = relu(maxpool2x2(conv2d(x, conv, 1, 1)));
  const std::size_t n = image.dim(0);
  if (x.numel() != n * flat) {
    throw DimensionError("localization feature map " + shape_string(x.shape()) + " does not flatten to " +
                         std::to_string(flat));
  }
  x = reshape(x, {n, flat});
  x = relu(linear(x, params.fc1_weight, params.fc1_bias));
  x = linear(x, params.fc2_weight, params.fc2_bias);
  return reshape(x, {n, 2, 3});
}

template <typename T>
Tensor<T> stn_forward(const Tensor<T>& image, const LocNetConfig& cfg, const LocNetParams<T>& params) {
  return warp_affine(image, localization_forward(image, cfg, params));
}

#define STDN_INSTANTIATE_STN(T)                                                                            \
  template Tensor<T> affine_batch_tensor<T>(std::span<const AffineParams>, bool);                          \
  template std::vector<AffineParams> affine_batch_values<T>(const Tensor<T>&);                             \
  template Tensor<T> affine_grid<T>(const Tensor<T>&, std::size_t, std::size_t);                           \
  template Tensor<T> bilinear_sample<T>(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> warp_affine<T>(const Tensor<T>&, const Tensor<T>&);                                   \
  template struct LocNetParams<T>;                                                                         \
  template LocNetParams<T> init_locnet<T>(const LocNetConfig&, std::size_t, std::size_t, Rng&);            \
  template Tensor<T> localization_forward<T>(const Tensor<T>&, const LocNetConfig&, const LocNetParams<T>&); \
  template Tensor<T> stn_forward<T>(const Tensor<T>&, const LocNetConfig&, const LocNetParams<T>&);

STDN_INSTANTIATE_STN(float)
STDN_INSTANTIATE_STN(double)

}  // namespace stdn
