#include "stdn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "../kernels/gemm.hpp"
#include "stdn/error.hpp"
#include "stdn/kernels.hpp"

namespace stdn {

namespace {

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                         shape_string(t.shape()));
  }
}

template <typename T>
kernels::PlaneGeometry planes_of(const Tensor<T>& t) {
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

template <typename T>
void require_even_plane(const Tensor<T>& t, const char* op) {
  require_rank(t, 4, op);
  if (t.dim(2) % 2 != 0 || t.dim(3) % 2 != 0) {
    throw DimensionError(std::string(op) + ": spatial dims must be even, got " + shape_string(t.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvWeights<T>& w, std::size_t stride, std::size_t pad) {
  require_rank(input, 4, "conv2d");
  require_rank(w.kernels, 4, "conv2d kernels");
  require_rank(w.biases, 1, "conv2d biases");
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  kernels::ConvGeometry g;
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.in_h = input.dim(2);
  g.in_w = input.dim(3);
  g.out_channels = w.kernels.dim(0);
  g.kernel_h = w.kernels.dim(2);
  g.kernel_w = w.kernels.dim(3);
  g.stride = stride;
  g.pad = pad;
  if (w.kernels.dim(1) != g.in_channels) {
    throw DimensionError("conv2d: input has " + std::to_string(g.in_channels) + " channels but kernels " +
                         shape_string(w.kernels.shape()) + " expect " + std::to_string(w.kernels.dim(1)));
  }
  if (w.biases.dim(0) != g.out_channels) {
    throw DimensionError("conv2d: biases " + shape_string(w.biases.shape()) + " do not match " +
                         std::to_string(g.out_channels) + " output channels");
  }
  if (g.in_h + 2 * pad < g.kernel_h || g.in_w + 2 * pad < g.kernel_w) {
    throw DimensionError("conv2d: padded input " + shape_string(input.shape()) + " smaller than kernel " +
                         shape_string(w.kernels.shape()));
  }
  detail::require_finite(input.data(), "conv2d input");

  const std::size_t oh = g.out_h(), ow = g.out_w();
  std::vector<T> out(g.batch * g.out_channels * oh * ow);
  kernels::conv2d_forward<T>(g, input.data(), w.kernels.data(), w.biases.data(), out);

  return detail::make_result<T>(
      "conv2d", {g.batch, g.out_channels, oh, ow}, std::move(out), {input, w.kernels, w.biases},
      [g](TensorNode<T>& self) {
        auto& in = *self.inputs[0];
        auto& k = *self.inputs[1];
        auto& b = *self.inputs[2];
        if (in.requires_grad) kernels::conv2d_backward_input<T>(g, self.grad, k.data, in.grad);
        if (k.requires_grad || b.requires_grad) {
          std::vector<T> scratch_k, scratch_b;
          std::span<T> dk = k.grad, db = b.grad;
          if (!k.requires_grad) {
            scratch_k.assign(k.data.size(), T(0));
            dk = scratch_k;
          }
          if (!b.requires_grad) {
            scratch_b.assign(b.data.size(), T(0));
            db = scratch_b;
          }
          kernels::conv2d_backward_params<T>(g, in.data, self.grad, dk, db);
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return detail::make_result<T>("relu", input.shape(), std::move(out), {input}, [](TensorNode<T>& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (in.data[i] > T(0)) in.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& input) {
  require_even_plane(input, "maxpool2x2");
  const auto g = planes_of(input);
  std::vector<T> out(g.batch * g.channels * (g.h / 2) * (g.w / 2));
  kernels::maxpool2x2_forward<T>(g, input.data(), out);
  return detail::make_result<T>("maxpool2x2", {g.batch, g.channels, g.h / 2, g.w / 2}, std::move(out),
                                {input}, [g](TensorNode<T>& self) {
                                  auto& in = *self.inputs[0];
                                  kernels::maxpool2x2_backward<T>(g, in.data, self.grad, in.grad);
                                });
}

template <typename T>
Tensor<T> avgpool2x2(const Tensor<T>& input) {
  require_even_plane(input, "avgpool2x2");
  const auto g = planes_of(input);
  std::vector<T> out(g.batch * g.channels * (g.h / 2) * (g.w / 2));
  kernels::avgpool2x2_forward<T>(g, input.data(), out);
  return detail::make_result<T>("avgpool2x2", {g.batch, g.channels, g.h / 2, g.w / 2}, std::move(out),
                                {input}, [g](TensorNode<T>& self) {
                                  kernels::avgpool2x2_backward<T>(g, self.grad, self.inputs[0]->grad);
                                });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  require_rank(input, 4, "global_avg_pool");
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t area = input.dim(2) * input.dim(3);
  auto x = input.data();
  std::vector<T> out(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    T s = 0;
    for (std::size_t i = 0; i < area; ++i) s += x[p * area + i];
    out[p] = s / T(area);
  }
  return detail::make_result<T>("global_avg_pool", {input.dim(0), input.dim(1)}, std::move(out), {input},
                                [planes, area](TensorNode<T>& self) {
                                  auto& g = self.inputs[0]->grad;
                                  for (std::size_t p = 0; p < planes; ++p) {
                                    const T d = self.grad[p] / T(area);
                                    for (std::size_t i = 0; i < area; ++i) g[p * area + i] += d;
                                  }
                                });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input, 2, "linear");
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const std::size_t n = input.dim(0), d = input.dim(1), m = weight.dim(1);
  if (weight.dim(0) != d || bias.dim(0) != m) {
    throw DimensionError("linear: input " + shape_string(input.shape()) + ", weight " +
                         shape_string(weight.shape()) + " and bias " + shape_string(bias.shape()) +
                         " do not agree");
  }
  std::vector<T> out(n * m);
  for (std::size_t i = 0; i < n; ++i) std::copy(bias.data().begin(), bias.data().end(), out.begin() + i * m);
  kernels::detail::gemm_nn(n, m, d, input.data().data(), weight.data().data(), out.data());
  return detail::make_result<T>("linear", {n, m}, std::move(out), {input, weight, bias},
                                [n, d, m](TensorNode<T>& self) {
                                  auto& x = *self.inputs[0];
                                  auto& w = *self.inputs[1];
                                  auto& b = *self.inputs[2];
                                  if (x.requires_grad)
                                    kernels::detail::gemm_nt(n, d, m, self.grad.data(), w.data.data(),
                                                             x.grad.data());
                                  if (w.requires_grad)
                                    kernels::detail::gemm_tn(d, m, n, x.data.data(), self.grad.data(),
                                                             w.grad.data());
                                  if (b.requires_grad) {
                                    for (std::size_t i = 0; i < n; ++i)
                                      for (std::size_t j = 0; j < m; ++j) b.grad[j] += self.grad[i * m + j];
                                  }
                                });
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ContractError("concat_channels: no parts");
  for (const auto& p : parts) require_rank(p, 4, "concat_channels");
  const std::size_t n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w) {
      throw DimensionError("concat_channels: part " + shape_string(p.shape()) + " does not match " +
                           shape_string(parts[0].shape()) + " in N/H/W");
    }
    offsets.push_back(total);
    total += p.dim(1);
  }
  const std::size_t area = h * w;
  std::vector<T> out(n * total * area);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto src = parts[i].data();
    const std::size_t c = parts[i].dim(1);
    for (std::size_t b = 0; b < n; ++b) {
      std::copy_n(src.begin() + b * c * area, c * area, out.begin() + (b * total + offsets[i]) * area);
    }
  }
  std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
  return detail::make_result<T>(
      "concat_channels", {n, total, h, w}, std::move(out), std::move(inputs),
      [n, total, area, offsets](TensorNode<T>& self) {
        for (std::size_t i = 0; i < self.inputs.size(); ++i) {
          auto& in = *self.inputs[i];
          if (!in.requires_grad) continue;
          const std::size_t c = in.shape[1];
          for (std::size_t b = 0; b < n; ++b) {
            const T* src = self.grad.data() + (b * total + offsets[i]) * area;
            T* dst = in.grad.data() + b * c * area;
            for (std::size_t j = 0; j < c * area; ++j) dst[j] += src[j];
          }
        }
      });
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t offset, std::size_t count) {
  require_rank(input, 4, "slice_channels");
  const std::size_t n = input.dim(0), c = input.dim(1), area = input.dim(2) * input.dim(3);
  if (count == 0 || offset + count > c) {
    throw DimensionError("slice_channels: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + count) + ") outside " + std::to_string(c) + " channels");
  }
  auto x = input.data();
  std::vector<T> out(n * count * area);
  for (std::size_t b = 0; b < n; ++b)
    std::copy_n(x.begin() + (b * c + offset) * area, count * area, out.begin() + b * count * area);
  return detail::make_result<T>("slice_channels", {n, count, input.dim(2), input.dim(3)}, std::move(out),
                                {input}, [n, c, area, offset, count](TensorNode<T>& self) {
                                  auto& g = self.inputs[0]->grad;
                                  for (std::size_t b = 0; b < n; ++b)
                                    for (std::size_t j = 0; j < count * area; ++j)
                                      g[(b * c + offset) * area + j] += self.grad[b * count * area + j];
                                });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(input.shape()) + " as " + shape_string(shape));
  }
  std::vector<T> out(input.data().begin(), input.data().end());
  return detail::make_result<T>("reshape", std::move(shape), std::move(out), {input}, [](TensorNode<T>& self) {
    auto& g = self.inputs[0]->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
  T s = 0;
  for (auto v : input.data()) s += v;
  return detail::make_result<T>("sum", {}, {s}, {input}, [](TensorNode<T>& self) {
    auto& g = self.inputs[0]->grad;
    for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> square(const Tensor<T>& input) {
  auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
  return detail::make_result<T>("square", input.shape(), std::move(out), {input}, [](TensorNode<T>& self) {
    auto& in = *self.inputs[0];
    for (std::size_t i = 0; i < in.grad.size(); ++i) in.grad[i] += T(2) * in.data[i] * self.grad[i];
  });
}

template <typename T>
Tensor<T> mul_const(const Tensor<T>& input, std::span<const T> weights) {
  if (weights.size() != input.numel()) {
    throw DimensionError("mul_const: " + std::to_string(weights.size()) + " weights for tensor " +
                         shape_string(input.shape()));
  }
  auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * weights[i];
  std::vector<T> wcopy(weights.begin(), weights.end());
  return detail::make_result<T>("mul_const", input.shape(), std::move(out), {input},
                                [wcopy = std::move(wcopy)](TensorNode<T>& self) {
                                  auto& g = self.inputs[0]->grad;
                                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += wcopy[i] * self.grad[i];
                                });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  auto z = logits.data();
  std::vector<T> probs(n * k);
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                          std::to_string(k) + ")");
    }
    const T* row = z.data() + i * k;
    const T mx = *std::max_element(row, row + k);
    T denom = 0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = std::exp(row[j] - mx);
      denom += probs[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= denom;
    total += mx + std::log(denom) - row[labels[i]];
  }
  std::vector<int> label_copy(labels.begin(), labels.end());
  return detail::make_result<T>(
      "softmax_cross_entropy", {}, {total / T(n)}, {logits},
      [n, k, probs = std::move(probs), label_copy = std::move(label_copy)](TensorNode<T>& self) {
        auto& g = self.inputs[0]->grad;
        const T scale = self.grad[0] / T(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const T onehot = static_cast<int>(j) == label_copy[i] ? T(1) : T(0);
            g[i * k + j] += (probs[i * k + j] - onehot) * scale;
          }
      });
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  require_rank(logits, 2, "argmax_rows");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto z = logits.data();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<int>(std::max_element(z.begin() + i * k, z.begin() + (i + 1) * k) - (z.begin() + i * k));
  }
  return out;
}

#define STDN_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const ConvWeights<T>&, std::size_t, std::size_t); \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                  \
  template Tensor<T> maxpool2x2<T>(const Tensor<T>&);                                            \
  template Tensor<T> avgpool2x2<T>(const Tensor<T>&);                                            \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                       \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> concat_channels<T>(std::span<const Tensor<T>>);                             \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                        \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                   \
  template Tensor<T> square<T>(const Tensor<T>&);                                                \
  template Tensor<T> mul_const<T>(const Tensor<T>&, std::span<const T>);                         \
  template Tensor<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const int>);           \
  template std::vector<int> argmax_rows<T>(const Tensor<T>&);

STDN_INSTANTIATE_OPS(float)
STDN_INSTANTIATE_OPS(double)

}  // namespace stdn
