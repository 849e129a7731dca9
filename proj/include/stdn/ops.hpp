#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stdn/tensor.hpp"

namespace stdn {

template <typename T>
struct ConvWeights {
  Tensor<T> kernels;  // [out_ch, in_ch, kH, kW]
  Tensor<T> biases;   // [out_ch]

  std::size_t out_channels() const { return kernels.dim(0); }
  std::size_t in_channels() const { return kernels.dim(1); }
};

/// Cross-correlation over NCHW input with zero padding. Gradients flow to the
/// input, kernels and biases. Throws NumericError on non-finite input.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvWeights<T>& w, std::size_t stride = 1,
                 std::size_t pad = 0);

// max(0, x); the subgradient at 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2x2(const Tensor<T>& input);

template <typename T>
Tensor<T> avgpool2x2(const Tensor<T>& input);

// [N,C,H,W] -> [N,C]
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

// input [N,D] * weight [D,M] + bias [M]
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  return concat_channels(std::span<const Tensor<T>>(parts));
}

// Channels [offset, offset + count) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t offset, std::size_t count);

// Same values under a new shape with equal element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape);

template <typename T>
Tensor<T> sum(const Tensor<T>& input);

// Elementwise x * x.
template <typename T>
Tensor<T> square(const Tensor<T>& input);

// Elementwise product with a constant tensor of the same shape (no grad to `weights`).
template <typename T>
Tensor<T> mul_const(const Tensor<T>& input, std::span<const T> weights);

/// Mean over the batch of -log softmax(logits)[label], max-subtracted.
/// Returns a scalar; throws ContractError for labels outside [0, K).
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

// Row-wise argmax of [N,K] logits.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

}  // namespace stdn
