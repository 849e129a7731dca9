#pragma once

#include <cmath>
#include <vector>

#include "stdn/ops.hpp"
#include "stdn/rng.hpp"

namespace stdn {

// He-normal: N(0, 2 / fan_in). Biases start at zero.
template <typename T>
ConvWeights<T> kaiming_conv(std::size_t out_ch, std::size_t in_ch, std::size_t kh, std::size_t kw, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_ch * kh * kw));
  std::vector<T> k(out_ch * in_ch * kh * kw);
  for (auto& v : k) v = static_cast<T>(rng.normal(0.0, stddev));
  return {Tensor<T>({out_ch, in_ch, kh, kw}, std::move(k), true), Tensor<T>({out_ch}, true)};
}

// [fan_in, fan_out] weight for linear().
template <typename T>
Tensor<T> kaiming_matrix(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<T> w(fan_in * fan_out);
  for (auto& v : w) v = static_cast<T>(rng.normal(0.0, stddev));
  return Tensor<T>({fan_in, fan_out}, std::move(w), true);
}

}  // namespace stdn
