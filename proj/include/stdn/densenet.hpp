#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "stdn/ops.hpp"
#include "stdn/rng.hpp"

namespace stdn {

struct DenseNetConfig {
  std::size_t growth_rate = 12;
  std::vector<std::size_t> block_layout{4, 4, 4};
  std::size_t initial_channels = 24;
  std::size_t num_classes = 2;

  void validate() const;
  // Channels reaching the classifier head: c <- floor((c + L*k) / 2) between
  // blocks, no compression after the last one.
  std::size_t head_channels() const;
};

template <typename T>
struct DenseBlockParams {
  std::vector<ConvWeights<T>> layers;  // layer l: [k, c_in + l*k, 3, 3]
};

template <typename T>
struct DenseNetParams {
  ConvWeights<T> initial;
  std::vector<DenseBlockParams<T>> blocks;
  std::vector<ConvWeights<T>> transitions;  // one fewer than blocks
  Tensor<T> head_weight;                    // [head_channels, num_classes]
  Tensor<T> head_bias;

  ParamList<T> named() const;
};

template <typename T>
DenseNetParams<T> init_densenet(const DenseNetConfig& cfg, Rng& rng);

// H^l: ReLU then 3x3 conv (stride 1, pad 1) to k channels.
template <typename T>
Tensor<T> dense_layer_forward(const Tensor<T>& x, const ConvWeights<T>& layer);

// Called with (layer index, tensor handed to that layer) during a block.
template <typename T>
using DenseLayerObserver = std::function<void(std::size_t, const Tensor<T>&)>;

/// Layer l consumes concat(x^0..x^{l-1}) and emits k channels; the block
/// returns concat(x^0..x^L). An empty block returns its input.
template <typename T>
Tensor<T> dense_block_forward(const Tensor<T>& x, const DenseBlockParams<T>& block,
                              const DenseLayerObserver<T>& observer = {});

// 1x1 conv halving channels, then 2x2 average pool.
template <typename T>
Tensor<T> transition_forward(const Tensor<T>& x, const ConvWeights<T>& conv);

/// initial 3x3 conv -> blocks with transitions between them -> global average
/// pool -> linear head. Returns [N, num_classes] logits.
template <typename T>
Tensor<T> densenet_forward(const Tensor<T>& x, const DenseNetConfig& cfg, const DenseNetParams<T>& params);

}  // namespace stdn
