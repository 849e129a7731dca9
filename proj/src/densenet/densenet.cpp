#include "stdn/densenet.hpp"

#include <string>

#include "stdn/error.hpp"
#include "stdn/init.hpp"

namespace stdn {

void DenseNetConfig::validate() const {
  if (growth_rate == 0) throw ContractError("growth rate must be at least 1");
  if (block_layout.empty()) throw ContractError("block layout must list at least one dense block");
  if (initial_channels == 0) throw ContractError("initial channel count must be positive");
  if (num_classes == 0) throw ContractError("number of classes must be positive");
}

std::size_t DenseNetConfig::head_channels() const {
  std::size_t c = initial_channels;
  for (std::size_t b = 0; b < block_layout.size(); ++b) {
    c += block_layout[b] * growth_rate;
    if (b + 1 < block_layout.size()) c /= 2;
  }
  return c;
}

template <typename T>
ParamList<T> DenseNetParams<T>::named() const {
  ParamList<T> out;
  out.push_back({"conv0.kernels", initial.kernels});
  out.push_back({"conv0.biases", initial.biases});
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t l = 0; l < blocks[b].layers.size(); ++l) {
      const std::string base = "block" + std::to_string(b) + ".layer" + std::to_string(l) + ".conv.";
      out.push_back({base + "kernels", blocks[b].layers[l].kernels});
      out.push_back({base + "biases", blocks[b].layers[l].biases});
    }
    if (b < transitions.size()) {
      const std::string base = "transition" + std::to_string(b) + ".conv.";
      out.push_back({base + "kernels", transitions[b].kernels});
      out.push_back({base + "biases", transitions[b].biases});
    }
  }
  out.push_back({"head.weight", head_weight});
  out.push_back({"head.bias", head_bias});
  return out;
}

template <typename T>
DenseNetParams<T> init_densenet(const DenseNetConfig& cfg, Rng& rng) {
  cfg.validate();
  DenseNetParams<T> p;
  p.initial = kaiming_conv<T>(cfg.initial_channels, 3, 3, 3, rng);
  std::size_t c = cfg.initial_channels;
  for (std::size_t b = 0; b < cfg.block_layout.size(); ++b) {
    DenseBlockParams<T> block;
    for (std::size_t l = 0; l < cfg.block_layout[b]; ++l) {
      block.layers.push_back(kaiming_conv<T>(cfg.growth_rate, c + l * cfg.growth_rate, 3, 3, rng));
    }
    p.blocks.push_back(std::move(block));
    c += cfg.block_layout[b] * cfg.growth_rate;
    if (b + 1 < cfg.block_layout.size()) {
      if (c / 2 == 0) throw ContractError("transition would leave zero channels");
      p.transitions.push_back(kaiming_conv<T>(c / 2, c, 1, 1, rng));
      c /= 2;
    }
  }
  p.head_weight = kaiming_matrix<T>(c, cfg.num_classes, rng);
  p.head_bias = Tensor<T>({cfg.num_classes}, true);
  return p;
}

template <typename T>
Tensor<T> dense_layer_forward(const Tensor<T>& x, const ConvWeights<T>& layer) {
  if (x.rank() != 4 || x.dim(1) != layer.in_channels()) {
    throw DimensionError("dense layer expects " + std::to_string(layer.in_channels()) + " input channels, got " +
                         shape_string(x.shape()));
  }
  return conv2d(relu(x), layer, 1, 1);
}

template <typename T>
Tensor<T> dense_block_forward(const Tensor<T>& x, const DenseBlockParams<T>& block,
                              const DenseLayerObserver<T>& observer) {
  std::vector<Tensor<T>> features{x};
  for (std::size_t l = 0; l < block.layers.size(); ++l) {
    Tensor<T> input = features.size() == 1 ? features[0] : concat_channels(features);
    if (observer) observer(l, input);
    features.push_back(dense_layer_forward(input, block.layers[l]));
  }
  return features.size() == 1 ? features[0] : concat_channels(features);
}

template <typename T>
Tensor<T> transition_forward(const Tensor<T>& x, const ConvWeights<T>& conv) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw DimensionError("transition needs NCHW input with even spatial dims, got " + shape_string(x.shape()));
  }
  if (conv.out_channels() != x.dim(1) / 2) {
    throw DimensionError("transition conv emits " + std::to_string(conv.out_channels()) + " channels, expected " +
                         std::to_string(x.dim(1) / 2));
  }
  return avgpool2x2(conv2d(x, conv, 1, 0));
}

template <typename T>
Tensor<T> densenet_forward(const Tensor<T>& x, const DenseNetConfig& cfg, const DenseNetParams<T>& params) {
  if (x.rank() != 4 || x.dim(1) != 3) {
    throw DimensionError("densenet expects [N,3,H,W], got " + shape_string(x.shape()));
  }
  const std::size_t transitions = cfg.block_layout.size() - 1;
  const std::size_t scale = std::size_t{1} << transitions;
  if (x.dim(2) % scale != 0 || x.dim(3) % scale != 0) {
    throw DimensionError("densenet with " + std::to_string(transitions) + " transitions needs sides divisible by " +
                         std::to_string(scale) + ", got " + shape_string(x.shape()));
  }
  Tensor<T> h = conv2d(x, params.initial, 1, 1);
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    h = dense_block_forward(h, params.blocks[b]);
    if (b < params.transitions.size()) h = transition_forward(h, params.transitions[b]);
  }
  return linear(global_avg_pool(h), params.head_weight, params.head_bias);
}

#define STDN_INSTANTIATE_DENSE(T)                                                                            \
  template struct DenseNetParams<T>;                                                                         \
  template DenseNetParams<T> init_densenet<T>(const DenseNetConfig&, Rng&);                                  \
  template Tensor<T> dense_layer_forward<T>(const Tensor<T>&, const ConvWeights<T>&);                        \
  template Tensor<T> dense_block_forward<T>(const Tensor<T>&, const DenseBlockParams<T>&,                    \
                                            const DenseLayerObserver<T>&);                                   \
  template Tensor<T> transition_forward<T>(const Tensor<T>&, const ConvWeights<T>&);                         \
  template Tensor<T> densenet_forward<T>(const Tensor<T>&, const DenseNetConfig&, const DenseNetParams<T>&);

STDN_INSTANTIATE_DENSE(float)
STDN_INSTANTIATE_DENSE(double)

}  // namespace stdn
