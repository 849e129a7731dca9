#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "stdn/densenet.hpp"
#include "stdn/stn.hpp"

namespace stdn {

enum class Condition { plain_no_stn, transformed_no_stn, transformed_stn };

inline constexpr std::array<Condition, 3> kAllConditions{Condition::plain_no_stn, Condition::transformed_no_stn,
                                                         Condition::transformed_stn};

const char* condition_name(Condition c);
// Throws ContractError listing the valid names.
Condition parse_condition(const std::string& name);
inline bool condition_uses_stn(Condition c) { return c == Condition::transformed_stn; }
inline bool condition_transforms_inputs(Condition c) { return c != Condition::plain_no_stn; }

struct ModelConfig {
  DenseNetConfig net;
  bool use_stn = false;
  LocNetConfig loc = LocNetConfig::for_image_size(32);
  std::size_t image_size = 32;

  void validate() const;
};

/// Named architectures. "standard" is the DenseNetConfig default (k=12,
/// [4,4,4], 24 initial channels) with the full localization net. "desk" is a
/// smaller classifier and a thinner localization net sized for single-core
/// experiment runs. Throws ContractError for other names.
ModelConfig model_preset(const std::string& name, std::size_t image_size);

/// Optional spatial transformer in front of the dense classifier.
struct Model {
  ModelConfig config;
  DenseNetParams<float> net;
  std::optional<LocNetParams<float>> stn;

  // DenseNet weights depend only on (net config, seed), so models for
  // different conditions built from one seed share their classifier init.
  static Model create(const ModelConfig& cfg, std::uint64_t seed);

  Tensor<float> forward(const Tensor<float>& images) const;
  // STN parameters first (prefixed "stn."), then the classifier.
  ParamList<float> parameters() const;
  void zero_grad() const;
};

// FNV-1a over every parameter's bytes, in parameters() order.
std::uint64_t parameter_checksum(const Model& model);

/// One container entry per parameter plus f64 "config.*" entries from which
/// load_checkpoint rebuilds the architecture.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace stdn
