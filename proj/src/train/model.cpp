#include "stdn/model.hpp"

#include <bit>
#include <cmath>

#include "stdn/container.hpp"
#include "stdn/error.hpp"

namespace stdn {

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::plain_no_stn: return "plain_no_stn";
    case Condition::transformed_no_stn: return "transformed_no_stn";
    case Condition::transformed_stn: return "transformed_stn";
  }
  return "unknown";
}

Condition parse_condition(const std::string& name) {
  for (Condition c : kAllConditions) {
    if (name == condition_name(c)) return c;
  }
  throw ContractError("unknown condition '" + name +
                      "' (expected one of: plain_no_stn, transformed_no_stn, transformed_stn)");
}

void ModelConfig::validate() const {
  net.validate();
  if (image_size == 0) throw ContractError("image size must be positive");
  if (use_stn) {
    if (loc.channel_plan.empty()) throw ContractError("localization channel plan must not be empty");
    if (loc.hidden == 0) throw ContractError("localization hidden width must be positive");
    locnet_flat_size(loc, image_size, image_size);
  }
  // Every transition halves the map.
  const std::size_t pools = net.block_layout.size() - 1;
  if (image_size % (std::size_t{1} << pools) != 0) {
    throw DimensionError("image size " + std::to_string(image_size) + " cannot be halved " + std::to_string(pools) +
                         " times by the transitions");
  }
}

ModelConfig model_preset(const std::string& name, std::size_t image_size) {
  ModelConfig cfg;
  cfg.image_size = image_size;
  cfg.loc = LocNetConfig::for_image_size(image_size);
  if (name == "standard") return cfg;
  if (name != "desk") throw ContractError("unknown model preset '" + name + "' (expected desk or standard)");
  cfg.net.growth_rate = 6;
  cfg.net.block_layout = {2, 2, 2};
  cfg.net.initial_channels = 12;
  const std::vector<std::size_t> thin{8, 16, 32, 32, 64};
  cfg.loc.channel_plan.assign(thin.begin(), thin.begin() + static_cast<std::ptrdiff_t>(cfg.loc.channel_plan.size()));
  cfg.loc.hidden = 32;
  return cfg;
}

Model Model::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  Rng net_rng(derive_seed(seed, 0x6e6574ULL));
  m.net = init_densenet<float>(cfg.net, net_rng);
  if (cfg.use_stn) {
    Rng loc_rng(derive_seed(seed, 0x6c6f63ULL));
    m.stn = init_locnet<float>(cfg.loc, cfg.image_size, cfg.image_size, loc_rng);
  }
  return m;
}

Tensor<float> Model::forward(const Tensor<float>& images) const {
  if (images.rank() != 4 || images.dim(2) != config.image_size || images.dim(3) != config.image_size) {
    throw DimensionError("model expects [N,3," + std::to_string(config.image_size) + "," +
                         std::to_string(config.image_size) + "] input, got " + shape_string(images.shape()));
  }
  if (stn) return densenet_forward(stn_forward(images, config.loc, *stn), config.net, net);
  return densenet_forward(images, config.net, net);
}

ParamList<float> Model::parameters() const {
  ParamList<float> out;
  if (stn) out = stn->named("stn.");
  for (auto& p : net.named()) out.push_back(std::move(p));
  return out;
}

void Model::zero_grad() const {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

std::uint64_t parameter_checksum(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : model.parameters()) {
    for (float v : p.tensor.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

namespace {

StoredTensor config_entry(const std::string& key, std::vector<double> values) {
  if (values.empty()) values.push_back(0.0);  // the container has no empty tensors
  const std::size_t n = values.size();
  return StoredTensor{"config." + key, {n}, std::move(values)};
}

std::vector<double> as_doubles(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

const StoredTensor& require_entry(const std::vector<StoredTensor>& entries, const std::string& name,
                                  const std::filesystem::path& path) {
  const StoredTensor* e = find_entry(entries, name);
  if (!e) throw FormatError(path.string() + ": checkpoint has no entry '" + name + "'");
  return *e;
}

std::vector<std::size_t> read_sizes(const StoredTensor& e, const std::filesystem::path& path) {
  std::vector<std::size_t> out;
  const auto values = e.to_tensor<double>();
  for (double v : values.data()) {
    if (!(v >= 0.0) || v != std::floor(v)) throw FormatError(path.string() + ": bad value in " + e.name);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::size_t read_size(const StoredTensor& e, const std::filesystem::path& path) {
  auto v = read_sizes(e, path);
  if (v.size() != 1) throw FormatError(path.string() + ": " + e.name + " must hold one value");
  return v[0];
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  const ModelConfig& c = model.config;
  std::vector<StoredTensor> entries;
  entries.push_back(config_entry("growth_rate", {double(c.net.growth_rate)}));
  entries.push_back(config_entry("block_layout", as_doubles(c.net.block_layout)));
  entries.push_back(config_entry("initial_channels", {double(c.net.initial_channels)}));
  entries.push_back(config_entry("num_classes", {double(c.net.num_classes)}));
  entries.push_back(config_entry("image_size", {double(c.image_size)}));
  entries.push_back(config_entry("use_stn", {c.use_stn ? 1.0 : 0.0}));
  if (c.use_stn) {
    entries.push_back(config_entry("loc_channel_plan", as_doubles(c.loc.channel_plan)));
    entries.push_back(config_entry("loc_hidden", {double(c.loc.hidden)}));
  }
  for (const auto& p : model.parameters()) entries.push_back(StoredTensor::from(p.name, p.tensor));
  write_container(path, entries);
}

Model load_checkpoint(const std::filesystem::path& path) {
  const auto entries = read_container(path);
  auto get = [&](const std::string& key) -> const StoredTensor& {
    return require_entry(entries, "config." + key, path);
  };
  ModelConfig cfg;
  cfg.net.growth_rate = read_size(get("growth_rate"), path);
  const auto& layout = get("block_layout");
  cfg.net.block_layout = read_sizes(layout, path);
  cfg.net.initial_channels = read_size(get("initial_channels"), path);
  cfg.net.num_classes = read_size(get("num_classes"), path);
  cfg.image_size = read_size(get("image_size"), path);
  cfg.use_stn = read_size(get("use_stn"), path) != 0;
  if (cfg.use_stn) {
    cfg.loc.channel_plan = read_sizes(get("loc_channel_plan"), path);
    cfg.loc.hidden = read_size(get("loc_hidden"), path);
  }

  Model model;
  try {
    model = Model::create(cfg, 0);
  } catch (const Error& e) {
    throw FormatError(path.string() + ": invalid model config: " + e.what());
  }
  for (auto& p : model.parameters()) {
    const StoredTensor& e = require_entry(entries, p.name, path);
    if (e.shape != p.tensor.shape()) {
      throw FormatError(path.string() + ": " + p.name + " has shape " + shape_string(e.shape) + ", model expects " +
                        shape_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    std::visit([&](const auto& v) { std::copy(v.begin(), v.end(), dst.begin()); }, e.values);
  }
  return model;
}

}  // namespace stdn
