#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stdn/error.hpp"
#include "stdn/tensor.hpp"

namespace stdn {

// v <- momentum * v + g; w <- w - lr * v
template <typename T>
void sgd_step(std::span<T> w, std::span<const T> g, std::span<T> velocity, double lr, double momentum) {
  if (w.size() != g.size() || w.size() != velocity.size()) throw DimensionError("sgd_step: size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    velocity[i] = static_cast<T>(momentum * velocity[i] + g[i]);
    w[i] = static_cast<T>(w[i] - lr * velocity[i]);
  }
}

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update at step t (t >= 1).
template <typename T>
void adam_step(std::span<T> w, std::span<const T> g, std::span<T> m, std::span<T> v, const AdamHyper& h,
               std::size_t t) {
  if (t < 1) throw ContractError("adam_step: t must be >= 1");
  if (w.size() != g.size() || w.size() != m.size() || w.size() != v.size()) {
    throw DimensionError("adam_step: size mismatch");
  }
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i];
    const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
    const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    w[i] = static_cast<T>(w[i] - h.lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps));
  }
}

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double momentum = 0.9;  // sgd only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Learning-rate multiplier for "stn." parameters. A full-rate localization
  // net tends to swing theta off the image early on, after which the sampler
  // reads only padding and its gradient vanishes.
  double stn_lr_scale = 0.1;

  void validate() const;
};

const char* optimizer_name(OptimizerKind kind);

/// Per-parameter state is indexed by position in the ParamList, which must
/// therefore be the same list (same order) on every call.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Reads each parameter's grad; a parameter without a grad buffer is skipped.
  virtual void step(const ParamList<float>& params) = 0;
  virtual std::size_t steps_taken() const = 0;

  // Parameters whose name starts with `prefix` step at lr * scale; the
  // longest matching prefix wins.
  void set_lr_scale(std::string prefix, double scale);
  double lr_scale(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, double>> scales_;
};

class Sgd final : public Optimizer {
 public:
  Sgd(double lr, double momentum);
  void step(const ParamList<float>& params) override;
  std::size_t steps_taken() const override { return steps_; }

 private:
  double lr_, momentum_;
  std::size_t steps_ = 0;
  std::vector<std::vector<float>> velocity_;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(AdamHyper hyper);
  void step(const ParamList<float>& params) override;
  std::size_t steps_taken() const override { return steps_; }

 private:
  AdamHyper hyper_;
  std::size_t steps_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg);

}  // namespace stdn
