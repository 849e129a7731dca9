#include "stdn/optim.hpp"

#include <cmath>

namespace stdn {

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractError("learning rate must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ContractError("adam eps must be positive");
  if (!(stn_lr_scale >= 0.0) || !std::isfinite(stn_lr_scale)) throw ContractError("stn lr scale must be finite and >= 0");
}

const char* optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

namespace {

void size_state(std::vector<std::vector<float>>& state, const ParamList<float>& params) {
  if (state.empty()) {
    for (const auto& p : params) state.emplace_back(p.tensor.numel(), 0.0f);
  }
  if (state.size() != params.size()) throw ContractError("optimizer called with a different parameter list");
}

}  // namespace

void Optimizer::set_lr_scale(std::string prefix, double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ContractError("lr scale must be finite and >= 0");
  for (auto& [p, s] : scales_) {
    if (p == prefix) {
      s = scale;
      return;
    }
  }
  scales_.emplace_back(std::move(prefix), scale);
}

double Optimizer::lr_scale(const std::string& name) const {
  double scale = 1.0;
  std::size_t best = 0;
  for (const auto& [p, s] : scales_) {
    if (name.rfind(p, 0) == 0 && p.size() >= best) {
      best = p.size();
      scale = s;
    }
  }
  return scale;
}

Sgd::Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

void Sgd::step(const ParamList<float>& params) {
  size_state(velocity_, params);
  ++steps_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float> t = params[i].tensor;
    if (t.grad().empty()) continue;
    sgd_step<float>(t.mutable_data(), t.grad(), velocity_[i], lr_ * lr_scale(params[i].name), momentum_);
  }
}

Adam::Adam(AdamHyper hyper) : hyper_(hyper) {}

void Adam::step(const ParamList<float>& params) {
  size_state(m_, params);
  size_state(v_, params);
  ++steps_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float> t = params[i].tensor;
    if (t.grad().empty()) continue;
    AdamHyper h = hyper_;
    h.lr *= lr_scale(params[i].name);
    adam_step<float>(t.mutable_data(), t.grad(), m_[i], v_[i], h, steps_);
  }
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg) {
  cfg.validate();
  std::unique_ptr<Optimizer> opt;
  if (cfg.kind == OptimizerKind::sgd) {
    opt = std::make_unique<Sgd>(cfg.lr, cfg.momentum);
  } else {
    opt = std::make_unique<Adam>(AdamHyper{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps});
  }
  opt->set_lr_scale("stn.", cfg.stn_lr_scale);
  return opt;
}

}  // namespace stdn
