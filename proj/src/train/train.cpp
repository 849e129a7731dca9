#include "stdn/train.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "stdn/error.hpp"
#include "stdn/ops.hpp"
#include "stdn/rng.hpp"

namespace stdn {

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("epochs must be at least 1");
  if (batch_size < 1) throw ContractError("batch size must be at least 1");
  if (loss_stride < 1) throw ContractError("loss stride must be at least 1");
  optimizer.validate();
  augment.validate();
  stats.validate();
}

BatchOptions train_batch_options(const TrainConfig& cfg, std::size_t epoch) {
  BatchOptions o;
  o.batch_size = cfg.batch_size;
  o.shuffle_seed = derive_seed(cfg.seed, 0x73687566ULL);
  o.stats = cfg.stats;
  o.epoch = epoch;
  if (condition_transforms_inputs(cfg.condition)) {
    o.augment = cfg.augment;
    o.augment->seed = derive_seed(cfg.seed, 0x747261696eULL);
  }
  return o;
}

BatchOptions eval_batch_options(const TrainConfig& cfg) {
  BatchOptions o;
  o.batch_size = cfg.batch_size;
  o.stats = cfg.stats;
  if (condition_transforms_inputs(cfg.condition)) {
    o.augment = cfg.augment;
    o.augment->seed = derive_seed(cfg.seed, 0x6576616cULL);
  }
  return o;
}

namespace {

void check_condition(const Model& model, Condition c) {
  if (model.stn.has_value() != condition_uses_stn(c)) {
    throw ContractError(std::string("condition ") + condition_name(c) +
                        (condition_uses_stn(c) ? " needs a model with an STN" : " needs a model without an STN"));
  }
}

std::size_t correct_count(const Tensor<float>& logits, const std::vector<int>& labels) {
  const auto pred = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return hits;
}

// Walks a plan either inline or through a producer thread.
template <typename F>
void for_each_batch(const BatchPlan& plan, bool prefetch, F&& f) {
  if (prefetch) {
    PrefetchStream stream(plan);
    while (auto b = stream.next()) f(*b);
  } else {
    for (std::size_t i = 0; i < plan.batch_count(); ++i) f(plan.make(i));
  }
}

}  // namespace

EpochResult train_epoch(const Model& model, const Dataset& ds, Optimizer& opt, const TrainConfig& cfg,
                        std::size_t epoch, std::size_t first_batch) {
  cfg.validate();
  check_condition(model, cfg.condition);
  const BatchPlan plan(ds, train_batch_options(cfg, epoch));
  ParamList<float> params = model.parameters();

  EpochResult r;
  double loss_total = 0.0;
  std::size_t hits = 0, seen = 0;
  for_each_batch(plan, cfg.prefetch, [&](const Batch& batch) {
    const std::size_t global = first_batch + batch.index;
    Tensor<float> loss;
    Tensor<float> logits;
    try {
      logits = model.forward(batch.images);
      loss = softmax_cross_entropy(logits, batch.labels);
    } catch (const NumericError& e) {
      throw NumericError("batch " + std::to_string(global) + ": " + e.what());
    }
    const double value = loss.item();
    if (!std::isfinite(value)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "non-finite loss %g at batch %zu", value, global);
      throw NumericError(buf);
    }
    backward(loss);
    opt.step(params);
    for (auto& p : params) p.tensor.zero_grad();

    if (global % cfg.loss_stride == 0) r.samples.push_back({global, value});
    loss_total += value * static_cast<double>(batch.labels.size());
    hits += correct_count(logits, batch.labels);
    seen += batch.labels.size();
    ++r.batches;
  });
  r.mean_loss = loss_total / static_cast<double>(seen);
  r.accuracy = static_cast<double>(hits) / static_cast<double>(seen);
  return r;
}

EvalResult evaluate(const Model& model, const Dataset& ds, const TrainConfig& cfg) {
  check_condition(model, cfg.condition);
  return evaluate_classifier([&](const Tensor<float>& x) { return model.forward(x); }, ds, cfg);
}

EvalResult evaluate_classifier(const Classifier& classify, const Dataset& ds, const TrainConfig& cfg) {
  const BatchPlan plan(ds, eval_batch_options(cfg));
  double loss_total = 0.0;
  std::size_t hits = 0, seen = 0;
  for_each_batch(plan, false, [&](const Batch& batch) {
    const Tensor<float> logits = classify(batch.images);
    loss_total += softmax_cross_entropy(logits, batch.labels).item() * static_cast<double>(batch.labels.size());
    hits += correct_count(logits, batch.labels);
    seen += batch.labels.size();
  });
  return {static_cast<double>(hits) / static_cast<double>(seen), loss_total / static_cast<double>(seen)};
}

TrainHistory train_model(const Model& model, const Dataset& train, const Dataset* test, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  cfg.validate();
  auto opt = make_optimizer(cfg.optimizer);
  TrainHistory h;
  std::size_t batches_done = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochResult r = train_epoch(model, train, *opt, cfg, e, batches_done);
    batches_done += r.batches;
    h.series.insert(h.series.end(), r.samples.begin(), r.samples.end());
    EpochStats s{e, r.mean_loss, r.accuracy, 0.0, 0.0};
    if (test) {
      const EvalResult ev = evaluate(model, *test, cfg);
      s.test_loss = ev.mean_loss;
      s.test_accuracy = ev.accuracy;
    }
    h.epochs.push_back(s);
    if (on_epoch) on_epoch(s);
  }
  return h;
}

}  // namespace stdn
