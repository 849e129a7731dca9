#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "stdn/augment.hpp"
#include "stdn/batch.hpp"
#include "stdn/dataset.hpp"
#include "stdn/model.hpp"
#include "stdn/optim.hpp"

namespace stdn {

struct LossSample {
  std::size_t batch = 0;  // counted from the first batch of the first epoch
  double loss = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
  std::size_t loss_stride = 100;
  std::uint64_t seed = 0;
  Condition condition = Condition::plain_no_stn;
  AugmentSpec augment;  // ranges only; the seed is derived from `seed`
  NormStats stats;
  bool prefetch = true;  // build batches on a producer thread

  void validate() const;
};

// Training batches for one epoch: reshuffled, and freshly warped when the
// condition transforms its inputs.
BatchOptions train_batch_options(const TrainConfig& cfg, std::size_t epoch);
// Evaluation batches: dataset order, one fixed warp per row.
BatchOptions eval_batch_options(const TrainConfig& cfg);

struct EpochResult {
  std::vector<LossSample> samples;
  double mean_loss = 0.0;  // over every batch, weighted by batch size
  double accuracy = 0.0;
  std::size_t batches = 0;
};

/// forward -> loss -> backward -> step -> zero grads for each batch. Throws
/// NumericError naming the batch on a non-finite loss.
EpochResult train_epoch(const Model& model, const Dataset& ds, Optimizer& opt, const TrainConfig& cfg,
                        std::size_t epoch, std::size_t first_batch = 0);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Applies the condition's input policy; never touches parameter values.
EvalResult evaluate(const Model& model, const Dataset& ds, const TrainConfig& cfg);

// Same pipeline for any function from normalized images [N,3,H,W] to logits [N,K].
using Classifier = std::function<Tensor<float>(const Tensor<float>&)>;
EvalResult evaluate_classifier(const Classifier& classify, const Dataset& ds, const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<LossSample> series;
  std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// cfg.epochs of train_epoch, evaluating on `test` (when given) after each.
TrainHistory train_model(const Model& model, const Dataset& train, const Dataset* test, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

}  // namespace stdn
