#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stdn/train.hpp"

namespace stdn {

struct ExperimentConfig {
  TrainConfig train;  // condition is set per run
  ModelConfig model;  // use_stn is set per run
  std::vector<Condition> conditions{kAllConditions.begin(), kAllConditions.end()};
};

struct ConditionResult {
  Condition condition = Condition::plain_no_stn;
  TrainHistory history;
  double first_mean_loss = std::numeric_limits<double>::quiet_NaN();
  double final_mean_loss = std::numeric_limits<double>::quiet_NaN();  // mean training loss, last epoch
  double final_slope = std::numeric_limits<double>::quiet_NaN();
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string error;
};

/// (i) plain_no_stn ends with lower loss than transformed_no_stn; (ii) the
/// STN run's final-quarter trend is no steeper upwards than the no-STN
/// transformed run. Both are meaningless if nothing trained, so every
/// condition must also have cut its epoch-mean loss by at least 1%.
struct Verdict {
  bool loss_order = false;
  bool slope_order = false;
  bool progress = false;

  bool holds() const { return loss_order && slope_order && progress; }
};

struct ExperimentReport {
  std::vector<ConditionResult> conditions;
  Verdict verdict;
  bool failed = false;

  const ConditionResult* find(Condition c) const;
};

// Least-squares slope (loss per batch) of the last quarter of the samples,
// at least two of them; 0 when there are fewer than two samples overall.
double final_quarter_slope(std::span<const LossSample> series);

inline constexpr double kProgressRatio = 0.99;

// Verdict over a report; missing or failed conditions make it fail.
Verdict judge(const ExperimentReport& report);

using ConditionCallback = std::function<void(Condition, const EpochStats&)>;

/// Trains every configured condition from the same seed on the same data.
/// A condition that throws is recorded as failed and the rest still run.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test,
                                const ConditionCallback& on_epoch = {});

// `batch,loss` with %.6f values, LF endings.
std::string loss_series_csv(std::span<const LossSample> series);
// `condition,final_mean_loss,final_slope,test_accuracy`
std::string summary_csv(const ExperimentReport& report);
// `condition,epoch,train_loss,train_accuracy,test_loss,test_accuracy`
std::string epochs_csv(const ExperimentReport& report);

// {condition}.csv per condition, summary.csv and epochs.csv in `dir`.
void export_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace stdn
