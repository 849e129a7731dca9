#include "stdn/experiment.hpp"

#include <cmath>

#include "stdn/error.hpp"

namespace stdn {

const ConditionResult* ExperimentReport::find(Condition c) const {
  for (const auto& r : conditions) {
    if (r.condition == c) return &r;
  }
  return nullptr;
}

double final_quarter_slope(std::span<const LossSample> series) {
  const std::size_t n = series.size();
  if (n < 2) return 0.0;
  std::size_t k = (n + 3) / 4;
  if (k < 2) k = 2;
  const auto tail = series.subspan(n - k);
  double mx = 0.0, my = 0.0;
  for (const auto& s : tail) {
    mx += static_cast<double>(s.batch);
    my += s.loss;
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxy = 0.0, sxx = 0.0;
  for (const auto& s : tail) {
    const double dx = static_cast<double>(s.batch) - mx;
    sxy += dx * (s.loss - my);
    sxx += dx * dx;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

Verdict judge(const ExperimentReport& report) {
  Verdict v;
  const auto* plain = report.find(Condition::plain_no_stn);
  const auto* trans = report.find(Condition::transformed_no_stn);
  const auto* stn = report.find(Condition::transformed_stn);
  if (!plain || !trans || !stn || plain->failed || trans->failed || stn->failed) return v;
  v.loss_order = plain->final_mean_loss < trans->final_mean_loss;
  v.slope_order = stn->final_slope <= trans->final_slope;
  v.progress = true;
  for (const auto* r : {plain, trans, stn}) {
    if (!(r->final_mean_loss < kProgressRatio * r->first_mean_loss)) v.progress = false;
  }
  return v;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& train, const Dataset& test,
                                const ConditionCallback& on_epoch) {
  ExperimentReport report;
  for (Condition c : cfg.conditions) {
    ConditionResult r;
    r.condition = c;
    try {
      TrainConfig tc = cfg.train;
      tc.condition = c;
      ModelConfig mc = cfg.model;
      mc.use_stn = condition_uses_stn(c);
      const Model model = Model::create(mc, tc.seed);
      r.history = train_model(model, train, &test, tc, [&](const EpochStats& s) {
        if (on_epoch) on_epoch(c, s);
      });
      r.first_mean_loss = r.history.epochs.front().train_loss;
      r.final_mean_loss = r.history.epochs.back().train_loss;
      r.final_slope = final_quarter_slope(r.history.series);
      r.test_accuracy = r.history.epochs.back().test_accuracy;
    } catch (const Error& e) {
      r.failed = true;
      r.error = e.what();
      report.failed = true;
    }
    report.conditions.push_back(std::move(r));
  }
  report.verdict = judge(report);
  return report;
}

}  // namespace stdn
