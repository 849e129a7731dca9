#include <cstdio>
#include <fstream>

#include "stdn/error.hpp"
#include "stdn/experiment.hpp"

namespace stdn {

namespace {

template <typename... Args>
void appendf(std::string& out, const char* fmt, Args... args) {
  char buf[256];
  const int n = std::snprintf(buf, sizeof buf, fmt, args...);
  out.append(buf, static_cast<std::size_t>(n));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string loss_series_csv(std::span<const LossSample> series) {
  std::string out = "batch,loss\n";
  for (const auto& s : series) appendf(out, "%zu,%.6f\n", s.batch, s.loss);
  return out;
}

std::string summary_csv(const ExperimentReport& report) {
  std::string out = "condition,final_mean_loss,final_slope,test_accuracy\n";
  for (const auto& r : report.conditions) {
    appendf(out, "%s,%.6f,%.6e,%.6f\n", condition_name(r.condition), r.final_mean_loss, r.final_slope,
            r.test_accuracy);
  }
  return out;
}

std::string epochs_csv(const ExperimentReport& report) {
  std::string out = "condition,epoch,train_loss,train_accuracy,test_loss,test_accuracy\n";
  for (const auto& r : report.conditions) {
    for (const auto& e : r.history.epochs) {
      appendf(out, "%s,%zu,%.6f,%.6f,%.6f,%.6f\n", condition_name(r.condition), e.epoch, e.train_loss,
              e.train_accuracy, e.test_loss, e.test_accuracy);
    }
  }
  return out;
}

void export_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& r : report.conditions) {
    write_text(dir / (std::string(condition_name(r.condition)) + ".csv"), loss_series_csv(r.history.series));
  }
  write_text(dir / "summary.csv", summary_csv(report));
  write_text(dir / "epochs.csv", epochs_csv(report));
}

}  // namespace stdn
