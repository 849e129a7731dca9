#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <sstream>

#include "stdn/augment.hpp"
#include "stdn/error.hpp"
#include "stdn/experiment.hpp"
#include "stdn/gradcheck_suite.hpp"
#include "stdn/ppm.hpp"

namespace stdn::cli {

namespace {

using K = FlagKind;

std::vector<FlagSpec> model_flags() {
  return {
      {"preset", K::preset, "desk", "architecture preset: desk or standard"},
      {"growth-rate", K::positive, "", "dense block growth rate k (default: from preset)"},
      {"block-layout", K::list, "", "layers per dense block, e.g. 4,4,4 (default: from preset)"},
      {"initial-channels", K::positive, "", "channels of the first conv (default: from preset)"},
      {"loc-plan", K::list, "", "localization conv channels, e.g. 32,32,64 (default: from preset)"},
      {"loc-hidden", K::positive, "", "localization hidden width (default: from preset)"},
  };
}

std::vector<FlagSpec> train_flags(const char* loss_stride) {
  return {
      {"epochs", K::positive, "20", "training epochs"},
      {"batch-size", K::positive, "64", "images per batch"},
      {"optimizer", K::optimizer, "adam", "adam or sgd"},
      {"lr", K::real, "0.001", "learning rate"},
      {"momentum", K::real, "0.9", "sgd momentum"},
      {"stn-lr-scale", K::real, "0.1", "learning-rate multiplier for the localization net"},
      {"loss-stride", K::positive, loss_stride, "record the loss every N batches"},
      {"seed", K::count, "0", "seed for init, shuffling and augmentation"},
      {"prefetch", K::toggle, "1", "build batches on a producer thread (0 or 1)"},
      {"threads", K::count, "0", "OpenMP threads, 0 for the runtime default"},
  };
}

std::vector<FlagSpec> concat(std::vector<FlagSpec> a, const std::vector<FlagSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<CommandSpec> build_table() {
  std::vector<CommandSpec> t;
  t.push_back({"generate-data",
               "synthesize a two-class dataset and write it as a container file",
               {{"n", K::positive, "2000", "number of images"},
                {"image-size", K::positive, "32", "image side in pixels"},
                {"seed", K::count, "0", "generator seed"},
                {"split", K::split, "train", "split tag: train, val or test"},
                {"out", K::path, "", "output container path", true}}});
  t.push_back({"train", "train one condition; writes loss CSVs and checkpoint.stdn into --out",
               concat(concat({{"condition", K::condition, "plain_no_stn",
                               "plain_no_stn, transformed_no_stn or transformed_stn"},
                              {"data", K::path, "", "training dataset container", true},
                              {"test-data", K::path, "", "optional test dataset, evaluated after every epoch"},
                              {"out", K::path, "", "output directory", true}},
                             train_flags("100")),
                      model_flags())});
  t.push_back({"experiment",
               "train all three conditions from one seed and write <condition>.csv, summary.csv, epochs.csv",
               concat(concat({{"data", K::path, "", "training dataset (default: synthesize --n-train images)"},
                              {"test-data", K::path, "", "test dataset (default: synthesize --n-test images)"},
                              {"n-train", K::positive, "2000", "synthetic training images"},
                              {"n-test", K::positive, "500", "synthetic test images"},
                              {"image-size", K::positive, "32", "synthetic image side"},
                              {"out", K::path, "", "output directory", true}},
                             train_flags("1")),
                      model_flags())});
  t.push_back({"eval",
               "accuracy and mean loss of a checkpoint on a dataset",
               {{"checkpoint", K::path, "", "checkpoint written by train", true},
                {"data", K::path, "", "dataset container", true},
                {"condition", K::text, "auto",
                 "input policy; auto picks transformed_stn for STN checkpoints, plain_no_stn otherwise"},
                {"seed", K::count, "0", "seed of the fixed evaluation warps (use the training seed)"},
                {"batch-size", K::positive, "64", "images per batch"},
                {"threads", K::count, "0", "OpenMP threads, 0 for the runtime default"}}});
  t.push_back({"preview-transform",
               "write a PPM grid of randomly warped images",
               {{"data", K::path, "", "dataset container (default: synthesize --count images)"},
                {"count", K::positive, "16", "images to show"},
                {"columns", K::positive, "4", "grid columns"},
                {"image-size", K::positive, "32", "synthetic image side"},
                {"seed", K::count, "0", "augmentation seed"},
                {"epoch", K::count, "0", "epoch whose draws are shown"},
                {"out", K::path, "", "output .ppm path", true}}});
  t.push_back({"grad-check",
               "finite-difference gradient suite; exit 0 iff every op is below 1e-4",
               {{"seed", K::count, "20240611", "seed for the random test inputs"}}});
  return t;
}

CLI::Validator validator_for(FlagKind kind) {
  auto wrap = [](std::function<std::string(const std::string&)> check, std::string desc) {
    return CLI::Validator(
        [check](std::string& v) { return v.empty() ? std::string() : check(v); }, std::move(desc));
  };
  auto unsigned_check = [](bool positive) {
    return [positive](const std::string& v) -> std::string {
      if (v.find_first_not_of("0123456789") != std::string::npos) return "expected a non-negative integer, got " + v;
      try {
        if (positive && std::stoull(v) == 0) return "expected a positive integer, got " + v;
      } catch (const std::exception&) {
        return "integer out of range: " + v;
      }
      return {};
    };
  };
  switch (kind) {
    case K::count: return wrap(unsigned_check(false), "UINT");
    case K::positive: return wrap(unsigned_check(true), "POSITIVE");
    case K::real:
      return wrap(
          [](const std::string& v) -> std::string {
            char* end = nullptr;
            std::strtod(v.c_str(), &end);
            return *end == '\0' ? std::string() : "expected a number, got " + v;
          },
          "REAL");
    case K::list:
      return wrap(
          [](const std::string& v) -> std::string {
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
              if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos || std::stoull(item) == 0) {
                return "expected comma-separated positive integers, got " + v;
              }
            }
            return {};
          },
          "LIST");
    case K::condition: return CLI::IsMember({"plain_no_stn", "transformed_no_stn", "transformed_stn"});
    case K::optimizer: return CLI::IsMember({"adam", "sgd"});
    case K::preset: return CLI::IsMember({"desk", "standard"});
    case K::split: return CLI::IsMember({"train", "val", "test"});
    case K::toggle: return CLI::IsMember({"0", "1"});
    case K::text:
    case K::path: break;
  }
  return CLI::Validator();
}

// ---- flag access --------------------------------------------------------

const std::string& flag(const CliInvocation& inv, const std::string& name) {
  auto it = inv.flags.find(name);
  if (it == inv.flags.end()) throw ContractError("internal: subcommand has no flag --" + name);
  return it->second;
}

std::size_t as_size(const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); }

std::vector<std::size_t> as_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(as_size(item));
  return out;
}

void apply_threads(const CliInvocation& inv) {
  const std::size_t n = as_size(flag(inv, "threads"));
  if (n > 0) omp_set_num_threads(static_cast<int>(n));
}

ModelConfig model_from_flags(const CliInvocation& inv, std::size_t image_size) {
  ModelConfig m = model_preset(flag(inv, "preset"), image_size);
  if (auto& v = flag(inv, "growth-rate"); !v.empty()) m.net.growth_rate = as_size(v);
  if (auto& v = flag(inv, "block-layout"); !v.empty()) m.net.block_layout = as_list(v);
  if (auto& v = flag(inv, "initial-channels"); !v.empty()) m.net.initial_channels = as_size(v);
  if (auto& v = flag(inv, "loc-plan"); !v.empty()) m.loc.channel_plan = as_list(v);
  if (auto& v = flag(inv, "loc-hidden"); !v.empty()) m.loc.hidden = as_size(v);
  return m;
}

TrainConfig train_from_flags(const CliInvocation& inv) {
  TrainConfig t;
  t.epochs = as_size(flag(inv, "epochs"));
  t.batch_size = as_size(flag(inv, "batch-size"));
  t.optimizer.kind = flag(inv, "optimizer") == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
  t.optimizer.lr = std::stod(flag(inv, "lr"));
  t.optimizer.momentum = std::stod(flag(inv, "momentum"));
  t.optimizer.stn_lr_scale = std::stod(flag(inv, "stn-lr-scale"));
  t.loss_stride = as_size(flag(inv, "loss-stride"));
  t.seed = std::stoull(flag(inv, "seed"));
  t.prefetch = flag(inv, "prefetch") == "1";
  t.validate();
  return t;
}

void print_epoch(std::ostream& out, Condition c, const EpochStats& s, bool with_test) {
  char buf[200];
  if (with_test) {
    std::snprintf(buf, sizeof buf, "%-18s epoch %2zu  train loss %.4f acc %.3f  test loss %.4f acc %.3f\n",
                  condition_name(c), s.epoch + 1, s.train_loss, s.train_accuracy, s.test_loss, s.test_accuracy);
  } else {
    std::snprintf(buf, sizeof buf, "%-18s epoch %2zu  train loss %.4f acc %.3f\n", condition_name(c), s.epoch + 1,
                  s.train_loss, s.train_accuracy);
  }
  out << buf << std::flush;
}

// ---- subcommands --------------------------------------------------------

int cmd_generate(const CliInvocation& inv, std::ostream& out) {
  const std::string& s = flag(inv, "split");
  const Split split = s == "test" ? Split::test : s == "val" ? Split::val : Split::train;
  const Dataset ds = synthesize_dataset(as_size(flag(inv, "n")), as_size(flag(inv, "image-size")),
                                        std::stoull(flag(inv, "seed")), split);
  write_dataset(flag(inv, "out"), ds);
  out << "wrote " << ds.size() << " images (" << ds.image_h() << "x" << ds.image_w() << ", " << split_name(split)
      << ") to " << flag(inv, "out") << "\n";
  return kOk;
}

int cmd_train(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  apply_threads(inv);
  TrainConfig tc = train_from_flags(inv);
  tc.condition = parse_condition(flag(inv, "condition"));
  const Dataset train = read_dataset(flag(inv, "data"));
  std::optional<Dataset> test;
  if (!flag(inv, "test-data").empty()) test = read_dataset(flag(inv, "test-data"), Split::test);

  ModelConfig mc = model_from_flags(inv, train.image_h());
  mc.use_stn = condition_uses_stn(tc.condition);
  const Model model = Model::create(mc, tc.seed);

  ExperimentReport report;
  ConditionResult r;
  r.condition = tc.condition;
  r.history = train_model(model, train, test ? &*test : nullptr, tc, [&](const EpochStats& s) {
    print_epoch(out, tc.condition, s, test.has_value());
  });
  r.first_mean_loss = r.history.epochs.front().train_loss;
  r.final_mean_loss = r.history.epochs.back().train_loss;
  r.final_slope = final_quarter_slope(r.history.series);
  r.test_accuracy = test ? r.history.epochs.back().test_accuracy : std::numeric_limits<double>::quiet_NaN();
  report.conditions.push_back(std::move(r));

  const std::filesystem::path dir = flag(inv, "out");
  export_report(report, dir);
  save_checkpoint(dir / "checkpoint.stdn", model);
  (void)err;
  out << "wrote " << (dir / (std::string(condition_name(tc.condition)) + ".csv")).string() << ", summary.csv, "
      << "epochs.csv and checkpoint.stdn\n";
  return kOk;
}

int cmd_experiment(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  apply_threads(inv);
  ExperimentConfig cfg;
  cfg.train = train_from_flags(inv);
  const std::uint64_t seed = cfg.train.seed;
  const std::size_t size = as_size(flag(inv, "image-size"));
  const Dataset train = flag(inv, "data").empty()
                            ? synthesize_dataset(as_size(flag(inv, "n-train")), size, derive_seed(seed, 0x7472ULL))
                            : read_dataset(flag(inv, "data"));
  const Dataset test = flag(inv, "test-data").empty()
                           ? synthesize_dataset(as_size(flag(inv, "n-test")), size, derive_seed(seed, 0x7465ULL),
                                                Split::test)
                           : read_dataset(flag(inv, "test-data"), Split::test);
  if (train.image_h() != test.image_h() || train.image_w() != test.image_w()) {
    throw DimensionError("training and test images differ in size");
  }
  cfg.model = model_from_flags(inv, train.image_h());

  const ExperimentReport report = run_experiment(cfg, train, test, [&](Condition c, const EpochStats& s) {
    print_epoch(out, c, s, true);
  });
  export_report(report, flag(inv, "out"));
  out << summary_csv(report);
  out << "verdict: loss order " << (report.verdict.loss_order ? "holds" : "fails") << ", slope order "
      << (report.verdict.slope_order ? "holds" : "fails") << ", training progress "
      << (report.verdict.progress ? "holds" : "fails") << "\n";
  for (const auto& r : report.conditions) {
    if (r.failed) err << condition_name(r.condition) << " failed: " << r.error << "\n";
  }
  return report.failed ? kNumericError : kOk;
}

int cmd_eval(const CliInvocation& inv, std::ostream& out) {
  apply_threads(inv);
  const Model model = load_checkpoint(flag(inv, "checkpoint"));
  const Dataset ds = read_dataset(flag(inv, "data"), Split::test);
  TrainConfig tc;
  tc.seed = std::stoull(flag(inv, "seed"));
  tc.batch_size = as_size(flag(inv, "batch-size"));
  const std::string& c = flag(inv, "condition");
  tc.condition = c == "auto" ? (model.stn ? Condition::transformed_stn : Condition::plain_no_stn) : parse_condition(c);
  const EvalResult r = evaluate(model, ds, tc);
  char buf[160];
  std::snprintf(buf, sizeof buf, "condition %s  images %zu  accuracy %.6f  mean loss %.6f\n",
                condition_name(tc.condition), ds.size(), r.accuracy, r.mean_loss);
  out << buf;
  return kOk;
}

int cmd_preview(const CliInvocation& inv, std::ostream& out) {
  const std::size_t count = as_size(flag(inv, "count"));
  const std::uint64_t seed = std::stoull(flag(inv, "seed"));
  Dataset ds = flag(inv, "data").empty()
                   ? synthesize_dataset(std::max<std::size_t>(count, 2), as_size(flag(inv, "image-size")), seed)
                   : read_dataset(flag(inv, "data"));
  if (count > ds.size()) throw DimensionError("--count exceeds the dataset size");
  ds = ds.subset(0, count);

  // Draws as batch_iter makes them, applied to the raw [0,1] pixels so the
  // zero padding shows as black borders.
  AugmentSpec spec;
  spec.seed = seed;
  const std::uint64_t epoch = std::stoull(flag(inv, "epoch"));
  std::vector<AffineParams> thetas;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(spec.seed, epoch, i));
    thetas.push_back(random_affine_params(spec, rng).theta);
  }
  write_ppm_grid(flag(inv, "out"), apply_affine(ds.images, thetas), as_size(flag(inv, "columns")));
  out << "wrote " << count << " warped images to " << flag(inv, "out") << "\n";
  return kOk;
}

int cmd_grad_check(const CliInvocation& inv, std::ostream& out) {
  const auto entries = run_grad_check_suite(std::stoull(flag(inv, "seed")));
  bool ok = true;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %12s %8s  %s\n", "op", "max rel err", "coords", "status");
  out << buf;
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, "%-28s %12.3e %8zu  %s\n", e.op.c_str(), e.max_rel_error, e.coordinates,
                  e.passed() ? "ok" : "FAIL");
    out << buf;
    ok = ok && e.passed();
  }
  out << (ok ? "all ops below 1e-4\n" : "some ops exceed 1e-4\n");
  return ok ? kOk : kNumericError;
}

}  // namespace

const std::vector<CommandSpec>& command_table() {
  static const std::vector<CommandSpec> table = build_table();
  return table;
}

CliInvocation parse_args(const std::vector<std::string>& args) {
  CLI::App app{"spatial transformer + dense classifier experiments", "stdn"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::vector<std::string>> extras;
  for (const auto& cmd : command_table()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& store = values[cmd.name];
    for (const auto& f : cmd.flags) {
      store[f.name] = f.default_value;
      CLI::Option* opt = sub->add_option(std::string("--") + f.name, store[f.name], f.help);
      if (f.required) {
        opt->required();
      } else {
        opt->default_str(f.default_value);
      }
      opt->check(validator_for(f.kind));
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const CLI::App* sub : app.get_subcommands()) target = sub;
    throw UsageError(kOk, target->help());
  } catch (const CLI::ParseError& e) {
    std::string text = e.what();
    text += "\nrun with --help for usage";
    throw UsageError(kUsage, text);
  }

  CliInvocation inv;
  const CLI::App* chosen = app.get_subcommands().front();
  inv.subcommand = chosen->get_name();
  inv.flags = values[inv.subcommand];
  inv.positionals = chosen->remaining();
  return inv;
}

int dispatch(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  if (!inv.positionals.empty()) {
    err << "unexpected argument: " << inv.positionals.front() << "\n";
    return kUsage;
  }
  try {
    if (inv.subcommand == "generate-data") return cmd_generate(inv, out);
    if (inv.subcommand == "train") return cmd_train(inv, out, err);
    if (inv.subcommand == "experiment") return cmd_experiment(inv, out, err);
    if (inv.subcommand == "eval") return cmd_eval(inv, out);
    if (inv.subcommand == "preview-transform") return cmd_preview(inv, out);
    if (inv.subcommand == "grad-check") return cmd_grad_check(inv, out);
    err << "unknown subcommand: " << inv.subcommand << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliInvocation inv;
  try {
    inv = parse_args(args);
  } catch (const UsageError& e) {
    (e.code == kOk ? out : err) << e.what() << (e.code == kOk ? "" : "\n");
    return e.code;
  }
  return dispatch(inv, out, err);
}

}  // namespace stdn::cli
