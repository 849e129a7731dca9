// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria. `acceptance 6` runs only criterion 6, and so on.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "stdn/augment.hpp"
#include "stdn/batch.hpp"
#include "stdn/container.hpp"
#include "stdn/densenet.hpp"
#include "stdn/experiment.hpp"
#include "stdn/gradcheck_suite.hpp"
#include "stdn/init.hpp"
#include "stdn/stn.hpp"

using namespace stdn;

namespace {

// Tolerances and budgets, pinned.
constexpr double kIdentityTol = 1e-5;
constexpr double kOracleTol = 1e-5;
constexpr std::size_t kOracleInstances = 50;
constexpr std::size_t kDenseConfigs = 100;
constexpr std::size_t kAugmentDraws = 100000;
constexpr std::size_t kSeeds = 5;
constexpr std::size_t kSeedsNeeded = 4;
constexpr double kPlainAccuracy = 0.90;
constexpr double kOverfitLoss = 0.05;
constexpr std::size_t kOverfitSteps = 500;
constexpr double kGradCheckBudgetSeconds = 60.0;
constexpr double kExperimentBudgetSeconds = 1800.0;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = run_grad_check_suite();
  const double elapsed = seconds_since(t0);
  const std::set<std::string> required{"conv2d", "linear", "softmax_cross_entropy", "maxpool2x2",
                                       "bilinear_sample/input", "bilinear_sample/grid", "affine_grid/theta",
                                       "stn_forward/localization"};
  std::set<std::string> seen;
  double worst = 0.0;
  std::string worst_op;
  bool ok = true;
  for (const auto& e : entries) {
    for (const auto& r : required)
      if (e.op.rfind(r, 0) == 0) seen.insert(r);
    if (!e.passed()) ok = false;
    if (e.max_rel_error >= worst) worst = e.max_rel_error, worst_op = e.op;
  }
  ok = ok && seen == required && elapsed < kGradCheckBudgetSeconds;
  return {ok, fmt("%zu checks, worst %.2e (%s), %zu/%zu required ops, %.1fs", entries.size(), worst,
                  worst_op.c_str(), seen.size(), required.size(), elapsed)};
}

Outcome identity_stn() {
  Rng rng(202);
  const auto cfg = LocNetConfig::for_image_size(32);
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    auto params = init_locnet<float>(cfg, 32, 32, rng);
    auto x = oracle::random_tensor<float>({1, 3, 32, 32}, rng, -2, 2);
    auto y = stn_forward(x, cfg, params);
    worst = std::max(worst, oracle::max_abs_diff<float>(y.data(), x.data()));
  }
  return {worst < kIdentityTol, fmt("100 images, max |stn(x) - x| = %.2e", worst)};
}

Outcome oracle_equivalence() {
  Rng rng(303);
  auto dim = [&](std::size_t lo, std::size_t hi) { return lo + rng.next_u64() % (hi - lo + 1); };
  double conv = 0, pool = 0, bil = 0;
  for (std::size_t t = 0; t < kOracleInstances; ++t) {
    const std::size_t n = dim(1, 3), c = dim(1, 4), h = dim(3, 8), w = dim(3, 8), o = dim(1, 4);
    const std::size_t k = dim(1, std::min<std::size_t>(3, std::min(h, w)));
    const std::size_t stride = dim(1, 2), pad = dim(0, k - 1);
    auto x = oracle::random_tensor<double>({n, c, h, w}, rng);
    ConvWeights<double> cw{oracle::random_tensor<double>({o, c, k, k}, rng), oracle::random_tensor<double>({o}, rng)};
    auto y = conv2d(x, cw, stride, pad);
    conv = std::max(conv, oracle::max_abs_diff<double>(
                              y.data(), oracle::conv2d(x.data(), n, c, h, w, cw.kernels.data(), o, k, k,
                                                       cw.biases.data(), stride, pad)));

    const std::size_t ph = 2 * dim(1, 4), pw = 2 * dim(1, 4);
    auto px = oracle::random_tensor<double>({n, c, ph, pw}, rng);
    pool = std::max(pool, oracle::max_abs_diff<double>(maxpool2x2(px).data(),
                                                       oracle::pool2x2(px.data(), n * c, ph, pw, true)));

    const std::size_t oh = dim(1, 8), ow = dim(1, 8);
    auto grid = oracle::random_tensor<double>({n, oh, ow, 2}, rng, -1.3, 1.3);
    auto s = bilinear_sample(x, grid);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < oh * ow; ++i) {
          const double u = grid.data()[(b * oh * ow + i) * 2], v = grid.data()[(b * oh * ow + i) * 2 + 1];
          const double want = oracle::bilinear_at(x.data().subspan((b * c + ch) * h * w, h * w), h, w, u, v);
          bil = std::max(bil, std::abs(s.data()[(b * c + ch) * oh * ow + i] - want));
        }
  }
  const bool ok = conv < kOracleTol && pool < kOracleTol && bil < kOracleTol;
  return {ok, fmt("%zu instances each: conv2d %.1e, maxpool2x2 %.1e, bilinear_sample %.1e", kOracleInstances, conv,
                  pool, bil)};
}

// Checks every layer input against an independently built concatenation.
bool dense_block_ok(std::size_t c0, std::size_t layers, std::size_t k, Rng& rng) {
  DenseBlockParams<double> block;
  for (std::size_t l = 0; l < layers; ++l) {
    block.layers.push_back({oracle::random_tensor<double>({k, c0 + l * k, 3, 3}, rng, -0.3, 0.3),
                            oracle::random_tensor<double>({k}, rng, -0.1, 0.1)});
  }
  auto x = oracle::random_tensor<double>({2, c0, 5, 5}, rng);
  std::vector<Tensor<double>> features{x};
  bool ok = true;
  auto out = dense_block_forward<double>(x, block, [&](std::size_t l, const Tensor<double>& in) {
    auto want = concat_channels(features);
    ok = ok && l == features.size() - 1 && in.dim(1) == c0 + l * k &&
         oracle::max_abs_diff<double>(in.data(), want.data()) == 0.0;
    features.push_back(dense_layer_forward(want, block.layers[l]));
  });
  auto want = concat_channels(features);
  return ok && features.size() == layers + 1 && out.dim(1) == c0 + layers * k &&
         oracle::max_abs_diff<double>(out.data(), want.data()) == 0.0;
}

Outcome dense_connectivity() {
  Rng rng(404);
  std::size_t good = 0;
  for (std::size_t t = 0; t < kDenseConfigs; ++t) {
    const std::size_t c0 = 1 + rng.next_u64() % 8, layers = rng.next_u64() % 7, k = 1 + rng.next_u64() % 8;
    good += dense_block_ok(c0, layers, k, rng);
  }
  const bool figure = dense_block_ok(4, 5, 4, rng);
  return {good == kDenseConfigs && figure,
          fmt("%zu/%zu random blocks, L=5 k=4 block %s", good, kDenseConfigs, figure ? "ok" : "wrong")};
}

Outcome augmentation_ranges() {
  AugmentSpec spec;
  Rng a(505), b(505);
  std::size_t bad = 0, differ = 0;
  for (std::size_t i = 0; i < kAugmentDraws; ++i) {
    const auto d = random_affine_params(spec, a);
    const auto e = random_affine_params(spec, b);
    bad += !(d.rotation_deg >= -180 && d.rotation_deg <= 180 && std::abs(d.tx) <= 0.25 && std::abs(d.ty) <= 0.25 &&
             d.scale >= 0.5 && d.scale <= 1.0);
    differ += !(d.theta == e.theta && d.rotation_deg == e.rotation_deg && d.scale == e.scale);
  }
  return {bad == 0 && differ == 0, fmt("%zu draws, %zu out of range, %zu not reproduced", kAugmentDraws, bad, differ)};
}

Outcome experiment() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t good = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
    ExperimentConfig cfg;
    cfg.train.seed = seed;
    cfg.train.loss_stride = 1;
    cfg.model = model_preset("desk", 32);
    const auto train = synthesize_dataset(2000, 32, derive_seed(seed, 0x7472ULL));
    const auto test = synthesize_dataset(500, 32, derive_seed(seed, 0x7465ULL), Split::test);
    const auto report = run_experiment(cfg, train, test);
    const auto* plain = report.find(Condition::plain_no_stn);
    const bool a = report.verdict.loss_order, b = report.verdict.slope_order;
    const bool c = plain && !plain->failed && plain->test_accuracy >= kPlainAccuracy;
    const bool ok = a && b && c && !report.failed;
    good += ok;
    per_seed += fmt(" [seed %llu: a=%d b=%d c=%d progress=%d]", static_cast<unsigned long long>(seed), a, b, c,
                    report.verdict.progress);
    std::fprintf(stderr, "criterion 6 seed %llu: %s\n%s", static_cast<unsigned long long>(seed), ok ? "ok" : "miss",
                 summary_csv(report).c_str());
  }
  const double elapsed = seconds_since(t0);
  return {good >= kSeedsNeeded && elapsed < kExperimentBudgetSeconds,
          fmt("%zu/%zu seeds (need %zu)%s, %.0fs", good, kSeeds, kSeedsNeeded, per_seed.c_str(), elapsed)};
}

std::string tiny_series_csv(std::uint64_t seed) {
  auto ds = synthesize_dataset(96, 16, 77);
  ModelConfig mc = model_preset("desk", 16);
  mc.use_stn = true;
  auto model = Model::create(mc, seed);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 32;
  tc.loss_stride = 1;
  tc.seed = seed;
  tc.condition = Condition::transformed_stn;
  return loss_series_csv(train_model(model, ds, nullptr, tc).series);
}

Outcome determinism_and_formats() {
  Rng rng(707);
  auto f = oracle::random_tensor<float>({3, 5, 7}, rng, -1e3, 1e3);
  auto d = oracle::random_tensor<double>({11}, rng, -1, 1);
  const std::vector<StoredTensor> entries{StoredTensor::from("f", f), StoredTensor::from("d", d)};
  const auto path = std::filesystem::temp_directory_path() / "stdn_acceptance.stdn";
  write_container(path, entries);
  const auto back = read_container(path);
  const bool container = back.size() == 2 && back[0].shape == f.shape() &&
                         std::get<0>(back[0].values) == std::get<0>(entries[0].values) &&
                         std::get<1>(back[1].values) == std::get<1>(entries[1].values);

  const bool series = tiny_series_csv(5) == tiny_series_csv(5);

  NormStats stats;
  const bool constants = stats.mean == std::array<double, 3>{0.485, 0.456, 0.406} &&
                         stats.std == std::array<double, 3>{0.229, 0.224, 0.225};
  auto px = normalize(Tensor<float>({3, 1, 1}, {0.485f, 0.456f, 0.406f}), stats);
  const bool zero = px.data()[0] == 0.0f && px.data()[1] == 0.0f && px.data()[2] == 0.0f;
  return {container && series && constants && zero,
          fmt("container %s, loss csv %s, stats %s, 0.485 -> %g", container ? "bit-exact" : "differs",
              series ? "identical" : "differs", constants ? "exact" : "wrong", px.data()[0])};
}

double overfit(Condition c) {
  const auto ds = synthesize_dataset(32, 32, 808);
  TrainConfig tc;
  tc.condition = c;
  tc.batch_size = 32;
  tc.seed = 8;
  BatchPlan plan(ds, train_batch_options(tc, 0));
  const Batch batch = plan.make(0);

  ModelConfig mc = model_preset("desk", 32);
  mc.use_stn = condition_uses_stn(c);
  const Model model = Model::create(mc, tc.seed);
  auto opt = make_optimizer(tc.optimizer);
  const auto params = model.parameters();
  double loss = INFINITY;
  for (std::size_t step = 0; step < kOverfitSteps && loss >= kOverfitLoss; ++step) {
    auto l = softmax_cross_entropy(model.forward(batch.images), batch.labels);
    loss = l.item();
    backward(l);
    opt->step(params);
    model.zero_grad();
  }
  return loss;
}

Outcome overfit_one_batch() {
  std::string detail;
  bool ok = true;
  for (Condition c : kAllConditions) {
    const double loss = overfit(c);
    ok = ok && loss < kOverfitLoss;
    detail += fmt("%s%s %.4f", detail.empty() ? "" : ", ", condition_name(c), loss);
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion all[] = {
      {1, "gradient suite", gradient_suite},
      {2, "identity STN", identity_stn},
      {3, "oracle equivalence", oracle_equivalence},
      {4, "dense connectivity", dense_connectivity},
      {5, "augmentation ranges", augmentation_ranges},
      {6, "desk-scale experiment", experiment},
      {7, "determinism and formats", determinism_and_formats},
      {8, "overfit one batch", overfit_one_batch},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
