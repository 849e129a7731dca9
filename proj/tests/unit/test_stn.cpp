#include <doctest.h>

#include "oracles.hpp"
#include "stdn/augment.hpp"
#include "stdn/error.hpp"
#include "stdn/grad_check.hpp"
#include "stdn/optim.hpp"
#include "stdn/stn.hpp"

using namespace stdn;

namespace {

Tensor<double> theta_of(std::array<double, 6> t) { return affine_batch_tensor<double>(std::vector{AffineParams{t}}); }

}  // namespace

TEST_CASE("identity grid on 2x2 hits the corners exactly") {
  auto g = affine_grid(theta_of({1, 0, 0, 0, 1, 0}), 2, 2);
  CHECK(g.shape() == Shape{1, 2, 2, 2});
  CHECK(std::vector<double>(g.data().begin(), g.data().end()) == std::vector<double>{-1, -1, 1, -1, -1, 1, 1, 1});
}

TEST_CASE("pure scaling halves coordinates") {
  auto g = affine_grid(theta_of({0.5, 0, 0, 0, 0.5, 0}), 3, 3);
  // last pixel is target (1, 1)
  CHECK(g.data()[8 * 2] == 0.5);
  CHECK(g.data()[8 * 2 + 1] == 0.5);
}

TEST_CASE("translation column shifts u only") {
  auto id = affine_grid(theta_of({1, 0, 0, 0, 1, 0}), 4, 5);
  auto sh = affine_grid(theta_of({1, 0, 0.25, 0, 1, 0}), 4, 5);
  for (std::size_t i = 0; i < id.numel(); i += 2) {
    CHECK(sh.data()[i] == doctest::Approx(id.data()[i] + 0.25).epsilon(1e-15));
    CHECK(sh.data()[i + 1] == id.data()[i + 1]);
  }
}

TEST_CASE("grid edge cases") {
  auto g = affine_grid(theta_of({1, 0, 0, 0, 1, 0}), 1, 3);
  CHECK(g.data()[1] == 0.0);  // single-row axis sits at 0
  CHECK(g.data()[0] == -1.0);
  CHECK_THROWS_AS(affine_grid(theta_of({1, 0, 0, 0, 1, 0}), 0, 3), DimensionError);
  CHECK_THROWS_AS(affine_grid(Tensor<double>({1, 3, 2}), 2, 2), DimensionError);
}

TEST_CASE("affine_grid is linear in theta") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = oracle::random_tensor<double>({2, 2, 3}, rng, -2, 2);
    auto b = oracle::random_tensor<double>({2, 2, 3}, rng, -2, 2);
    const double alpha = rng.uniform(-1, 2);
    std::vector<double> mix(12);
    for (int i = 0; i < 12; ++i) mix[i] = alpha * a.data()[i] + (1 - alpha) * b.data()[i];
    auto gm = affine_grid(Tensor<double>({2, 2, 3}, mix), 5, 4);
    auto ga = affine_grid(a, 5, 4), gb = affine_grid(b, 5, 4);
    for (std::size_t i = 0; i < gm.numel(); ++i) {
      CHECK(std::abs(gm.data()[i] - (alpha * ga.data()[i] + (1 - alpha) * gb.data()[i])) < 1e-12);
    }
  }
}

TEST_CASE("composing affine maps equals applying them in sequence") {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    AffineParams a, b;
    for (auto& v : a.theta) v = rng.uniform(-2, 2);
    for (auto& v : b.theta) v = rng.uniform(-2, 2);
    // A * B in the homogeneous 3x3 extension
    const auto& p = a.theta;
    const auto& q = b.theta;
    AffineParams ab{{p[0] * q[0] + p[1] * q[3], p[0] * q[1] + p[1] * q[4], p[0] * q[2] + p[1] * q[5] + p[2],
                     p[3] * q[0] + p[4] * q[3], p[3] * q[1] + p[4] * q[4], p[3] * q[2] + p[4] * q[5] + p[5]}};
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    const auto inner = b.apply(x, y);
    const auto seq = a.apply(inner[0], inner[1]);
    const auto once = ab.apply(x, y);
    CHECK(std::abs(seq[0] - once[0]) < 1e-12);
    CHECK(std::abs(seq[1] - once[1]) < 1e-12);
  }
}

TEST_CASE("bilinear sampler examples") {
  Tensor<double> img({1, 1, 2, 2}, {0, 1, 2, 3});
  Tensor<double> centre({1, 1, 1, 2}, {0.0, 0.0});
  CHECK(bilinear_sample(img, centre).item() == 1.5);
  Tensor<double> far({1, 1, 1, 2}, {-3.0, -3.0});
  CHECK(bilinear_sample(img, far).item() == 0.0);
  CHECK_THROWS_AS(bilinear_sample(img, Tensor<double>({2, 1, 1, 2})), DimensionError);
}

TEST_CASE("identity warp reproduces the input") {
  Rng rng(33);
  auto x = oracle::random_tensor<float>({3, 3, 7, 9}, rng, 0, 1);
  std::vector<AffineParams> id(3);
  auto y = warp_affine(x, affine_batch_tensor<float>(id));
  CHECK(oracle::max_abs_diff<float>(x.data(), y.data()) < 1e-5);
  auto xd = oracle::random_tensor<double>({2, 2, 5, 6}, rng, 0, 1);
  std::vector<AffineParams> id2(2);
  CHECK(oracle::max_abs_diff<double>(xd.data(), warp_affine(xd, affine_batch_tensor<double>(id2)).data()) < 1e-14);
}

TEST_CASE("bilinear sampler matches the brute-force interpolation") {
  Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 2, c = 1 + rng.next_u64() % 3;
    const std::size_t h = 1 + rng.next_u64() % 8, w = 1 + rng.next_u64() % 8;
    const std::size_t oh = 1 + rng.next_u64() % 8, ow = 1 + rng.next_u64() % 8;
    auto x = oracle::random_tensor<double>({n, c, h, w}, rng);
    auto grid = oracle::random_tensor<double>({n, oh, ow, 2}, rng, -1.5, 1.5);
    auto y = bilinear_sample(x, grid);
    Tensor<float> xf({n, c, h, w}, std::vector<float>(x.data().begin(), x.data().end()));
    Tensor<float> gf({n, oh, ow, 2}, std::vector<float>(grid.data().begin(), grid.data().end()));
    auto yf = bilinear_sample(xf, gf);
    double worst = 0.0, worst_f = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) {
            const double u = grid.data()[((b * oh + i) * ow + j) * 2], v = grid.data()[((b * oh + i) * ow + j) * 2 + 1];
            const double want = oracle::bilinear_at(x.data().subspan((b * c + ch) * h * w, h * w), h, w, u, v);
            const std::size_t at = ((b * c + ch) * oh + i) * ow + j;
            worst = std::max(worst, std::abs(y.data()[at] - want));
            worst_f = std::max(worst_f, std::abs(double(yf.data()[at]) - want));
          }
    CHECK(worst < 1e-12);
    CHECK(worst_f < 1e-5);
  }
}

TEST_CASE("half-scale theta shows the central half upsampled 2x") {
  Rng rng(35);
  auto x = oracle::random_tensor<float>({1, 3, 8, 8}, rng, 0, 1);
  auto y = warp_affine(x, affine_batch_tensor<float>(std::vector{AffineParams{{0.5, 0, 0, 0, 0.5, 0}}}));
  std::vector<double> xd(x.data().begin(), x.data().end());
  double worst = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) {
        // target pixel j sits at normalized xj; its source is xj / 2
        const double u = 0.5 * normalized_coord(j, 8), v = 0.5 * normalized_coord(i, 8);
        const double want = oracle::bilinear_at(std::span<const double>(xd).subspan(c * 64, 64), 8, 8, u, v);
        worst = std::max(worst, std::abs(y.data()[(c * 8 + i) * 8 + j] - want));
      }
  CHECK(worst < 1e-5);
}

TEST_CASE("sampler grid gradient matches finite differences off the pixel lattice") {
  Rng rng(36);
  auto x = oracle::random_tensor<double>({2, 2, 6, 6}, rng);
  std::vector<double> g(2 * 5 * 5 * 2);
  for (auto& v : g) {
    const double px = std::floor(rng.uniform(-1, 6)) + rng.uniform(0.1, 0.9);
    v = 2 * px / 5 - 1;
  }
  Tensor<double> grid({2, 5, 5, 2}, g, true);
  auto y = oracle::random_tensor<double>({2, 2, 5, 5}, rng);
  auto r = grad_check([&](const Tensor<double>& t) { return sum(mul_const(bilinear_sample(x, t), y.data())); }, grid);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("localization config per image size") {
  CHECK(LocNetConfig::for_image_size(32).channel_plan == std::vector<std::size_t>{32, 32, 64});
  CHECK(LocNetConfig::for_image_size(96).channel_plan == std::vector<std::size_t>{32, 32, 64, 64, 128});
  CHECK(LocNetConfig{}.channel_plan == std::vector<std::size_t>{32, 32, 64, 64, 128});
  CHECK(LocNetConfig{}.hidden == 128);
  CHECK(locnet_flat_size(LocNetConfig::for_image_size(32), 32, 32) == 64 * 4 * 4);
  CHECK_THROWS_AS(locnet_flat_size(LocNetConfig::for_image_size(32), 36, 36), DimensionError);
  CHECK_THROWS_AS(locnet_flat_size(LocNetConfig{}, 16, 16), DimensionError);
}

TEST_CASE("fresh localization net outputs exactly the identity") {
  Rng rng(37);
  const LocNetConfig cfg = LocNetConfig::for_image_size(32);
  const auto params = init_locnet<float>(cfg, 32, 32, rng);
  CHECK(std::vector<float>(params.fc2_bias.data().begin(), params.fc2_bias.data().end()) ==
        std::vector<float>{1, 0, 0, 0, 1, 0});
  auto x = oracle::random_tensor<float>({4, 3, 32, 32}, rng, -2, 2);
  auto theta = localization_forward(x, cfg, params);
  CHECK(theta.shape() == Shape{4, 2, 3});
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t j = 0; j < 6; ++j) CHECK(theta.data()[n * 6 + j] == (j == 0 || j == 4 ? 1.0f : 0.0f));
  auto y = stn_forward(x, cfg, params);
  CHECK(oracle::max_abs_diff<float>(x.data(), y.data()) < 1e-5);
}

TEST_CASE("one gradient step moves theta away from identity") {
  Rng rng(38);
  LocNetConfig cfg;
  cfg.channel_plan = {4, 4};
  cfg.hidden = 8;
  auto params = init_locnet<float>(cfg, 8, 8, rng);
  auto x = oracle::random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  auto target = oracle::random_tensor<float>({2, 3, 8, 8}, rng, 0, 1);
  backward(sum(mul_const(stn_forward(x, cfg, params), target.data())));
  double norm = 0.0;
  for (float g : params.fc2_weight.grad()) norm += g * g;
  CHECK(norm > 0.0);
  Sgd opt(0.1, 0.0);
  opt.step(params.named());
  auto theta = localization_forward(x, cfg, params);
  bool moved = false;
  for (std::size_t j = 0; j < theta.numel(); ++j) moved = moved || theta.data()[j] != (j % 6 == 0 || j % 6 == 4 ? 1.f : 0.f);
  CHECK(moved);
}

TEST_CASE("stn_forward gradient w.r.t. localization weights on 8x8 input") {
  LocNetConfig cfg;
  cfg.channel_plan = {3, 4, 4};
  cfg.hidden = 6;
  Rng rng(41);  // seed 40 puts a ReLU input within eps of its kink
  auto p = init_locnet<double>(cfg, 8, 8, rng);
  p.fc2_weight = oracle::random_tensor<double>({6, 6}, rng, -0.05, 0.05, true);
  const auto base = compose_affine(-23.0, 0.03, 0.05, 0.9);
  p.fc2_bias = Tensor<double>({6}, std::vector<double>(base.theta.begin(), base.theta.end()), true);
  auto x = oracle::random_tensor<double>({1, 3, 8, 8}, rng, 0, 1);
  for (auto* leaf : {&p.convs[0].kernels, &p.fc1_weight, &p.fc2_weight}) {
    auto r = grad_check(
        [&](const Tensor<double>& t) {
          auto q = p;
          if (leaf == &p.convs[0].kernels) q.convs[0].kernels = t;
          if (leaf == &p.fc1_weight) q.fc1_weight = t;
          if (leaf == &p.fc2_weight) q.fc2_weight = t;
          return sum(stn_forward(x, cfg, q));
        },
        *leaf);
    CHECK(r.max_rel_error < 1e-4);
  }
}
