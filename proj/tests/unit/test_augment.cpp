#include <doctest.h>

#include "oracles.hpp"
#include "stdn/augment.hpp"
#include "stdn/error.hpp"

using namespace stdn;

TEST_CASE("collapsed spec gives the identity") {
  AugmentSpec spec{0, 0, 0, 0, 1, 1, 5};
  Rng rng(1);
  CHECK(random_affine_params(spec, rng).theta == AffineParams::identity());
  CHECK(compose_affine(0, 0, 0, 1) == AffineParams::identity());
}

TEST_CASE("ninety degrees") {
  AugmentSpec spec{90, 90, 0, 0, 1, 1, 5};
  Rng rng(1);
  const auto d = random_affine_params(spec, rng);
  CHECK(d.rotation_deg == 90.0);
  const std::array<double, 6> want{0, -1, 0, 1, 0, 0};
  for (int i = 0; i < 6; ++i) CHECK(std::abs(d.theta.theta[i] - want[i]) < 1e-15);
}

TEST_CASE("draws stay in range and centre on the midpoints") {
  AugmentSpec spec;
  Rng rng(2);
  double r = 0, t = 0, s = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto d = random_affine_params(spec, rng);
    REQUIRE(d.rotation_deg >= -180);
    REQUIRE(d.rotation_deg <= 180);
    REQUIRE(std::abs(d.tx) <= 0.25);
    REQUIRE(std::abs(d.ty) <= 0.25);
    REQUIRE(d.scale >= 0.5);
    REQUIRE(d.scale <= 1.0);
    r += d.rotation_deg;
    t += d.tx + d.ty;
    s += d.scale;
  }
  // standard errors: 1.04 deg, 0.0014, 0.0014
  CHECK(std::abs(r / n) < 5.0);
  CHECK(std::abs(t / (2 * n)) < 0.007);
  CHECK(std::abs(s / n - 0.75) < 0.007);
}

TEST_CASE("same seed, same draws") {
  AugmentSpec spec;
  Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_affine_params(spec, a), y = random_affine_params(spec, b);
    CHECK(x.theta == y.theta);
  }
}

TEST_CASE("spec validation") {
  AugmentSpec spec;
  spec.rot_min = 10;
  spec.rot_max = -10;
  CHECK_THROWS_AS(spec.validate(), ContractError);
  spec = AugmentSpec{};
  spec.scale_min = 0;
  CHECK_THROWS_AS(spec.validate(), ContractError);
  CHECK_THROWS_AS(compose_affine(0, 0, 0, -1), ContractError);
}

namespace {

// One bright pixel on an otherwise black 3 x n x n image.
Tensor<float> dot(std::size_t n, std::size_t y, std::size_t x) {
  std::vector<float> v(3 * n * n, 0.f);
  for (std::size_t c = 0; c < 3; ++c) v[(c * n + y) * n + x] = 1.f;
  return Tensor<float>({1, 3, n, n}, v);
}

std::pair<std::size_t, std::size_t> brightest(const Tensor<float>& img, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < n * n; ++i)
    if (img.data()[i] > img.data()[best]) best = i;
  return {best / n, best % n};
}

}  // namespace

TEST_CASE("positive rotation turns content counter-clockwise on screen") {
  // right of centre -> above centre
  auto out = apply_affine(dot(9, 4, 8), std::vector{compose_affine(90, 0, 0, 1)});
  CHECK(brightest(out, 9) == std::pair<std::size_t, std::size_t>{0, 4});
}

TEST_CASE("translation moves content by a fraction of the side") {
  // +0.25 of the width on a 9-pixel axis is 2 pixels (8 pixel gaps)
  auto out = apply_affine(dot(9, 4, 4), std::vector{compose_affine(0, 0.25, 0, 1)});
  CHECK(brightest(out, 9) == std::pair<std::size_t, std::size_t>{4, 6});
  out = apply_affine(dot(9, 4, 4), std::vector{compose_affine(0, 0, -0.25, 1)});
  CHECK(brightest(out, 9) == std::pair<std::size_t, std::size_t>{2, 4});
}

TEST_CASE("identity, double half-turn and half scale") {
  Rng rng(3);
  auto x = oracle::random_tensor<float>({2, 3, 12, 12}, rng, 0, 1);
  std::vector<AffineParams> id(2);
  CHECK(oracle::max_abs_diff<float>(apply_affine(x, id).data(), x.data()) < 1e-5);

  std::vector<AffineParams> half_turn(2, compose_affine(180, 0, 0, 1));
  auto twice = apply_affine(apply_affine(x, half_turn), half_turn);
  CHECK(oracle::max_abs_diff<float>(twice.data(), x.data()) < 2e-4);

  auto ones = Tensor<float>::full({1, 3, 12, 12}, 1.f);
  auto small = apply_affine(ones, std::vector{compose_affine(0, 0, 0, 0.5)});
  // the content occupies the central half; the rim is zero-filled
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(small.data()[(c * 12 + 0) * 12 + i] == 0.f);
      CHECK(small.data()[(c * 12 + i) * 12 + 11] == 0.f);
    }
    CHECK(small.data()[(c * 12 + 6) * 12 + 6] == doctest::Approx(1.f));
  }
  CHECK_THROWS_AS(apply_affine(x, std::span<const AffineParams>(id).subspan(0, 1)), DimensionError);
}

TEST_CASE("normalization") {
  NormStats stats;
  CHECK(stats.mean == std::array<double, 3>{0.485, 0.456, 0.406});
  CHECK(stats.std == std::array<double, 3>{0.229, 0.224, 0.225});
  Tensor<float> px({3, 1, 1}, {0.485f, 0.456f, 0.406f});
  const auto centred = normalize(px, stats);
  for (float v : centred.data()) CHECK(v == 0.0f);

  auto zero = normalize(Tensor<float>({1, 3, 2, 2}), stats);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(zero.data()[c * 4 + i] == doctest::Approx(-stats.mean[c] / stats.std[c]).epsilon(1e-6));

  Rng rng(4);
  auto x = oracle::random_tensor<float>({3, 3, 5, 5}, rng, 0, 1);
  CHECK(oracle::max_abs_diff<float>(denormalize(normalize(x, stats), stats).data(), x.data()) < 1e-6);
  CHECK_THROWS_AS(normalize(Tensor<float>({1, 4, 2, 2}), stats), DimensionError);
  NormStats bad;
  bad.std[1] = 0;
  CHECK_THROWS_AS(normalize(x, bad), ContractError);
}
