#include <doctest.h>

#include "oracles.hpp"
#include "stdn/densenet.hpp"
#include "stdn/error.hpp"
#include "stdn/grad_check.hpp"
#include "stdn/init.hpp"

using namespace stdn;

namespace {

ConvWeights<double> random_conv(std::size_t out, std::size_t in, std::size_t k, Rng& rng) {
  return {oracle::random_tensor<double>({out, in, k, k}, rng), oracle::random_tensor<double>({out}, rng)};
}

std::vector<double> relu_vec(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  for (auto& v : out) v = std::max(v, 0.0);
  return out;
}

DenseBlockParams<double> random_block(std::size_t c0, std::size_t layers, std::size_t k, Rng& rng) {
  DenseBlockParams<double> b;
  for (std::size_t l = 0; l < layers; ++l) b.layers.push_back(random_conv(k, c0 + l * k, 3, rng));
  return b;
}

}  // namespace

TEST_CASE("dense layer shape, zero weights and oracle") {
  Rng rng(41);
  auto x = oracle::random_tensor<double>({2, 5, 6, 7}, rng);
  ConvWeights<double> zero{Tensor<double>({4, 5, 3, 3}), Tensor<double>({4})};
  auto y0 = dense_layer_forward(x, zero);
  CHECK(y0.shape() == Shape{2, 4, 6, 7});
  for (double v : y0.data()) CHECK(v == 0.0);

  auto w = random_conv(4, 5, 3, rng);
  auto y = dense_layer_forward(x, w);
  auto want = oracle::conv2d(relu_vec(x.data()), 2, 5, 6, 7, w.kernels.data(), 4, 3, 3, w.biases.data(), 1, 1);
  CHECK(oracle::max_abs_diff<double>(y.data(), want) < 1e-12);
  CHECK_THROWS_AS(dense_layer_forward(oracle::random_tensor<double>({2, 4, 6, 7}, rng), w), DimensionError);
}

TEST_CASE("dense block channel arithmetic") {
  Rng rng(42);
  auto x = oracle::random_tensor<double>({1, 7, 4, 4}, rng);
  CHECK(dense_block_forward(x, random_block(7, 5, 4, rng)).dim(1) == 7 + 20);
  auto same = dense_block_forward(x, DenseBlockParams<double>{});
  CHECK(same.shape() == x.shape());
  CHECK(oracle::max_abs_diff<double>(same.data(), x.data()) == 0.0);
}

TEST_CASE("two-layer block on 1x1 input equals the hand-unrolled computation") {
  Rng rng(43);
  const std::size_t c0 = 3, k = 2;
  auto x = oracle::random_tensor<double>({1, c0, 1, 1}, rng);
  auto block = random_block(c0, 2, k, rng);
  auto y = dense_block_forward(x, block);
  REQUIRE(y.dim(1) == c0 + 2 * k);
  // On a 1x1 map with pad 1 only the centre tap of each 3x3 kernel sees data.
  auto layer = [&](const std::vector<double>& in, const ConvWeights<double>& w) {
    std::vector<double> out(k);
    for (std::size_t o = 0; o < k; ++o) {
      out[o] = w.biases.data()[o];
      for (std::size_t c = 0; c < in.size(); ++c) out[o] += std::max(in[c], 0.0) * w.kernels.data()[(o * in.size() + c) * 9 + 4];
    }
    return out;
  };
  std::vector<double> x0(x.data().begin(), x.data().end());
  auto x1 = layer(x0, block.layers[0]);
  std::vector<double> cat01 = x0;
  cat01.insert(cat01.end(), x1.begin(), x1.end());
  auto x2 = layer(cat01, block.layers[1]);
  std::vector<double> want = cat01;
  want.insert(want.end(), x2.begin(), x2.end());
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) == want);
}

TEST_CASE("each layer sees exactly the concatenation of its predecessors") {
  Rng rng(44);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t c0 = 1 + rng.next_u64() % 6, layers = rng.next_u64() % 7, k = 1 + rng.next_u64() % 8;
    auto x = oracle::random_tensor<double>({2, c0, 3, 3}, rng);
    auto block = random_block(c0, layers, k, rng);
    std::vector<Tensor<double>> seen;
    auto y = dense_block_forward<double>(x, block, [&](std::size_t l, const Tensor<double>& in) {
      CHECK(l == seen.size());
      seen.push_back(in);
    });
    CHECK(y.dim(1) == c0 + layers * k);
    REQUIRE(seen.size() == layers);
    for (std::size_t l = 0; l < layers; ++l) {
      // predecessors are the first c0 + l*k channels of the block output
      CHECK(seen[l].dim(1) == c0 + l * k);
      auto prefix = slice_channels(y, 0, c0 + l * k);
      CHECK(oracle::max_abs_diff<double>(seen[l].data(), prefix.data()) == 0.0);
    }
  }
}

TEST_CASE("transition layer") {
  Rng rng(45);
  auto x = oracle::random_tensor<double>({2, 64, 8, 8}, rng);
  auto conv = random_conv(32, 64, 1, rng);
  auto y = transition_forward(x, conv);
  CHECK(y.shape() == Shape{2, 32, 4, 4});
  auto want = oracle::pool2x2(oracle::conv2d(x.data(), 2, 64, 8, 8, conv.kernels.data(), 32, 1, 1, conv.biases.data(), 1, 0),
                              64, 8, 8, false);
  CHECK(oracle::max_abs_diff<double>(y.data(), want) < 1e-12);

  // constant input through a channel-averaging 1x1 conv stays constant
  Tensor<double> c({1, 4, 4, 4}, std::vector<double>(64, 0.75));
  ConvWeights<double> avg{Tensor<double>({2, 4, 1, 1}, std::vector<double>(8, 0.25)), Tensor<double>({2})};
  const auto flat = transition_forward(c, avg);
  for (double v : flat.data()) CHECK(v == 0.75);
  CHECK_THROWS_AS(transition_forward(oracle::random_tensor<double>({1, 4, 5, 4}, rng), avg), DimensionError);
}

TEST_CASE("DenseNet config and forward shapes") {
  DenseNetConfig cfg;
  CHECK(cfg.growth_rate == 12);
  CHECK(cfg.head_channels() == 90);
  Rng rng(46);
  auto params = init_densenet<float>(cfg, rng);
  CHECK(params.head_weight.shape() == Shape{90, 2});
  CHECK(params.transitions.size() == 2);
  CHECK(params.blocks[1].layers[3].kernels.shape() == Shape{12, 36 + 36, 3, 3});
  auto x = oracle::random_tensor<float>({2, 3, 32, 32}, rng);
  auto logits = densenet_forward(x, cfg, params);
  CHECK(logits.shape() == Shape{2, 2});
  auto again = densenet_forward(x, cfg, params);
  CHECK(oracle::max_abs_diff<float>(logits.data(), again.data()) == 0.0);

  DenseNetConfig bad;
  bad.block_layout.clear();
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = DenseNetConfig{};
  bad.growth_rate = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK_THROWS_AS(densenet_forward(oracle::random_tensor<float>({1, 3, 2, 2}, rng), cfg, params), DimensionError);
}

TEST_CASE("head channel recurrence over random configs") {
  Rng rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    DenseNetConfig cfg;
    cfg.growth_rate = 1 + rng.next_u64() % 8;
    cfg.initial_channels = 1 + rng.next_u64() % 16;
    cfg.block_layout.assign(1 + rng.next_u64() % 3, 0);
    for (auto& l : cfg.block_layout) l = rng.next_u64() % 4;
    std::size_t c = cfg.initial_channels;
    for (std::size_t b = 0; b < cfg.block_layout.size(); ++b) {
      c += cfg.block_layout[b] * cfg.growth_rate;
      if (b + 1 < cfg.block_layout.size()) c = c / 2;
    }
    CHECK(cfg.head_channels() == c);
    auto params = init_densenet<double>(cfg, rng);
    CHECK(params.head_weight.dim(0) == c);
  }
}

TEST_CASE("Kaiming init statistics and zero biases") {
  Rng rng(48);
  auto w = kaiming_conv<double>(64, 32, 3, 3, rng);
  double mean = 0, sq = 0;
  for (double v : w.kernels.data()) {
    mean += v;
    sq += v * v;
  }
  const double n = double(w.kernels.numel());
  CHECK(std::abs(mean / n) < 0.01);
  CHECK(sq / n == doctest::Approx(2.0 / 288).epsilon(0.05));
  for (double b : w.biases.data()) CHECK(b == 0.0);
}

TEST_CASE("densenet loss gradient on a 1x3x8x8 input with one block") {
  DenseNetConfig cfg;
  cfg.growth_rate = 4;
  cfg.block_layout = {1};
  cfg.initial_channels = 5;
  Rng rng(49);
  auto p = init_densenet<double>(cfg, rng);
  auto x = oracle::random_tensor<double>({1, 3, 8, 8}, rng);
  const std::vector<int> label{0};
  auto r = grad_check(
      [&](const Tensor<double>& t) {
        auto q = p;
        q.blocks[0].layers[0].kernels = t;
        return softmax_cross_entropy(densenet_forward(x, cfg, q), label);
      },
      p.blocks[0].layers[0].kernels);
  CHECK(r.max_rel_error < 1e-4);
  auto rx = grad_check(
      [&](const Tensor<double>& t) { return softmax_cross_entropy(densenet_forward(t, cfg, p), label); },
      x.detach(true));
  CHECK(rx.max_rel_error < 1e-4);
}

TEST_CASE("named parameters follow the documented scheme") {
  DenseNetConfig cfg;
  cfg.block_layout = {2, 1};
  Rng rng(50);
  auto names = init_densenet<float>(cfg, rng).named();
  std::vector<std::string> got;
  for (const auto& n : names) got.push_back(n.name);
  CHECK(got == std::vector<std::string>{"conv0.kernels", "conv0.biases", "block0.layer0.conv.kernels",
                                        "block0.layer0.conv.biases", "block0.layer1.conv.kernels",
                                        "block0.layer1.conv.biases", "transition0.conv.kernels",
                                        "transition0.conv.biases", "block1.layer0.conv.kernels",
                                        "block1.layer0.conv.biases", "head.weight", "head.bias"});
}
