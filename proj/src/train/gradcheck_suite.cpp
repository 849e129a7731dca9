#include "stdn/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "stdn/augment.hpp"
#include "stdn/densenet.hpp"
#include "stdn/grad_check.hpp"
#include "stdn/ops.hpp"
#include "stdn/stn.hpp"

namespace stdn {

namespace {

using TensorD = Tensor<double>;
using Fn = std::function<TensorD(const TensorD&)>;

TensorD uniform_tensor(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TensorD(std::move(shape), std::move(v), requires_grad);
}

// Random magnitudes in [0.05, 1] with random sign, so nothing sits near 0.
TensorD away_from_zero(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(0.05, 1.0) * (rng.next_u64() & 1 ? 1.0 : -1.0);
  return TensorD(std::move(shape), std::move(v), true);
}

// Distinct values 0.01 apart, so every pooling window has a clear maximum.
TensorD distinct_values(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  std::iota(v.begin(), v.end(), 0.0);
  std::shuffle(v.begin(), v.end(), rng.engine());
  for (auto& x : v) x = x * 0.01 - 0.5;
  return TensorD(std::move(shape), std::move(v), true);
}

// sum(r * y) with fixed random r; weights every output differently.
Fn weighted(std::function<TensorD(const TensorD&)> inner, Shape out_shape, Rng& rng) {
  const TensorD r = uniform_tensor(std::move(out_shape), -1.0, 1.0, rng);
  return [inner = std::move(inner), r](const TensorD& x) {
    return sum(mul_const(inner(x), r.data()));
  };
}

GradCheckEntry check(std::string op, const Fn& f, const TensorD& x) {
  const auto r = grad_check(f, x, kGradCheckEps);
  return {std::move(op), r.max_rel_error, x.numel()};
}

// Reports the worst error over several parameters under one op name.
struct Group {
  GradCheckEntry entry;
  explicit Group(std::string op) { entry.op = std::move(op); }
  void add(const Fn& f, const TensorD& x) {
    const auto r = grad_check(f, x, kGradCheckEps);
    entry.max_rel_error = std::max(entry.max_rel_error, r.max_rel_error);
    entry.coordinates += x.numel();
  }
};

ConvWeights<double> random_conv(std::size_t out, std::size_t in, std::size_t k, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
  return {uniform_tensor({out, in, k, k}, -bound, bound, rng, true), uniform_tensor({out}, -0.1, 0.1, rng, true)};
}

}  // namespace

std::vector<GradCheckEntry> run_grad_check_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckEntry> out;

  {
    const TensorD x = uniform_tensor({2, 3, 6, 5}, -1.0, 1.0, rng, true);
    const ConvWeights<double> w = random_conv(4, 3, 3, rng);
    const Shape y_shape{2, 4, 3, 3};  // stride 2, pad 1
    Group g("conv2d");
    g.add(weighted([w](const TensorD& t) { return conv2d(t, w, 2, 1); }, y_shape, rng), x);
    g.add(weighted([x, b = w.biases](const TensorD& t) { return conv2d(x, ConvWeights<double>{t, b}, 2, 1); },
                   y_shape, rng),
          w.kernels);
    g.add(weighted([x, k = w.kernels](const TensorD& t) { return conv2d(x, ConvWeights<double>{k, t}, 2, 1); },
                   y_shape, rng),
          w.biases);
    out.push_back(g.entry);
  }
  {
    const TensorD x = uniform_tensor({4, 5}, -1.0, 1.0, rng, true);
    const TensorD w = uniform_tensor({5, 3}, -1.0, 1.0, rng, true);
    const TensorD b = uniform_tensor({3}, -1.0, 1.0, rng, true);
    Group g("linear");
    g.add(weighted([w, b](const TensorD& t) { return linear(t, w, b); }, {4, 3}, rng), x);
    g.add(weighted([x, b](const TensorD& t) { return linear(x, t, b); }, {4, 3}, rng), w);
    g.add(weighted([x, w](const TensorD& t) { return linear(x, w, t); }, {4, 3}, rng), b);
    out.push_back(g.entry);
  }
  {
    const TensorD logits = uniform_tensor({6, 2}, -3.0, 3.0, rng, true);
    const std::vector<int> labels{0, 1, 1, 0, 1, 0};
    out.push_back(check("softmax_cross_entropy", [labels](const TensorD& t) { return softmax_cross_entropy(t, labels); },
                        logits));
  }
  {
    const TensorD x = away_from_zero({2, 3, 4, 4}, rng);
    out.push_back(check("relu", weighted([](const TensorD& t) { return relu(t); }, {2, 3, 4, 4}, rng), x));
  }
  {
    const TensorD x = distinct_values({2, 3, 6, 4}, rng);
    out.push_back(check("maxpool2x2", weighted([](const TensorD& t) { return maxpool2x2(t); }, {2, 3, 3, 2}, rng), x));
  }
  {
    const TensorD x = uniform_tensor({2, 3, 4, 6}, -1.0, 1.0, rng, true);
    out.push_back(check("avgpool2x2", weighted([](const TensorD& t) { return avgpool2x2(t); }, {2, 3, 2, 3}, rng), x));
  }
  {
    const TensorD x = uniform_tensor({2, 3, 4, 5}, -1.0, 1.0, rng, true);
    out.push_back(check("global_avg_pool", weighted([](const TensorD& t) { return global_avg_pool(t); }, {2, 3}, rng), x));
  }
  {
    const TensorD a = uniform_tensor({2, 2, 3, 3}, -1.0, 1.0, rng, true);
    const TensorD b = uniform_tensor({2, 3, 3, 3}, -1.0, 1.0, rng, true);
    Group g("concat_channels");
    g.add(weighted([b](const TensorD& t) { return concat_channels(std::vector<TensorD>{t, b}); }, {2, 5, 3, 3}, rng), a);
    g.add(weighted([a](const TensorD& t) { return slice_channels(concat_channels(std::vector<TensorD>{a, t}), 1, 3); },
                   {2, 3, 3, 3}, rng),
          b);
    out.push_back(g.entry);
  }

  // Grid points whose pixel-space positions have fractional parts in
  // [0.1, 0.9], some of them outside the image.
  const std::size_t h = 5, w = 6, gh = 4, gw = 3;
  auto off_lattice_grid = [&](std::size_t n) {
    std::vector<double> g(n * gh * gw * 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double side = static_cast<double>(i % 2 == 0 ? w : h);
      const double px = std::floor(rng.uniform(-1.0, side)) + rng.uniform(0.1, 0.9);
      g[i] = 2.0 * px / (side - 1.0) - 1.0;
    }
    return TensorD({n, gh, gw, 2}, std::move(g), true);
  };
  {
    const TensorD input = uniform_tensor({2, 3, h, w}, -1.0, 1.0, rng, true);
    const TensorD grid = off_lattice_grid(2);
    out.push_back(check("bilinear_sample/input",
                        weighted([grid](const TensorD& t) { return bilinear_sample(t, grid.detach()); }, {2, 3, gh, gw}, rng),
                        input));
    out.push_back(check("bilinear_sample/grid",
                        weighted([input](const TensorD& t) { return bilinear_sample(input.detach(), t); },
                                 {2, 3, gh, gw}, rng),
                        grid));
  }
  {
    const TensorD theta = uniform_tensor({3, 2, 3}, -1.0, 1.0, rng, true);
    out.push_back(check("affine_grid/theta",
                        weighted([](const TensorD& t) { return affine_grid(t, 4, 5); }, {3, 4, 5, 2}, rng), theta));
  }

  {
    // Composed STN on an 8x8 input. The regressor output layer gets random
    // weights and a generic rotation/zoom bias, so gradients reach every
    // localization weight and sample points avoid the pixel lattice.
    LocNetConfig cfg;
    cfg.channel_plan = {4, 6, 8};
    cfg.hidden = 8;
    Rng init(derive_seed(seed, 1));
    LocNetParams<double> p = init_locnet<double>(cfg, 8, 8, init);
    p.fc2_weight = uniform_tensor({cfg.hidden, 6}, -0.05, 0.05, rng, true);
    const auto base = compose_affine(17.0, 0.04, -0.03, 0.85);
    p.fc2_bias = TensorD({6}, std::vector<double>(base.theta.begin(), base.theta.end()), true);
    const TensorD image = uniform_tensor({2, 3, 8, 8}, 0.0, 1.0, rng);
    const TensorD r = uniform_tensor({2, 3, 8, 8}, -1.0, 1.0, rng);

    std::vector<std::function<TensorD&(LocNetParams<double>&)>> fields;
    for (std::size_t i = 0; i < p.convs.size(); ++i) {
      fields.push_back([i](LocNetParams<double>& q) -> TensorD& { return q.convs[i].kernels; });
      fields.push_back([i](LocNetParams<double>& q) -> TensorD& { return q.convs[i].biases; });
    }
    fields.push_back([](LocNetParams<double>& q) -> TensorD& { return q.fc1_weight; });
    fields.push_back([](LocNetParams<double>& q) -> TensorD& { return q.fc1_bias; });
    fields.push_back([](LocNetParams<double>& q) -> TensorD& { return q.fc2_weight; });
    fields.push_back([](LocNetParams<double>& q) -> TensorD& { return q.fc2_bias; });

    Group g("stn_forward/localization");
    for (const auto& field : fields) {
      LocNetParams<double> q = p;
      const TensorD leaf = field(q);
      g.add(
          [&, q, field](const TensorD& t) mutable {
            field(q) = t;
            return sum(mul_const(stn_forward(image, cfg, q), r.data()));
          },
          leaf);
    }
    out.push_back(g.entry);
  }
  {
    DenseNetConfig cfg;
    cfg.growth_rate = 3;
    cfg.block_layout = {1};
    cfg.initial_channels = 4;
    Rng init(derive_seed(seed, 2));
    DenseNetParams<double> p = init_densenet<double>(cfg, init);
    const TensorD image = uniform_tensor({1, 3, 8, 8}, -1.0, 1.0, rng);
    const std::vector<int> label{1};

    Group g("densenet_forward");
    for (std::size_t i = 0; i < p.named().size(); ++i) {
      g.add(
          [&, i](const TensorD& t) {
            DenseNetParams<double> q = p;
            std::vector<TensorD*> slots{&q.initial.kernels, &q.initial.biases, &q.blocks[0].layers[0].kernels,
                                        &q.blocks[0].layers[0].biases, &q.head_weight, &q.head_bias};
            *slots[i] = t;
            return softmax_cross_entropy(densenet_forward(image, cfg, q), label);
          },
          p.named()[i].tensor);
    }
    out.push_back(g.entry);
  }
  return out;
}

}  // namespace stdn
