#include "stdn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "stdn/container.hpp"
#include "stdn/error.hpp"
#include "stdn/rng.hpp"

namespace stdn {

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

void Dataset::validate() const {
  if (!images.defined() || images.rank() != 4 || images.dim(1) != 3) {
    throw DimensionError("dataset images must be [M,3,H,W], got " +
                         (images.defined() ? shape_string(images.shape()) : std::string("nothing")));
  }
  if (images.dim(0) != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(images.dim(0)) + " images but " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw ContractError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

Dataset Dataset::subset(std::size_t begin, std::size_t count) const {
  if (begin + count > size()) throw DimensionError("subset past end of dataset");
  if (count == 0) throw DimensionError("empty subset");
  const std::size_t stride = images.numel() / size();
  auto src = images.data().subspan(begin * stride, count * stride);
  Shape shape = images.shape();
  shape[0] = count;
  return {Tensor<float>(shape, std::vector<float>(src.begin(), src.end())),
          std::vector<int>(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                           labels.begin() + static_cast<std::ptrdiff_t>(begin + count)),
          split};
}

namespace {

constexpr double kBase[3] = {0.55, 0.38, 0.48};
constexpr double kBlobTint[3] = {0.9, 1.0, 0.8};
constexpr int kDistractors = 12;
constexpr double kDistractorAmp = 0.1;
constexpr double kNoise = 0.05;

void add_blob(std::vector<double>& blob, std::size_t size, double bx, double by, double sigma, double amp) {
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - bx, dy = static_cast<double>(y) + 0.5 - by;
      blob[y * size + x] += amp * std::exp(-(dx * dx + dy * dy) * inv);
    }
}

void render_image(float* out, std::size_t size, bool positive, Rng& rng) {
  const double s = static_cast<double>(size);
  const std::size_t area = size * size;
  const double brightness = rng.uniform(0.85, 1.15);

  // Two low-frequency waves give the background some structure.
  double fx[2], fy[2], phase[2];
  for (int w = 0; w < 2; ++w) {
    fx[w] = rng.uniform(1.0, 3.0) * 2.0 * std::numbers::pi / s;
    fy[w] = rng.uniform(1.0, 3.0) * 2.0 * std::numbers::pi / s;
    phase[w] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  // Faint blobs anywhere, in both classes, so "has a bright spot" alone does
  // not separate them.
  std::vector<double> blob(area, 0.0);
  for (int d = 0; d < kDistractors; ++d) {
    const double bx = rng.uniform(0.0, s), by = rng.uniform(0.0, s);
    const double sigma = rng.uniform(0.04, 0.07) * s;
    add_blob(blob, size, bx, by, sigma, rng.uniform(0.5, 1.0) * kDistractorAmp);
  }

  if (positive) {
    const int count = 3 + static_cast<int>(rng.next_u64() % 4);
    const double cx = rng.uniform(s / 3.0, 2.0 * s / 3.0);
    const double cy = rng.uniform(s / 3.0, 2.0 * s / 3.0);
    std::vector<double> ox(count), oy(count), sigma(count), amp(count);
    for (int b = 0; b < count; ++b) {
      ox[b] = rng.normal(0.0, 0.08 * s);
      oy[b] = rng.normal(0.0, 0.08 * s);
      sigma[b] = rng.uniform(0.04, 0.07) * s;
      amp[b] = rng.uniform(0.15, 0.3);
    }
    // Recentre so the cluster centroid is exactly (cx, cy).
    const double mx = std::accumulate(ox.begin(), ox.end(), 0.0) / count;
    const double my = std::accumulate(oy.begin(), oy.end(), 0.0) / count;
    for (int b = 0; b < count; ++b) add_blob(blob, size, cx + ox[b] - mx, cy + oy[b] - my, sigma[b], amp[b]);
  }

  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double xd = static_cast<double>(x), yd = static_cast<double>(y);
        const double texture = 0.025 * (std::sin(fx[0] * xd + fy[0] * yd + phase[0]) +
                                         std::sin(fx[1] * xd - fy[1] * yd + phase[1]));
        const double v = kBase[c] * brightness + texture + kBlobTint[c] * blob[y * size + x] +
                         rng.normal(0.0, kNoise);
        out[c * area + y * size + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
}

}  // namespace

Dataset synthesize_dataset(std::size_t n, std::size_t image_size, std::uint64_t seed, Split split) {
  if (n < 2) throw ContractError("synthesize_dataset needs n >= 2");
  if (image_size < 16) throw ContractError("synthesize_dataset needs image_size >= 16");

  std::vector<int> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n / 2), 1);
  Rng shuffle_rng(derive_seed(seed, 0x6c6162656cULL));
  std::shuffle(labels.begin(), labels.end(), shuffle_rng.engine());

  const std::size_t stride = 3 * image_size * image_size;
  std::vector<float> pixels(n * stride);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i, 1));
    render_image(pixels.data() + i * stride, image_size, labels[i] == 1, rng);
  }
  return {Tensor<float>({n, 3, image_size, image_size}, std::move(pixels)), std::move(labels), split};
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  ds.validate();
  std::vector<float> labels(ds.labels.begin(), ds.labels.end());
  write_container(path, {StoredTensor::from("images", ds.images),
                         StoredTensor{"labels", {ds.size()}, std::move(labels)}});
}

Dataset read_dataset(const std::filesystem::path& path, Split split) {
  const auto entries = read_container(path);
  const StoredTensor* images = find_entry(entries, "images");
  const StoredTensor* labels = find_entry(entries, "labels");
  if (!images || !labels) throw FormatError(path.string() + ": dataset needs entries 'images' and 'labels'");
  if (labels->shape.size() != 1) throw FormatError(path.string() + ": 'labels' must be rank 1");

  Dataset ds;
  ds.images = images->to_tensor<float>();
  ds.split = split;
  ds.labels.reserve(labels->shape[0]);
  std::visit(
      [&](const auto& v) {
        for (auto x : v) {
          if (x != std::round(x)) throw FormatError(path.string() + ": non-integer label");
          ds.labels.push_back(static_cast<int>(x));
        }
      },
      labels->values);
  ds.validate();
  return ds;
}

}  // namespace stdn
