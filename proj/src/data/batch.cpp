#include "stdn/batch.hpp"

#include <algorithm>
#include <numeric>

#include "stdn/error.hpp"
#include "stdn/rng.hpp"

namespace stdn {

BatchPlan::BatchPlan(const Dataset& ds, BatchOptions options) : ds_(&ds), options_(std::move(options)) {
  if (options_.batch_size < 1) throw ContractError("batch size must be at least 1");
  if (ds.size() == 0) throw ContractError("cannot iterate an empty dataset");
  ds.validate();
  if (options_.augment) options_.augment->validate();
  normalized_ = normalize(ds.images, options_.stats);
  order_.resize(ds.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (options_.shuffle_seed) {
    Rng rng(derive_seed(*options_.shuffle_seed, options_.epoch, 0x73687566ULL));
    std::shuffle(order_.begin(), order_.end(), rng.engine());
  }
}

Batch BatchPlan::make(std::size_t b) const {
  if (b >= batch_count()) throw ContractError("batch index out of range");
  const std::size_t begin = b * options_.batch_size;
  const std::size_t end = std::min(begin + options_.batch_size, order_.size());
  const std::size_t count = end - begin;
  const Shape& full = normalized_.shape();
  const std::size_t stride = full[1] * full[2] * full[3];

  Batch batch;
  batch.index = b;
  batch.items.assign(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(end));
  std::vector<float> pixels(count * stride);
  auto src = normalized_.data();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t row = batch.items[i];
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(row * stride), stride,
                pixels.begin() + static_cast<std::ptrdiff_t>(i * stride));
    batch.labels.push_back(ds_->labels[row]);
  }
  batch.images = Tensor<float>({count, full[1], full[2], full[3]}, std::move(pixels));

  if (options_.augment) {
    std::vector<AffineParams> thetas;
    for (std::size_t row : batch.items) {
      Rng rng(derive_seed(options_.augment->seed, options_.epoch, row));
      batch.draws.push_back(random_affine_params(*options_.augment, rng));
      thetas.push_back(batch.draws.back().theta);
    }
    batch.images = apply_affine(batch.images, thetas);
  }
  return batch;
}

std::vector<Batch> batch_iter(const Dataset& ds, const BatchOptions& options) {
  BatchPlan plan(ds, options);
  std::vector<Batch> out;
  out.reserve(plan.batch_count());
  for (std::size_t b = 0; b < plan.batch_count(); ++b) out.push_back(plan.make(b));
  return out;
}

PrefetchStream::PrefetchStream(const BatchPlan& plan, std::size_t capacity) : queue_(std::max<std::size_t>(capacity, 2)) {
  worker_ = std::thread([this, &plan] {
    try {
      for (std::size_t b = 0; b < plan.batch_count(); ++b) {
        if (!queue_.push(plan.make(b))) return;
      }
    } catch (...) {
      error_ = std::current_exception();
    }
    queue_.close();
  });
}

PrefetchStream::~PrefetchStream() {
  queue_.close();
  if (worker_.joinable()) worker_.join();
}

std::optional<Batch> PrefetchStream::next() {
  auto item = queue_.pop();
  if (!item && error_) std::rethrow_exception(error_);
  return item;
}

}  // namespace stdn
