#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "stdn/augment.hpp"
#include "stdn/dataset.hpp"

namespace stdn {

struct Batch {
  std::size_t index = 0;          // position within the epoch
  Tensor<float> images;           // normalized, then warped if augmenting
  std::vector<int> labels;
  std::vector<std::size_t> items;  // dataset rows in this batch
  std::vector<AffineDraw> draws;   // empty without augmentation
};

struct BatchOptions {
  std::size_t batch_size = 64;
  std::optional<std::uint64_t> shuffle_seed;  // dataset order when unset
  std::optional<AugmentSpec> augment;
  NormStats stats;
  std::uint64_t epoch = 0;
};

/// One epoch's worth of batches, built on demand.
///
/// The permutation depends on (shuffle_seed, epoch) and the affine draw for a
/// row depends on (augment seed, epoch, row), so make(b) returns the same batch
/// no matter which thread builds it or in what order batches are requested.
class BatchPlan {
 public:
  BatchPlan(const Dataset& ds, BatchOptions options);

  std::size_t batch_count() const { return (order_.size() + options_.batch_size - 1) / options_.batch_size; }
  const std::vector<std::size_t>& order() const { return order_; }
  Batch make(std::size_t b) const;

 private:
  const Dataset* ds_;
  BatchOptions options_;
  Tensor<float> normalized_;
  std::vector<std::size_t> order_;
};

// Every batch of the epoch, eagerly.
std::vector<Batch> batch_iter(const Dataset& ds, const BatchOptions& options);

/// Fixed-capacity FIFO for handing batches between two threads. close()
/// wakes everyone; pop() then drains what is left and returns nullopt.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

  // False if the queue was closed before the item fit.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// Builds a plan's batches on a producer thread. next() yields them in index
/// order and rethrows anything the producer threw.
class PrefetchStream {
 public:
  PrefetchStream(const BatchPlan& plan, std::size_t capacity = 2);
  ~PrefetchStream();
  PrefetchStream(const PrefetchStream&) = delete;
  PrefetchStream& operator=(const PrefetchStream&) = delete;

  std::optional<Batch> next();

 private:
  BoundedQueue<Batch> queue_;
  std::exception_ptr error_;
  std::thread worker_;
};

}  // namespace stdn
