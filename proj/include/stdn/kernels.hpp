#pragma once

// Raw numeric kernels on flat row-major buffers.
//
// stdn::kernels holds the OpenMP-parallel implementations the ops call.
// stdn::kernels::reference holds plain serial loops with identical
// signatures; they are kept for tests and the benchmark, never for training.
//
// Every parallel kernel partitions work so that each output element is
// written by exactly one iteration with a fixed summation order, so results
// do not depend on the thread count. Backward kernels accumulate (+=).

#include <cstddef>
#include <span>

namespace stdn::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel_w) / stride + 1; }
  std::size_t patch_size() const { return in_channels * kernel_h * kernel_w; }
};

// One plane set [batch, channels, h, w]; pooling windows are 2x2, stride 2.
struct PlaneGeometry {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t h = 1;
  std::size_t w = 1;
};

struct SampleGeometry {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_h = 1;
  std::size_t out_w = 1;
};

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> kernels,
                    std::span<const T> biases, std::span<T> y);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> kernels,
                           std::span<T> dx);
template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dkernels, std::span<T> dbiases);

template <typename T>
void maxpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y);
// Routes each window's gradient to its first maximum in row-major scan order.
template <typename T>
void maxpool2x2_backward(const PlaneGeometry& g, std::span<const T> x, std::span<const T> dy,
                         std::span<T> dx);
template <typename T>
void avgpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y);
template <typename T>
void avgpool2x2_backward(const PlaneGeometry& g, std::span<const T> dy, std::span<T> dx);

// grid is [batch, out_h, out_w, 2] holding (u, v) in align-corners normalized
// coordinates; samples outside the image read zeros.
template <typename T>
void bilinear_forward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                      std::span<T> y);
// dx or dgrid may be empty to skip that gradient.
template <typename T>
void bilinear_backward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                       std::span<const T> dy, std::span<T> dx, std::span<T> dgrid);

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> kernels,
                    std::span<const T> biases, std::span<T> y);
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> kernels,
                           std::span<T> dx);
template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dkernels, std::span<T> dbiases);

template <typename T>
void maxpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y);
// Routes each window's gradient to its first maximum in row-major scan order.
template <typename T>
void maxpool2x2_backward(const PlaneGeometry& g, std::span<const T> x, std::span<const T> dy,
                         std::span<T> dx);
template <typename T>
void avgpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y);
template <typename T>
void avgpool2x2_backward(const PlaneGeometry& g, std::span<const T> dy, std::span<T> dx);

// grid is [batch, out_h, out_w, 2] holding (u, v) in align-corners normalized
// coordinates; samples outside the image read zeros.
template <typename T>
void bilinear_forward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                      std::span<T> y);
// dx or dgrid may be empty to skip that gradient.
template <typename T>
void bilinear_backward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                       std::span<const T> dy, std::span<T> dx, std::span<T> dgrid);

}  // namespace reference

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace stdn::kernels
