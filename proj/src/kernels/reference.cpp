#include <cmath>

#include "stdn/kernels.hpp"
#include "instantiate.hpp"

namespace stdn::kernels::reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> kernels,
                    std::span<const T> biases, std::span<T> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T acc = biases[o];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) || ix >= static_cast<long>(g.in_w))
                  continue;
                acc += x[((n * g.in_channels + c) * g.in_h + iy) * g.in_w + ix] *
                       kernels[((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
              }
          y[((n * g.out_channels + o) * oh + oy) * ow + ox] = acc;
        }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> kernels,
                           std::span<T> dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T d = dy[((n * g.out_channels + o) * oh + oy) * ow + ox];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) || ix >= static_cast<long>(g.in_w))
                  continue;
                dx[((n * g.in_channels + c) * g.in_h + iy) * g.in_w + ix] +=
                    d * kernels[((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
              }
        }
}

template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dkernels, std::span<T> dbiases) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T d = dy[((n * g.out_channels + o) * oh + oy) * ow + ox];
          dbiases[o] += d;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) || ix >= static_cast<long>(g.in_w))
                  continue;
                dkernels[((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx] +=
                    d * x[((n * g.in_channels + c) * g.in_h + iy) * g.in_w + ix];
              }
        }
}

template <typename T>
void maxpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  for (std::size_t p = 0; p < g.batch * g.channels; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T* base = x.data() + (p * g.h + 2 * oy) * g.w + 2 * ox;
        T best = base[0];
        if (base[1] > best) best = base[1];
        if (base[g.w] > best) best = base[g.w];
        if (base[g.w + 1] > best) best = base[g.w + 1];
        y[(p * oh + oy) * ow + ox] = best;
      }
}

template <typename T>
void maxpool2x2_backward(const PlaneGeometry& g, std::span<const T> x, std::span<const T> dy,
                         std::span<T> dx) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  for (std::size_t p = 0; p < g.batch * g.channels; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t origin = (p * g.h + 2 * oy) * g.w + 2 * ox;
        const std::size_t offsets[4] = {0, 1, g.w, g.w + 1};
        std::size_t arg = origin;
        for (auto off : offsets) {
          if (x[origin + off] > x[arg]) arg = origin + off;
        }
        dx[arg] += dy[(p * oh + oy) * ow + ox];
      }
}

template <typename T>
void avgpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  for (std::size_t p = 0; p < g.batch * g.channels; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T* base = x.data() + (p * g.h + 2 * oy) * g.w + 2 * ox;
        y[(p * oh + oy) * ow + ox] = (base[0] + base[1] + base[g.w] + base[g.w + 1]) * T(0.25);
      }
}

template <typename T>
void avgpool2x2_backward(const PlaneGeometry& g, std::span<const T> dy, std::span<T> dx) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  for (std::size_t p = 0; p < g.batch * g.channels; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T d = dy[(p * oh + oy) * ow + ox] * T(0.25);
        T* base = dx.data() + (p * g.h + 2 * oy) * g.w + 2 * ox;
        base[0] += d;
        base[1] += d;
        base[g.w] += d;
        base[g.w + 1] += d;
      }
}

namespace {

template <typename T>
T pixel_or_zero(std::span<const T> plane, std::size_t h, std::size_t w, long iy, long ix) {
  if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) return T(0);
  return plane[iy * w + ix];
}

}  // namespace

template <typename T>
void bilinear_forward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                      std::span<T> y) {
  const std::size_t plane = g.in_h * g.in_w;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t c = 0; c < g.channels; ++c) {
      auto img = x.subspan((n * g.channels + c) * plane, plane);
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const std::size_t gi = ((n * g.out_h + oy) * g.out_w + ox) * 2;
          const double px = (double(grid[gi]) + 1.0) * 0.5 * double(g.in_w - 1);
          const double py = (double(grid[gi + 1]) + 1.0) * 0.5 * double(g.in_h - 1);
          const double fx = std::floor(px), fy = std::floor(py);
          const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
          const T wx1 = static_cast<T>(px - fx), wy1 = static_cast<T>(py - fy);
          const T wx0 = static_cast<T>(1.0 - (px - fx)), wy0 = static_cast<T>(1.0 - (py - fy));
          y[((n * g.channels + c) * g.out_h + oy) * g.out_w + ox] =
              wy0 * wx0 * pixel_or_zero(img, g.in_h, g.in_w, y0, x0) +
              wy0 * wx1 * pixel_or_zero(img, g.in_h, g.in_w, y0, x0 + 1) +
              wy1 * wx0 * pixel_or_zero(img, g.in_h, g.in_w, y0 + 1, x0) +
              wy1 * wx1 * pixel_or_zero(img, g.in_h, g.in_w, y0 + 1, x0 + 1);
        }
    }
}

template <typename T>
void bilinear_backward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                       std::span<const T> dy, std::span<T> dx, std::span<T> dgrid) {
  const std::size_t plane = g.in_h * g.in_w;
  const T sx = T(g.in_w - 1) / T(2), sy = T(g.in_h - 1) / T(2);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t c = 0; c < g.channels; ++c) {
      auto img = x.subspan((n * g.channels + c) * plane, plane);
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const std::size_t gi = ((n * g.out_h + oy) * g.out_w + ox) * 2;
          const double px = (double(grid[gi]) + 1.0) * 0.5 * double(g.in_w - 1);
          const double py = (double(grid[gi + 1]) + 1.0) * 0.5 * double(g.in_h - 1);
          const double fx = std::floor(px), fy = std::floor(py);
          const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
          const T wx1 = static_cast<T>(px - fx), wy1 = static_cast<T>(py - fy);
          const T wx0 = static_cast<T>(1.0 - (px - fx)), wy0 = static_cast<T>(1.0 - (py - fy));
          const T d = dy[((n * g.channels + c) * g.out_h + oy) * g.out_w + ox];

          if (!dx.empty()) {
            const long ys[2] = {y0, y0 + 1};
            const long xs[2] = {x0, x0 + 1};
            const T wys[2] = {wy0, wy1};
            const T wxs[2] = {wx0, wx1};
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b) {
                if (ys[a] < 0 || xs[b] < 0 || ys[a] >= static_cast<long>(g.in_h) ||
                    xs[b] >= static_cast<long>(g.in_w))
                  continue;
                dx[(n * g.channels + c) * plane + ys[a] * g.in_w + xs[b]] += d * wys[a] * wxs[b];
              }
          }
          if (!dgrid.empty()) {
            const T v00 = pixel_or_zero(img, g.in_h, g.in_w, y0, x0);
            const T v01 = pixel_or_zero(img, g.in_h, g.in_w, y0, x0 + 1);
            const T v10 = pixel_or_zero(img, g.in_h, g.in_w, y0 + 1, x0);
            const T v11 = pixel_or_zero(img, g.in_h, g.in_w, y0 + 1, x0 + 1);
            const T dpx = wy0 * (v01 - v00) + wy1 * (v11 - v10);
            const T dpy = wx0 * (v10 - v00) + wx1 * (v11 - v01);
            dgrid[gi] += d * dpx * sx;
            dgrid[gi + 1] += d * dpy * sy;
          }
        }
    }
}

STDN_INSTANTIATE(float)
STDN_INSTANTIATE(double)

}  // namespace stdn::kernels::reference
