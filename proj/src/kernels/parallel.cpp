#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "gemm.hpp"
#include "instantiate.hpp"
#include "stdn/kernels.hpp"

namespace stdn::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad == 0;
}

// Valid output-column range [lo, hi) for kernel column kx when stride is 1.
inline void stride1_span(const ConvGeometry& g, std::size_t kx, std::size_t ow, std::size_t& lo,
                         std::size_t& hi) {
  const long shift = static_cast<long>(kx) - static_cast<long>(g.pad);
  lo = static_cast<std::size_t>(std::max<long>(0, -shift));
  hi = static_cast<std::size_t>(
      std::clamp<long>(static_cast<long>(g.in_w) - shift, 0, static_cast<long>(ow)));
  if (hi < lo) hi = lo;
}

// col[(c*kh + ky)*kw + kx][oy*ow + ox] = x[c][oy*s + ky - pad][ox*s + kx - pad]
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), hw = oh * ow;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = x + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        T* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * hw;
        std::size_t lo = 0, hi = ow;
        if (g.stride == 1) stride1_span(g, kx, ow, lo, hi);
        for (std::size_t oy = 0; oy < oh; ++oy) {
          T* dst = row + oy * ow;
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = plane + iy * g.in_w;
          if (g.stride == 1) {
            const long shift = static_cast<long>(kx) - static_cast<long>(g.pad);
            std::fill(dst, dst + lo, T(0));
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox + shift];
            std::fill(dst + hi, dst + ow, T(0));
          } else {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              dst[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w)) ? T(0) : src[ix];
            }
          }
        }
      }
  }
}

// Scatter-add of im2col: dx[c][iy][ix] += col[...]
template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), hw = oh * ow;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* plane = dx + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const T* row = col + ((c * g.kernel_h + ky) * g.kernel_w + kx) * hw;
        std::size_t lo = 0, hi = ow;
        if (g.stride == 1) stride1_span(g, kx, ow, lo, hi);
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          const T* src = row + oy * ow;
          T* dst = plane + iy * g.in_w;
          if (g.stride == 1) {
            const long shift = static_cast<long>(kx) - static_cast<long>(g.pad);
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox + shift] += src[ox];
          } else {
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix >= 0 && ix < static_cast<long>(g.in_w)) dst[ix] += src[ox];
            }
          }
        }
      }
  }
}

// Clamping keeps the integer cast defined for wild coordinates; anything
// beyond one pixel outside the image samples only zeros either way.
template <typename T>
struct Corners {
  long x0, y0;
  T wx0, wx1, wy0, wy1;
};

// Pixel position in double even for float grids: a float (u + 1) / 2 * (w - 1)
// lands visibly off the lattice for an identity grid.
template <typename T>
Corners<T> locate(T u, T v, std::size_t in_h, std::size_t in_w) {
  double px = (double(u) + 1.0) * 0.5 * double(in_w - 1);
  double py = (double(v) + 1.0) * 0.5 * double(in_h - 1);
  px = std::clamp(px, -2.0, double(in_w + 1));
  py = std::clamp(py, -2.0, double(in_h + 1));
  const double fx = std::floor(px), fy = std::floor(py);
  Corners<T> k;
  k.x0 = static_cast<long>(fx);
  k.y0 = static_cast<long>(fy);
  k.wx1 = static_cast<T>(px - fx);
  k.wy1 = static_cast<T>(py - fy);
  k.wx0 = static_cast<T>(1.0 - (px - fx));
  k.wy0 = static_cast<T>(1.0 - (py - fy));
  return k;
}

inline bool inside(long y, long x, std::size_t h, std::size_t w) {
  return y >= 0 && x >= 0 && y < static_cast<long>(h) && x < static_cast<long>(w);
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> kernels,
                    std::span<const T> biases, std::span<T> y) {
  const std::size_t hw = g.out_h() * g.out_w();
  const std::size_t patch = g.patch_size();
  const std::size_t in_plane = g.in_channels * g.in_h * g.in_w;
  const bool direct = is_pointwise(g);
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel
  {
    std::vector<T> col(direct ? 0 : patch * hw);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      const T* xn = x.data() + n * in_plane;
      const T* src = xn;
      if (!direct) {
        im2col(g, xn, col.data());
        src = col.data();
      }
      T* yn = y.data() + n * g.out_channels * hw;
      for (std::size_t o = 0; o < g.out_channels; ++o) std::fill(yn + o * hw, yn + (o + 1) * hw, biases[o]);
      gemm_nn(g.out_channels, hw, patch, kernels.data(), src, yn);
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> kernels,
                           std::span<T> dx) {
  const std::size_t hw = g.out_h() * g.out_w();
  const std::size_t patch = g.patch_size();
  const std::size_t in_plane = g.in_channels * g.in_h * g.in_w;
  const bool direct = is_pointwise(g);
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel
  {
    std::vector<T> dcol(direct ? 0 : patch * hw);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      const T* dyn = dy.data() + n * g.out_channels * hw;
      T* dxn = dx.data() + n * in_plane;
      if (direct) {
        gemm_tn(patch, hw, g.out_channels, kernels.data(), dyn, dxn);
      } else {
        std::fill(dcol.begin(), dcol.end(), T(0));
        gemm_tn(patch, hw, g.out_channels, kernels.data(), dyn, dcol.data());
        col2im_add(g, dcol.data(), dxn);
      }
    }
  }
}

template <typename T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dkernels, std::span<T> dbiases) {
  const std::size_t hw = g.out_h() * g.out_w();
  const std::size_t patch = g.patch_size();
  const std::size_t in_plane = g.in_channels * g.in_h * g.in_w;
  const std::size_t wsize = g.out_channels * patch;
  const std::size_t per_sample = wsize + g.out_channels;
  const bool direct = is_pointwise(g);
  const long batch = static_cast<long>(g.batch);

  // One partial per sample, reduced afterwards in sample order, so the sum
  // is identical for any thread count.
  std::vector<T> partial(g.batch * per_sample, T(0));
#pragma omp parallel
  {
    std::vector<T> col(direct ? 0 : patch * hw);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      const T* xn = x.data() + n * in_plane;
      const T* src = xn;
      if (!direct) {
        im2col(g, xn, col.data());
        src = col.data();
      }
      const T* dyn = dy.data() + n * g.out_channels * hw;
      T* pw = partial.data() + n * per_sample;
      gemm_nt(g.out_channels, patch, hw, dyn, src, pw);
      T* pb = pw + wsize;
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const T* row = dyn + o * hw;
        T s = 0;
        for (std::size_t j = 0; j < hw; ++j) s += row[j];
        pb[o] = s;
      }
    }
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* pw = partial.data() + n * per_sample;
    for (std::size_t i = 0; i < wsize; ++i) dkernels[i] += pw[i];
    for (std::size_t o = 0; o < g.out_channels; ++o) dbiases[o] += pw[wsize + o];
  }
}

template <typename T>
void maxpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  const long planes = static_cast<long>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const T* src = x.data() + p * g.h * g.w;
    T* dst = y.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const T* r0 = src + 2 * oy * g.w;
      const T* r1 = r0 + g.w;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T a = std::max(r0[2 * ox], r0[2 * ox + 1]);
        const T b = std::max(r1[2 * ox], r1[2 * ox + 1]);
        dst[oy * ow + ox] = std::max(a, b);
      }
    }
  }
}

template <typename T>
void maxpool2x2_backward(const PlaneGeometry& g, std::span<const T> x, std::span<const T> dy,
                         std::span<T> dx) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  const long planes = static_cast<long>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const T* src = x.data() + p * g.h * g.w;
    T* dst = dx.data() + p * g.h * g.w;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t o = 2 * oy * g.w + 2 * ox;
        std::size_t arg = o;
        if (src[o + 1] > src[arg]) arg = o + 1;
        if (src[o + g.w] > src[arg]) arg = o + g.w;
        if (src[o + g.w + 1] > src[arg]) arg = o + g.w + 1;
        dst[arg] += dy[(p * oh + oy) * ow + ox];
      }
  }
}

template <typename T>
void avgpool2x2_forward(const PlaneGeometry& g, std::span<const T> x, std::span<T> y) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  const long planes = static_cast<long>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const T* src = x.data() + p * g.h * g.w;
    T* dst = y.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const T* r0 = src + 2 * oy * g.w;
      const T* r1 = r0 + g.w;
      for (std::size_t ox = 0; ox < ow; ++ox)
        dst[oy * ow + ox] = (r0[2 * ox] + r0[2 * ox + 1] + r1[2 * ox] + r1[2 * ox + 1]) * T(0.25);
    }
  }
}

template <typename T>
void avgpool2x2_backward(const PlaneGeometry& g, std::span<const T> dy, std::span<T> dx) {
  const std::size_t oh = g.h / 2, ow = g.w / 2;
  const long planes = static_cast<long>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    T* dst = dx.data() + p * g.h * g.w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      T* r0 = dst + 2 * oy * g.w;
      T* r1 = r0 + g.w;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const T d = dy[(p * oh + oy) * ow + ox] * T(0.25);
        r0[2 * ox] += d;
        r0[2 * ox + 1] += d;
        r1[2 * ox] += d;
        r1[2 * ox + 1] += d;
      }
    }
  }
}

template <typename T>
void bilinear_forward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                      std::span<T> y) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < batch; ++n) {
    const T* img = x.data() + n * g.channels * in_plane;
    T* out = y.data() + n * g.channels * out_plane;
    const T* gn = grid.data() + n * out_plane * 2;
    for (std::size_t q = 0; q < out_plane; ++q) {
      const auto k = locate(gn[2 * q], gn[2 * q + 1], g.in_h, g.in_w);
      const bool i00 = inside(k.y0, k.x0, g.in_h, g.in_w);
      const bool i01 = inside(k.y0, k.x0 + 1, g.in_h, g.in_w);
      const bool i10 = inside(k.y0 + 1, k.x0, g.in_h, g.in_w);
      const bool i11 = inside(k.y0 + 1, k.x0 + 1, g.in_h, g.in_w);
      const long base = k.y0 * static_cast<long>(g.in_w) + k.x0;
      for (std::size_t c = 0; c < g.channels; ++c) {
        const T* p = img + c * in_plane;
        T acc = 0;
        if (i00) acc += k.wy0 * k.wx0 * p[base];
        if (i01) acc += k.wy0 * k.wx1 * p[base + 1];
        if (i10) acc += k.wy1 * k.wx0 * p[base + g.in_w];
        if (i11) acc += k.wy1 * k.wx1 * p[base + g.in_w + 1];
        out[c * out_plane + q] = acc;
      }
    }
  }
}

template <typename T>
void bilinear_backward(const SampleGeometry& g, std::span<const T> x, std::span<const T> grid,
                       std::span<const T> dy, std::span<T> dx, std::span<T> dgrid) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const T sx = T(g.in_w - 1) / T(2), sy = T(g.in_h - 1) / T(2);
  const bool want_dx = !dx.empty(), want_dgrid = !dgrid.empty();
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < batch; ++n) {
    const T* img = x.data() + n * g.channels * in_plane;
    const T* dout = dy.data() + n * g.channels * out_plane;
    const T* gn = grid.data() + n * out_plane * 2;
    T* dimg = want_dx ? dx.data() + n * g.channels * in_plane : nullptr;
    T* dgn = want_dgrid ? dgrid.data() + n * out_plane * 2 : nullptr;
    for (std::size_t q = 0; q < out_plane; ++q) {
      const auto k = locate(gn[2 * q], gn[2 * q + 1], g.in_h, g.in_w);
      const bool i00 = inside(k.y0, k.x0, g.in_h, g.in_w);
      const bool i01 = inside(k.y0, k.x0 + 1, g.in_h, g.in_w);
      const bool i10 = inside(k.y0 + 1, k.x0, g.in_h, g.in_w);
      const bool i11 = inside(k.y0 + 1, k.x0 + 1, g.in_h, g.in_w);
      const long base = k.y0 * static_cast<long>(g.in_w) + k.x0;
      T du = 0, dv = 0;
      for (std::size_t c = 0; c < g.channels; ++c) {
        const T d = dout[c * out_plane + q];
        if (want_dx) {
          T* p = dimg + c * in_plane;
          if (i00) p[base] += d * k.wy0 * k.wx0;
          if (i01) p[base + 1] += d * k.wy0 * k.wx1;
          if (i10) p[base + g.in_w] += d * k.wy1 * k.wx0;
          if (i11) p[base + g.in_w + 1] += d * k.wy1 * k.wx1;
        }
        if (want_dgrid) {
          const T* p = img + c * in_plane;
          const T v00 = i00 ? p[base] : T(0);
          const T v01 = i01 ? p[base + 1] : T(0);
          const T v10 = i10 ? p[base + g.in_w] : T(0);
          const T v11 = i11 ? p[base + g.in_w + 1] : T(0);
          du += d * (k.wy0 * (v01 - v00) + k.wy1 * (v11 - v10));
          dv += d * (k.wx0 * (v10 - v00) + k.wx1 * (v11 - v01));
        }
      }
      if (want_dgrid) {
        dgn[2 * q] += du * sx;
        dgn[2 * q + 1] += dv * sy;
      }
    }
  }
}

STDN_INSTANTIATE(float)
STDN_INSTANTIATE(double)

}  // namespace stdn::kernels
