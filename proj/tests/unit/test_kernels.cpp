#include <doctest.h>
#include <omp.h>

#include "oracles.hpp"
#include "stdn/kernels.hpp"

using namespace stdn;
namespace k = stdn::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

double diff(const std::vector<double>& a, const std::vector<double>& b) {
  return oracle::max_abs_diff<double>(a, b);
}

struct ThreadScope {
  int saved = omp_get_max_threads();
  explicit ThreadScope(int n) { omp_set_num_threads(n); }
  ~ThreadScope() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("parallel conv kernels agree with the serial reference") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    k::ConvGeometry g;
    g.batch = 1 + rng.next_u64() % 4;
    g.in_channels = 1 + rng.next_u64() % 5;
    g.out_channels = 1 + rng.next_u64() % 6;
    g.kernel_h = g.kernel_w = trial % 3 == 0 ? 1 : 3;
    g.stride = 1 + rng.next_u64() % 2;
    g.pad = g.kernel_h == 3 ? rng.next_u64() % 2 : 0;
    g.in_h = 3 + rng.next_u64() % 7;
    g.in_w = 3 + rng.next_u64() % 7;
    const std::size_t xs = g.batch * g.in_channels * g.in_h * g.in_w;
    const std::size_t ks = g.out_channels * g.patch_size();
    const std::size_t ys = g.batch * g.out_channels * g.out_h() * g.out_w();
    auto x = rand_vec(xs, rng), kk = rand_vec(ks, rng), b = rand_vec(g.out_channels, rng), dy = rand_vec(ys, rng);

    std::vector<double> y1(ys), y2(ys), dx1(xs), dx2(xs), dk1(ks), dk2(ks), db1(g.out_channels), db2(g.out_channels);
    k::reference::conv2d_forward<double>(g, x, kk, b, y1);
    k::conv2d_forward<double>(g, x, kk, b, y2);
    CHECK(diff(y1, y2) < 1e-12);
    k::reference::conv2d_backward_input<double>(g, dy, kk, dx1);
    k::conv2d_backward_input<double>(g, dy, kk, dx2);
    CHECK(diff(dx1, dx2) < 1e-12);
    k::reference::conv2d_backward_params<double>(g, x, dy, dk1, db1);
    k::conv2d_backward_params<double>(g, x, dy, dk2, db2);
    CHECK(diff(dk1, dk2) < 1e-12);
    CHECK(diff(db1, db2) < 1e-12);
  }
}

TEST_CASE("parallel pooling and sampling kernels agree with the serial reference") {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    k::PlaneGeometry p{1 + rng.next_u64() % 3, 1 + rng.next_u64() % 4, 2 * (1 + rng.next_u64() % 4),
                       2 * (1 + rng.next_u64() % 4)};
    const std::size_t xs = p.batch * p.channels * p.h * p.w, ys = xs / 4;
    auto x = rand_vec(xs, rng), dy = rand_vec(ys, rng);
    std::vector<double> a(ys), b(ys), da(xs), db(xs);
    k::reference::maxpool2x2_forward<double>(p, x, a);
    k::maxpool2x2_forward<double>(p, x, b);
    CHECK(a == b);
    k::reference::maxpool2x2_backward<double>(p, x, dy, da);
    k::maxpool2x2_backward<double>(p, x, dy, db);
    CHECK(da == db);
    k::reference::avgpool2x2_forward<double>(p, x, a);
    k::avgpool2x2_forward<double>(p, x, b);
    CHECK(diff(a, b) < 1e-15);
    std::fill(da.begin(), da.end(), 0.0);
    std::fill(db.begin(), db.end(), 0.0);
    k::reference::avgpool2x2_backward<double>(p, dy, da);
    k::avgpool2x2_backward<double>(p, dy, db);
    CHECK(diff(da, db) < 1e-15);

    k::SampleGeometry s{1 + rng.next_u64() % 3, 1 + rng.next_u64() % 3, 1 + rng.next_u64() % 7,
                        1 + rng.next_u64() % 7, 1 + rng.next_u64() % 6, 1 + rng.next_u64() % 6};
    const std::size_t in = s.batch * s.channels * s.in_h * s.in_w, out = s.batch * s.channels * s.out_h * s.out_w;
    auto img = rand_vec(in, rng), dout = rand_vec(out, rng);
    std::vector<double> grid(s.batch * s.out_h * s.out_w * 2);
    for (auto& v : grid) v = rng.uniform(-1.6, 1.6);
    std::vector<double> o1(out), o2(out), gx1(in), gx2(in), gg1(grid.size()), gg2(grid.size());
    k::reference::bilinear_forward<double>(s, img, grid, o1);
    k::bilinear_forward<double>(s, img, grid, o2);
    CHECK(diff(o1, o2) < 1e-14);
    k::reference::bilinear_backward<double>(s, img, grid, dout, gx1, gg1);
    k::bilinear_backward<double>(s, img, grid, dout, gx2, gg2);
    CHECK(diff(gx1, gx2) < 1e-14);
    CHECK(diff(gg1, gg2) < 1e-13);
  }
}

TEST_CASE("parallel kernels give bit-identical results for any thread count") {
  Rng rng(23);
  k::ConvGeometry g;
  g.batch = 7;
  g.in_channels = 5;
  g.out_channels = 6;
  g.kernel_h = g.kernel_w = 3;
  g.pad = 1;
  g.in_h = g.in_w = 8;
  const std::size_t xs = g.batch * g.in_channels * 64, ks = g.out_channels * g.patch_size(), ys = g.batch * 6 * 64;
  auto x = rand_vec(xs, rng), kk = rand_vec(ks, rng), b = rand_vec(6, rng), dy = rand_vec(ys, rng);
  auto run = [&](int threads) {
    ThreadScope scope(threads);
    std::vector<double> y(ys), dx(xs), dk(ks), db(6);
    k::conv2d_forward<double>(g, x, kk, b, y);
    k::conv2d_backward_input<double>(g, dy, kk, dx);
    k::conv2d_backward_params<double>(g, x, dy, dk, db);
    y.insert(y.end(), dx.begin(), dx.end());
    y.insert(y.end(), dk.begin(), dk.end());
    y.insert(y.end(), db.begin(), db.end());
    return y;
  };
  const auto one = run(1);
  CHECK(run(2) == one);
  CHECK(run(3) == one);
  CHECK(run(4) == one);
}
