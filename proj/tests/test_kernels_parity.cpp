// Bitwise parity between the serial reference kernels and the OpenMP
// variants on randomized shapes, including the accumulate-style backward
// kernels with pre-filled gradient buffers.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <vector>

#include "atten/kernels.hpp"
#include "atten/rng.hpp"

using namespace atten;
using kern::Shape;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.next_double();
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Shape shape_of(std::initializer_list<std::size_t> dims) {
  Shape s;
  s.rank = dims.size();
  std::size_t i = 0;
  for (const std::size_t d : dims) s.dims[i++] = d;
  return s;
}

}  // namespace

TEST_CASE("unary kernels") {
  Rng rng(1);
  for (const auto op : {kern::Unary::Neg, kern::Unary::Exp, kern::Unary::Relu,
                        kern::Unary::Sigmoid}) {
    const std::size_t n = 1 + rng.next_below(9000);
    const auto x = random_vec(rng, n);
    std::vector<double> y1(n), y2(n);
    kern::serial::unary_ew(op, x.data(), y1.data(), n);
    kern::par::unary_ew(op, x.data(), y2.data(), n);
    CHECK(same_bits(y1, y2));

    const auto gy = random_vec(rng, n);
    auto g1 = random_vec(rng, n);
    auto g2 = g1;
    kern::serial::unary_ew_backward(op, x.data(), y1.data(), gy.data(), g1.data(), n);
    kern::par::unary_ew_backward(op, x.data(), y2.data(), gy.data(), g2.data(), n);
    CHECK(same_bits(g1, g2));
  }
  // log needs positive input
  const std::size_t n = 5000;
  const auto x = random_vec(rng, n, 0.1, 3.0);
  std::vector<double> y1(n), y2(n);
  kern::serial::unary_ew(kern::Unary::Log, x.data(), y1.data(), n);
  kern::par::unary_ew(kern::Unary::Log, x.data(), y2.data(), n);
  CHECK(same_bits(y1, y2));
}

TEST_CASE("broadcast binary kernels") {
  Rng rng(2);
  const Shape out = shape_of({5, 33, 41});
  const Shape a = shape_of({5, 1, 41});
  const Shape b = shape_of({1, 33, 1});
  const auto A = random_vec(rng, a.size());
  const auto B = random_vec(rng, b.size(), 0.5, 2.0);
  for (const auto op :
       {kern::Binary::Add, kern::Binary::Sub, kern::Binary::Mul, kern::Binary::Div}) {
    std::vector<double> o1(out.size()), o2(out.size());
    kern::serial::binary_bcast(op, out, a, b, A.data(), B.data(), o1.data());
    kern::par::binary_bcast(op, out, a, b, A.data(), B.data(), o2.data());
    CHECK(same_bits(o1, o2));
  }
}

TEST_CASE("reduce kernels") {
  Rng rng(3);
  const Shape in = shape_of({7, 19, 23});
  const auto x = random_vec(rng, in.size());
  const bool cases[3][3] = {{true, false, false}, {false, true, true}, {true, true, true}};
  for (const auto& flags : cases) {
    std::size_t out_n = 1;
    for (int i = 0; i < 3; ++i) {
      if (!flags[i]) out_n *= in.dims[i];
    }
    for (const auto mode : {kern::Reduce::Sum, kern::Reduce::Mean, kern::Reduce::Max}) {
      std::vector<double> y1(out_n), y2(out_n);
      std::vector<std::size_t> am1(out_n), am2(out_n);
      kern::serial::reduce(mode, in, flags, x.data(), y1.data(), am1.data());
      kern::par::reduce(mode, in, flags, x.data(), y2.data(), am2.data());
      CHECK(same_bits(y1, y2));
      if (mode == kern::Reduce::Max) CHECK(am1 == am2);
    }
    // spread backward
    const auto gy = random_vec(rng, out_n);
    auto g1 = random_vec(rng, in.size());
    auto g2 = g1;
    kern::serial::reduce_backward_spread(in, flags, 0.25, gy.data(), g1.data());
    kern::par::reduce_backward_spread(in, flags, 0.25, gy.data(), g2.data());
    CHECK(same_bits(g1, g2));
  }
}

TEST_CASE("reduce_to kernel") {
  Rng rng(4);
  const Shape src = shape_of({6, 17, 29});
  const Shape dst = shape_of({6, 1, 29});
  const auto s = random_vec(rng, src.size());
  auto d1 = random_vec(rng, dst.size());
  auto d2 = d1;
  kern::serial::reduce_to(src, dst, -1.5, s.data(), d1.data());
  kern::par::reduce_to(src, dst, -1.5, s.data(), d2.data());
  CHECK(same_bits(d1, d2));
}

TEST_CASE("matmul kernels") {
  Rng rng(5);
  const std::size_t m = 37, k = 29, n = 31;
  const auto a = random_vec(rng, m * k);
  const auto b = random_vec(rng, k * n);
  std::vector<double> c1(m * n), c2(m * n);
  kern::serial::matmul(a.data(), b.data(), c1.data(), m, k, n);
  kern::par::matmul(a.data(), b.data(), c2.data(), m, k, n);
  CHECK(same_bits(c1, c2));

  const auto g = random_vec(rng, m * n);
  auto ga1 = random_vec(rng, m * k);
  auto ga2 = ga1;
  kern::serial::matmul_acc_nt(g.data(), b.data(), ga1.data(), m, k, n);
  kern::par::matmul_acc_nt(g.data(), b.data(), ga2.data(), m, k, n);
  CHECK(same_bits(ga1, ga2));

  auto gb1 = random_vec(rng, k * n);
  auto gb2 = gb1;
  kern::serial::matmul_acc_tn(a.data(), g.data(), gb1.data(), m, k, n);
  kern::par::matmul_acc_tn(a.data(), g.data(), gb2.data(), m, k, n);
  CHECK(same_bits(gb1, gb2));
}

TEST_CASE("conv kernels") {
  Rng rng(6);
  const std::size_t cin = 3, h = 17, w = 19, cout = 4, kh = 3, kw = 5, pad = 2;
  const std::size_t oh = h + 2 * pad - kh + 1, ow = w + 2 * pad - kw + 1;
  const auto x = random_vec(rng, cin * h * w);
  const auto wk = random_vec(rng, cout * cin * kh * kw);
  std::vector<double> y1(cout * oh * ow), y2(y1.size());
  kern::serial::conv2d(x.data(), wk.data(), y1.data(), cin, h, w, cout, kh, kw, pad);
  kern::par::conv2d(x.data(), wk.data(), y2.data(), cin, h, w, cout, kh, kw, pad);
  CHECK(same_bits(y1, y2));

  const auto gy = random_vec(rng, y1.size());
  auto gx1 = random_vec(rng, x.size());
  auto gx2 = gx1;
  kern::serial::conv2d_backward_input(gy.data(), wk.data(), gx1.data(), cin, h, w, cout,
                                      kh, kw, pad);
  kern::par::conv2d_backward_input(gy.data(), wk.data(), gx2.data(), cin, h, w, cout, kh,
                                   kw, pad);
  CHECK(same_bits(gx1, gx2));

  auto gw1 = random_vec(rng, wk.size());
  auto gw2 = gw1;
  kern::serial::conv2d_backward_kernel(gy.data(), x.data(), gw1.data(), cin, h, w, cout,
                                       kh, kw, pad);
  kern::par::conv2d_backward_kernel(gy.data(), x.data(), gw2.data(), cin, h, w, cout, kh,
                                    kw, pad);
  CHECK(same_bits(gw1, gw2));
}

TEST_CASE("pool kernels") {
  Rng rng(7);
  const std::size_t c = 5, h = 16, w = 24, win = 4;
  const std::size_t out_n = c * (h / win) * (w / win);
  const auto x = random_vec(rng, c * h * w);

  std::vector<double> y1(out_n), y2(out_n);
  std::vector<std::size_t> am1(out_n), am2(out_n);
  kern::serial::pool2d_max(x.data(), y1.data(), am1.data(), c, h, w, win);
  kern::par::pool2d_max(x.data(), y2.data(), am2.data(), c, h, w, win);
  CHECK(same_bits(y1, y2));
  CHECK(am1 == am2);

  kern::serial::pool2d_avg(x.data(), y1.data(), c, h, w, win);
  kern::par::pool2d_avg(x.data(), y2.data(), c, h, w, win);
  CHECK(same_bits(y1, y2));

  const auto gy = random_vec(rng, out_n);
  auto g1 = random_vec(rng, x.size());
  auto g2 = g1;
  kern::serial::pool2d_max_backward(gy.data(), am1.data(), g1.data(), out_n);
  kern::par::pool2d_max_backward(gy.data(), am2.data(), g2.data(), out_n);
  CHECK(same_bits(g1, g2));

  auto a1 = random_vec(rng, x.size());
  auto a2 = a1;
  kern::serial::pool2d_avg_backward(gy.data(), a1.data(), c, h, w, win);
  kern::par::pool2d_avg_backward(gy.data(), a2.data(), c, h, w, win);
  CHECK(same_bits(a1, a2));
}

TEST_CASE("pairwise sqdist kernels") {
  Rng rng(8);
  const std::size_t b = 33, dim = 47;
  const auto x = random_vec(rng, b * dim);
  std::vector<double> d1(b * b), d2(b * b);
  kern::serial::pairwise_sqdist(x.data(), d1.data(), b, dim);
  kern::par::pairwise_sqdist(x.data(), d2.data(), b, dim);
  CHECK(same_bits(d1, d2));

  const auto gd = random_vec(rng, b * b);
  auto g1 = random_vec(rng, b * dim);
  auto g2 = g1;
  kern::serial::pairwise_sqdist_backward(x.data(), gd.data(), g1.data(), b, dim);
  kern::par::pairwise_sqdist_backward(x.data(), gd.data(), g2.data(), b, dim);
  CHECK(same_bits(g1, g2));
}

TEST_CASE("dispatch honors the parallel switch") {
  CHECK(kern::parallel_enabled());
  kern::set_parallel_enabled(false);
  CHECK_FALSE(kern::parallel_enabled());
  Rng rng(9);
  const auto x = random_vec(rng, 100);
  std::vector<double> y1(100), y2(100);
  kern::unary_ew(kern::Unary::Exp, x.data(), y1.data(), 100);
  kern::set_parallel_enabled(true);
  kern::unary_ew(kern::Unary::Exp, x.data(), y2.data(), 100);
  CHECK(same_bits(y1, y2));
}
