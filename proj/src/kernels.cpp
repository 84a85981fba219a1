#include "atten/kernels.hpp"

namespace atten::kern {

namespace {
bool g_parallel = true;
}

bool parallel_enabled() { return g_parallel; }
void set_parallel_enabled(bool enabled) { g_parallel = enabled; }

#define ATTEN_DISPATCH(fn, ...) \
  if (g_parallel)               \
    par::fn(__VA_ARGS__);       \
  else                          \
    serial::fn(__VA_ARGS__)

void unary_ew(Unary op, const double* x, double* y, std::size_t n) {
  ATTEN_DISPATCH(unary_ew, op, x, y, n);
}

void unary_ew_backward(Unary op, const double* x, const double* y,
                       const double* gy, double* gx, std::size_t n) {
  ATTEN_DISPATCH(unary_ew_backward, op, x, y, gy, gx, n);
}

void scale(const double* x, double c, double* y, std::size_t n) {
  ATTEN_DISPATCH(scale, x, c, y, n);
}

void axpy(double c, const double* x, double* y, std::size_t n) {
  ATTEN_DISPATCH(axpy, c, x, y, n);
}

void clamp_min(const double* x, double floor_v, double* y, std::size_t n) {
  ATTEN_DISPATCH(clamp_min, x, floor_v, y, n);
}

void clamp_min_backward(const double* x, double floor_v, const double* gy,
                        double* gx, std::size_t n) {
  ATTEN_DISPATCH(clamp_min_backward, x, floor_v, gy, gx, n);
}

void binary_bcast(Binary op, const Shape& out, const Shape& a, const Shape& b,
                  const double* A, const double* B, double* O) {
  ATTEN_DISPATCH(binary_bcast, op, out, a, b, A, B, O);
}

void reduce_to(const Shape& src, const Shape& dst, double factor, const double* S,
               double* D) {
  ATTEN_DISPATCH(reduce_to, src, dst, factor, S, D);
}

void reduce(Reduce mode, const Shape& in, const bool* reduced_axis,
            const double* x, double* y, std::size_t* argmax) {
  ATTEN_DISPATCH(reduce, mode, in, reduced_axis, x, y, argmax);
}

void reduce_backward_spread(const Shape& in, const bool* reduced_axis,
                            double factor, const double* gy, double* gx) {
  ATTEN_DISPATCH(reduce_backward_spread, in, reduced_axis, factor, gy, gx);
}

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  ATTEN_DISPATCH(matmul, a, b, c, m, k, n);
}

void matmul_acc_nt(const double* g, const double* b, double* ga, std::size_t m,
                   std::size_t k, std::size_t n) {
  ATTEN_DISPATCH(matmul_acc_nt, g, b, ga, m, k, n);
}

void matmul_acc_tn(const double* a, const double* g, double* gb, std::size_t m,
                   std::size_t k, std::size_t n) {
  ATTEN_DISPATCH(matmul_acc_tn, a, g, gb, m, k, n);
}

void conv2d(const double* x, const double* w, double* y, std::size_t cin,
            std::size_t h, std::size_t wd, std::size_t cout, std::size_t kh,
            std::size_t kw, std::size_t pad) {
  ATTEN_DISPATCH(conv2d, x, w, y, cin, h, wd, cout, kh, kw, pad);
}

void conv2d_backward_input(const double* gy, const double* w, double* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t kh, std::size_t kw,
                           std::size_t pad) {
  ATTEN_DISPATCH(conv2d_backward_input, gy, w, gx, cin, h, wd, cout, kh, kw, pad);
}

void conv2d_backward_kernel(const double* gy, const double* x, double* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t kh, std::size_t kw,
                            std::size_t pad) {
  ATTEN_DISPATCH(conv2d_backward_kernel, gy, x, gw, cin, h, wd, cout, kh, kw, pad);
}

void pool2d_max(const double* x, double* y, std::size_t* argmax, std::size_t c,
                std::size_t h, std::size_t w, std::size_t win) {
  ATTEN_DISPATCH(pool2d_max, x, y, argmax, c, h, w, win);
}

void pool2d_avg(const double* x, double* y, std::size_t c, std::size_t h,
                std::size_t w, std::size_t win) {
  ATTEN_DISPATCH(pool2d_avg, x, y, c, h, w, win);
}

void pool2d_max_backward(const double* gy, const std::size_t* argmax, double* gx,
                         std::size_t n_out) {
  ATTEN_DISPATCH(pool2d_max_backward, gy, argmax, gx, n_out);
}

void pool2d_avg_backward(const double* gy, double* gx, std::size_t c,
                         std::size_t h, std::size_t w, std::size_t win) {
  ATTEN_DISPATCH(pool2d_avg_backward, gy, gx, c, h, w, win);
}

void pairwise_sqdist(const double* x, double* d, std::size_t b, std::size_t dim) {
  ATTEN_DISPATCH(pairwise_sqdist, x, d, b, dim);
}

void pairwise_sqdist_backward(const double* x, const double* gd, double* gx,
                              std::size_t b, std::size_t dim) {
  ATTEN_DISPATCH(pairwise_sqdist_backward, x, gd, gx, b, dim);
}

#undef ATTEN_DISPATCH

}  // namespace atten::kern
