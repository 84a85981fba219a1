#pragma once

#include <cstddef>
#include <cstdint>

namespace atten::kern {

// Shapes enter the kernels as plain arrays so both implementations stay
// self-contained. Rank is capped; the graph layer validates before calling.
inline constexpr std::size_t kMaxRank = 6;

struct Shape {
  std::size_t dims[kMaxRank] = {1, 1, 1, 1, 1, 1};
  std::size_t rank = 0;

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < rank; ++i) n *= dims[i];
    return n;
  }
};

enum class Unary { Neg, Exp, Log, Relu, Sigmoid };
enum class Binary { Add, Sub, Mul, Div };
enum class Reduce { Sum, Mean, Max };

// Every kernel exists twice: kern::serial is the plain-loop reference used by
// the parity tests and the benchmark baseline; kern::par is the OpenMP
// version used by default. Both produce bitwise-identical output: each output
// element is computed by exactly one thread with the same inner loop order.
//
// All *_backward kernels ACCUMULATE into the gradient buffer.

#define ATTEN_KERNEL_DECLS                                                         \
  void unary_ew(Unary op, const double* x, double* y, std::size_t n);              \
  void unary_ew_backward(Unary op, const double* x, const double* y,               \
                         const double* gy, double* gx, std::size_t n);             \
  void scale(const double* x, double c, double* y, std::size_t n);                 \
  void axpy(double c, const double* x, double* y, std::size_t n);                  \
  void clamp_min(const double* x, double floor_v, double* y, std::size_t n);       \
  void clamp_min_backward(const double* x, double floor_v, const double* gy,       \
                          double* gx, std::size_t n);                              \
  void binary_bcast(Binary op, const Shape& out, const Shape& a, const Shape& b,   \
                    const double* A, const double* B, double* O);                  \
  void reduce_to(const Shape& src, const Shape& dst, double factor,                \
                 const double* S, double* D);                                      \
  void reduce(Reduce mode, const Shape& in, const bool* reduced_axis,              \
              const double* x, double* y, std::size_t* argmax);                    \
  void reduce_backward_spread(const Shape& in, const bool* reduced_axis,           \
                              double factor, const double* gy, double* gx);        \
  void matmul(const double* a, const double* b, double* c, std::size_t m,          \
              std::size_t k, std::size_t n);                                       \
  void matmul_acc_nt(const double* g, const double* b, double* ga, std::size_t m,  \
                     std::size_t k, std::size_t n);                                \
  void matmul_acc_tn(const double* a, const double* g, double* gb, std::size_t m,  \
                     std::size_t k, std::size_t n);                                \
  void conv2d(const double* x, const double* w, double* y, std::size_t cin,        \
              std::size_t h, std::size_t wd, std::size_t cout, std::size_t kh,     \
              std::size_t kw, std::size_t pad);                                    \
  void conv2d_backward_input(const double* gy, const double* w, double* gx,        \
                             std::size_t cin, std::size_t h, std::size_t wd,       \
                             std::size_t cout, std::size_t kh, std::size_t kw,     \
                             std::size_t pad);                                     \
  void conv2d_backward_kernel(const double* gy, const double* x, double* gw,       \
                              std::size_t cin, std::size_t h, std::size_t wd,      \
                              std::size_t cout, std::size_t kh, std::size_t kw,    \
                              std::size_t pad);                                    \
  void pool2d_max(const double* x, double* y, std::size_t* argmax, std::size_t c,  \
                  std::size_t h, std::size_t w, std::size_t win);                  \
  void pool2d_avg(const double* x, double* y, std::size_t c, std::size_t h,        \
                  std::size_t w, std::size_t win);                                 \
  void pool2d_max_backward(const double* gy, const std::size_t* argmax,            \
                           double* gx, std::size_t n_out);                         \
  void pool2d_avg_backward(const double* gy, double* gx, std::size_t c,            \
                           std::size_t h, std::size_t w, std::size_t win);         \
  void pairwise_sqdist(const double* x, double* d, std::size_t b, std::size_t dim);\
  void pairwise_sqdist_backward(const double* x, const double* gd, double* gx,     \
                                std::size_t b, std::size_t dim);

namespace serial {
ATTEN_KERNEL_DECLS
}
namespace par {
ATTEN_KERNEL_DECLS
}

// Dispatching entry points (default: parallel). set_parallel_enabled(false)
// forces the serial reference everywhere; tests and the benchmark flip it.
bool parallel_enabled();
void set_parallel_enabled(bool enabled);

ATTEN_KERNEL_DECLS

#undef ATTEN_KERNEL_DECLS

}  // namespace atten::kern
