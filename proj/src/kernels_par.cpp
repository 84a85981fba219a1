// OpenMP kernels. Parallelism is always across independent output elements
// and every element keeps the reference implementation's inner summation
// order, so results are bitwise identical to kern::serial for any thread
// count. Gradient kernels are written in gather form (one writer per cell)
// rather than scatter form to stay race-free without atomics.

#include "kernels_common.hpp"

namespace atten::kern::par {

using detail::apply_binary;
using detail::apply_unary;
using detail::bcast_strides;
using detail::decode_offset;
using detail::tails_of;
using detail::unary_grad;

namespace {
// below this many output elements the fork/join overhead dominates
constexpr std::ptrdiff_t kGrain = 4096;
}  // namespace

using index_t = std::ptrdiff_t;

void unary_ew(Unary op, const double* x, double* y, std::size_t n) {
  const index_t total = static_cast<index_t>(n);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) y[i] = apply_unary(op, x[i]);
}

void unary_ew_backward(Unary op, const double* x, const double* y,
                       const double* gy, double* gx, std::size_t n) {
  const index_t total = static_cast<index_t>(n);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) gx[i] += unary_grad(op, x[i], y[i], gy[i]);
}

void scale(const double* x, double c, double* y, std::size_t n) {
  const index_t total = static_cast<index_t>(n);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) y[i] = c * x[i];
}

void axpy(double c, const double* x, double* y, std::size_t n) {
  const index_t total = static_cast<index_t>(n);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) y[i] += c * x[i];
}

void clamp_min(const double* x, double floor_v, double* y, std::size_t n) {
  const index_t total = static_cast<index_t>(n);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) y[i] = x[i] >= floor_v ? x[i] : floor_v;
}

void clamp_min_backward(const double* x, double floor_v, const double* gy,
                        double* gx, std::size_t n) {
  const index_t total = static_cast<index_t>(n);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) {
    if (x[i] >= floor_v) gx[i] += gy[i];
  }
}

void binary_bcast(Binary op, const Shape& out, const Shape& a, const Shape& b,
                  const double* A, const double* B, double* O) {
  const index_t total = static_cast<index_t>(out.size());
  bool plain = true;
  for (std::size_t i = 0; i < out.rank; ++i) {
    plain = plain && a.dims[i] == out.dims[i] && b.dims[i] == out.dims[i];
  }
  if (plain) {
#pragma omp parallel for if (total > kGrain) schedule(static)
    for (index_t i = 0; i < total; ++i) O[i] = apply_binary(op, A[i], B[i]);
    return;
  }
  std::size_t as[kMaxRank], bs[kMaxRank], tails[kMaxRank];
  bcast_strides(out, a, as);
  bcast_strides(out, b, bs);
  tails_of(out, tails);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) {
    const std::size_t ai = decode_offset(static_cast<std::size_t>(i), out, tails, as);
    const std::size_t bi = decode_offset(static_cast<std::size_t>(i), out, tails, bs);
    O[i] = apply_binary(op, A[ai], B[bi]);
  }
}

void reduce_to(const Shape& src, const Shape& dst, double factor, const double* S,
               double* D) {
  // parallel over destination cells; each scans its collapsed preimage in
  // row-major source order (the order the serial version deposits in)
  std::size_t src_strides[kMaxRank];
  tails_of(src, src_strides);

  std::size_t kept[kMaxRank], red[kMaxRank];
  std::size_t n_kept = 0, n_red = 0;
  for (std::size_t ax = 0; ax < src.rank; ++ax) {
    if (dst.dims[ax] == 1 && src.dims[ax] != 1)
      red[n_red++] = ax;
    else
      kept[n_kept++] = ax;
  }
  index_t out_total = 1;
  std::size_t red_total = 1;
  for (std::size_t i = 0; i < n_kept; ++i) out_total *= static_cast<index_t>(src.dims[kept[i]]);
  for (std::size_t i = 0; i < n_red; ++i) red_total *= src.dims[red[i]];

#pragma omp parallel for if (out_total* static_cast<index_t>(red_total) > kGrain) schedule(static)
  for (index_t o = 0; o < out_total; ++o) {
    std::size_t base = 0;
    std::size_t rem = static_cast<std::size_t>(o);
    for (std::size_t i = 0; i < n_kept; ++i) {
      std::size_t block = 1;
      for (std::size_t j = i + 1; j < n_kept; ++j) block *= src.dims[kept[j]];
      const std::size_t c = rem / block;
      rem -= c * block;
      base += c * src_strides[kept[i]];
    }
    double acc = D[o];
    std::size_t coord[kMaxRank] = {0, 0, 0, 0, 0, 0};
    std::size_t off = 0;
    for (std::size_t r = 0; r < red_total; ++r) {
      acc += factor * S[base + off];
      for (std::size_t i = n_red; i-- > 0;) {
        const std::size_t ax = red[i];
        if (++coord[i] < src.dims[ax]) {
          off += src_strides[ax];
          break;
        }
        coord[i] = 0;
        off -= src_strides[ax] * (src.dims[ax] - 1);
      }
    }
    D[o] = acc;
  }
}

void reduce(Reduce mode, const Shape& in, const bool* reduced_axis,
            const double* x, double* y, std::size_t* argmax) {
  std::size_t in_strides[kMaxRank];
  tails_of(in, in_strides);

  std::size_t kept[kMaxRank], red[kMaxRank];
  std::size_t n_kept = 0, n_red = 0;
  for (std::size_t ax = 0; ax < in.rank; ++ax) {
    if (reduced_axis[ax])
      red[n_red++] = ax;
    else
      kept[n_kept++] = ax;
  }
  index_t out_total = 1;
  std::size_t red_total = 1;
  for (std::size_t i = 0; i < n_kept; ++i) out_total *= static_cast<index_t>(in.dims[kept[i]]);
  for (std::size_t i = 0; i < n_red; ++i) red_total *= in.dims[red[i]];

#pragma omp parallel for if (out_total* static_cast<index_t>(red_total) > kGrain) schedule(static)
  for (index_t o = 0; o < out_total; ++o) {
    std::size_t base = 0;
    std::size_t rem = static_cast<std::size_t>(o);
    for (std::size_t i = 0; i < n_kept; ++i) {
      std::size_t block = 1;
      for (std::size_t j = i + 1; j < n_kept; ++j) block *= in.dims[kept[j]];
      const std::size_t c = rem / block;
      rem -= c * block;
      base += c * in_strides[kept[i]];
    }
    double acc = 0.0;
    std::size_t best = 0;
    std::size_t coord[kMaxRank] = {0, 0, 0, 0, 0, 0};
    std::size_t off = 0;
    for (std::size_t r = 0; r < red_total; ++r) {
      const double v = x[base + off];
      if (mode == Reduce::Max) {
        if (r == 0 || v > acc) {
          acc = v;
          best = base + off;
        }
      } else {
        acc += v;
      }
      for (std::size_t i = n_red; i-- > 0;) {
        const std::size_t ax = red[i];
        if (++coord[i] < in.dims[ax]) {
          off += in_strides[ax];
          break;
        }
        coord[i] = 0;
        off -= in_strides[ax] * (in.dims[ax] - 1);
      }
    }
    if (mode == Reduce::Mean) acc = acc / static_cast<double>(red_total);
    y[o] = acc;
    if (mode == Reduce::Max && argmax) argmax[o] = best;
  }
}

void reduce_backward_spread(const Shape& in, const bool* reduced_axis,
                            double factor, const double* gy, double* gx) {
  std::size_t out_stride[kMaxRank], tails[kMaxRank];
  std::size_t s = 1;
  for (std::size_t i = in.rank; i-- > 0;) {
    if (!reduced_axis[i]) {
      out_stride[i] = s;
      s *= in.dims[i];
    } else {
      out_stride[i] = 0;
    }
  }
  tails_of(in, tails);
  const index_t total = static_cast<index_t>(in.size());
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) {
    gx[i] += factor * gy[decode_offset(static_cast<std::size_t>(i), in, tails, out_stride)];
  }
}

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  const index_t rows = static_cast<index_t>(m);
#pragma omp parallel for if (rows * static_cast<index_t>(k* n) > kGrain) schedule(static)
  for (index_t i = 0; i < rows; ++i) {
    double* crow = c + i * static_cast<index_t>(n);
    for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = a[static_cast<std::size_t>(i) * k + l];
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_acc_nt(const double* g, const double* b, double* ga, std::size_t m,
                   std::size_t k, std::size_t n) {
  const index_t rows = static_cast<index_t>(m);
#pragma omp parallel for if (rows * static_cast<index_t>(k* n) > kGrain) schedule(static)
  for (index_t i = 0; i < rows; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += g[static_cast<std::size_t>(i) * n + j] * b[l * n + j];
      ga[static_cast<std::size_t>(i) * k + l] += acc;
    }
  }
}

void matmul_acc_tn(const double* a, const double* g, double* gb, std::size_t m,
                   std::size_t k, std::size_t n) {
  const index_t rows = static_cast<index_t>(k);
#pragma omp parallel for if (rows * static_cast<index_t>(m* n) > kGrain) schedule(static)
  for (index_t l = 0; l < rows; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        acc += a[i * k + static_cast<std::size_t>(l)] * g[i * n + j];
      gb[static_cast<std::size_t>(l) * n + j] += acc;
    }
  }
}

void conv2d(const double* x, const double* w, double* y, std::size_t cin,
            std::size_t h, std::size_t wd, std::size_t cout, std::size_t kh,
            std::size_t kw, std::size_t pad) {
  const std::size_t oh = h + 2 * pad - kh + 1;
  const std::size_t ow = wd + 2 * pad - kw + 1;
  const index_t planes = static_cast<index_t>(cout * oh);
#pragma omp parallel for if (planes * static_cast<index_t>(ow* cin* kh* kw) > kGrain) schedule(static)
  for (index_t p = 0; p < planes; ++p) {
    const std::size_t co = static_cast<std::size_t>(p) / oh;
    const std::size_t oy = static_cast<std::size_t>(p) % oh;
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
            acc += x[(ci * h + iy) * wd + ix] * w[((co * cin + ci) * kh + ky) * kw + kx];
          }
        }
      }
      y[(co * oh + oy) * ow + ox] = acc;
    }
  }
}

void conv2d_backward_input(const double* gy, const double* w, double* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t kh, std::size_t kw,
                           std::size_t pad) {
  const std::size_t oh = h + 2 * pad - kh + 1;
  const std::size_t ow = wd + 2 * pad - kw + 1;
  const index_t planes = static_cast<index_t>(cin * h);
#pragma omp parallel for if (planes * static_cast<index_t>(wd* cout* kh* kw) > kGrain) schedule(static)
  for (index_t p = 0; p < planes; ++p) {
    const std::size_t ci = static_cast<std::size_t>(p) / h;
    const std::size_t iy = static_cast<std::size_t>(p) % h;
    for (std::size_t ix = 0; ix < wd; ++ix) {
      double acc = 0.0;
      for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t oy =
              static_cast<std::ptrdiff_t>(iy + pad) - static_cast<std::ptrdiff_t>(ky);
          if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(oh)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t ox =
                static_cast<std::ptrdiff_t>(ix + pad) - static_cast<std::ptrdiff_t>(kx);
            if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(ow)) continue;
            acc += gy[(co * oh + oy) * ow + ox] * w[((co * cin + ci) * kh + ky) * kw + kx];
          }
        }
      }
      gx[(ci * h + iy) * wd + ix] += acc;
    }
  }
}

void conv2d_backward_kernel(const double* gy, const double* x, double* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t kh, std::size_t kw,
                            std::size_t pad) {
  const std::size_t oh = h + 2 * pad - kh + 1;
  const std::size_t ow = wd + 2 * pad - kw + 1;
  const index_t cells = static_cast<index_t>(cout * cin * kh * kw);
#pragma omp parallel for if (cells * static_cast<index_t>(oh* ow) > kGrain) schedule(static)
  for (index_t cell = 0; cell < cells; ++cell) {
    std::size_t rest = static_cast<std::size_t>(cell);
    const std::size_t kx = rest % kw;
    rest /= kw;
    const std::size_t ky = rest % kh;
    rest /= kh;
    const std::size_t ci = rest % cin;
    const std::size_t co = rest / cin;
    double acc = 0.0;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::ptrdiff_t iy =
          static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::ptrdiff_t ix =
            static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
        acc += gy[(co * oh + oy) * ow + ox] * x[(ci * h + iy) * wd + ix];
      }
    }
    gw[static_cast<std::size_t>(cell)] += acc;
  }
}

void pool2d_max(const double* x, double* y, std::size_t* argmax, std::size_t c,
                std::size_t h, std::size_t w, std::size_t win) {
  const std::size_t oh = h / win, ow = w / win;
  const index_t cells = static_cast<index_t>(c * oh * ow);
#pragma omp parallel for if (cells * static_cast<index_t>(win* win) > kGrain) schedule(static)
  for (index_t o = 0; o < cells; ++o) {
    std::size_t rest = static_cast<std::size_t>(o);
    const std::size_t ox = rest % ow;
    rest /= ow;
    const std::size_t oy = rest % oh;
    const std::size_t ch = rest / oh;
    double best = 0.0;
    std::size_t best_idx = 0;
    bool first = true;
    for (std::size_t dy = 0; dy < win; ++dy) {
      for (std::size_t dx = 0; dx < win; ++dx) {
        const std::size_t idx = (ch * h + oy * win + dy) * w + ox * win + dx;
        if (first || x[idx] > best) {
          best = x[idx];
          best_idx = idx;
          first = false;
        }
      }
    }
    y[o] = best;
    if (argmax) argmax[o] = best_idx;
  }
}

void pool2d_avg(const double* x, double* y, std::size_t c, std::size_t h,
                std::size_t w, std::size_t win) {
  const std::size_t oh = h / win, ow = w / win;
  const double denom = static_cast<double>(win * win);
  const index_t cells = static_cast<index_t>(c * oh * ow);
#pragma omp parallel for if (cells * static_cast<index_t>(win* win) > kGrain) schedule(static)
  for (index_t o = 0; o < cells; ++o) {
    std::size_t rest = static_cast<std::size_t>(o);
    const std::size_t ox = rest % ow;
    rest /= ow;
    const std::size_t oy = rest % oh;
    const std::size_t ch = rest / oh;
    double acc = 0.0;
    for (std::size_t dy = 0; dy < win; ++dy) {
      for (std::size_t dx = 0; dx < win; ++dx) {
        acc += x[(ch * h + oy * win + dy) * w + ox * win + dx];
      }
    }
    y[o] = acc / denom;
  }
}

void pool2d_max_backward(const double* gy, const std::size_t* argmax, double* gx,
                         std::size_t n_out) {
  const index_t total = static_cast<index_t>(n_out);
  // disjoint windows: each argmax target is written by exactly one output cell
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t o = 0; o < total; ++o) gx[argmax[o]] += gy[o];
}

void pool2d_avg_backward(const double* gy, double* gx, std::size_t c,
                         std::size_t h, std::size_t w, std::size_t win) {
  const std::size_t oh = h / win, ow = w / win;
  const double denom = static_cast<double>(win * win);
  const index_t total = static_cast<index_t>(c * h * w);
#pragma omp parallel for if (total > kGrain) schedule(static)
  for (index_t i = 0; i < total; ++i) {
    std::size_t rest = static_cast<std::size_t>(i);
    const std::size_t ix = rest % w;
    rest /= w;
    const std::size_t iy = rest % h;
    const std::size_t ch = rest / h;
    gx[i] += gy[(ch * oh + iy / win) * ow + ix / win] / denom;
  }
}

void pairwise_sqdist(const double* x, double* d, std::size_t b, std::size_t dim) {
  const index_t rows = static_cast<index_t>(b);
#pragma omp parallel for if (rows * rows * static_cast<index_t>(dim) > kGrain) schedule(static)
  for (index_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        const double diff = x[static_cast<std::size_t>(i) * dim + t] - x[j * dim + t];
        acc += diff * diff;
      }
      d[static_cast<std::size_t>(i) * b + j] = acc;
    }
  }
}

void pairwise_sqdist_backward(const double* x, const double* gd, double* gx,
                              std::size_t b, std::size_t dim) {
  const index_t rows = static_cast<index_t>(b);
#pragma omp parallel for if (rows * rows * static_cast<index_t>(dim) > kGrain) schedule(static)
  for (index_t i = 0; i < rows; ++i) {
    for (std::size_t t = 0; t < dim; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < b; ++j) {
        const double diff = x[static_cast<std::size_t>(i) * dim + t] - x[j * dim + t];
        acc += 2.0 * diff * (gd[static_cast<std::size_t>(i) * b + j] +
                             gd[j * b + static_cast<std::size_t>(i)]);
      }
      gx[static_cast<std::size_t>(i) * dim + t] += acc;
    }
  }
}

}  // namespace atten::kern::par
