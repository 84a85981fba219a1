// Plain-loop reference kernels. These are the ground truth the OpenMP
// variants are tested against and the baseline the benchmark compares with.

#include "kernels_common.hpp"

namespace atten::kern::serial {

using detail::apply_binary;
using detail::apply_unary;
using detail::bcast_strides;
using detail::decode_offset;
using detail::tails_of;
using detail::unary_grad;

void unary_ew(Unary op, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = apply_unary(op, x[i]);
}

void unary_ew_backward(Unary op, const double* x, const double* y,
                       const double* gy, double* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += unary_grad(op, x[i], y[i], gy[i]);
}

void scale(const double* x, double c, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = c * x[i];
}

void axpy(double c, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += c * x[i];
}

void clamp_min(const double* x, double floor_v, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] >= floor_v ? x[i] : floor_v;
}

void clamp_min_backward(const double* x, double floor_v, const double* gy,
                        double* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] >= floor_v) gx[i] += gy[i];
  }
}

void binary_bcast(Binary op, const Shape& out, const Shape& a, const Shape& b,
                  const double* A, const double* B, double* O) {
  const std::size_t total = out.size();
  bool plain = true;
  for (std::size_t i = 0; i < out.rank; ++i) {
    plain = plain && a.dims[i] == out.dims[i] && b.dims[i] == out.dims[i];
  }
  if (plain) {
    for (std::size_t i = 0; i < total; ++i) O[i] = apply_binary(op, A[i], B[i]);
    return;
  }
  std::size_t as[kMaxRank], bs[kMaxRank], tails[kMaxRank];
  bcast_strides(out, a, as);
  bcast_strides(out, b, bs);
  tails_of(out, tails);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t ai = decode_offset(i, out, tails, as);
    const std::size_t bi = decode_offset(i, out, tails, bs);
    O[i] = apply_binary(op, A[ai], B[bi]);
  }
}

void reduce_to(const Shape& src, const Shape& dst, double factor, const double* S,
               double* D) {
  std::size_t ds[kMaxRank], tails[kMaxRank];
  bcast_strides(src, dst, ds);  // dst strides, 0 on collapsed axes
  tails_of(src, tails);
  const std::size_t total = src.size();
  for (std::size_t i = 0; i < total; ++i) {
    D[decode_offset(i, src, tails, ds)] += factor * S[i];
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
  std::size_t out_total = 1, red_total = 1;
  for (std::size_t i = 0; i < n_kept; ++i) out_total *= in.dims[kept[i]];
  for (std::size_t i = 0; i < n_red; ++i) red_total *= in.dims[red[i]];

  for (std::size_t o = 0; o < out_total; ++o) {
    // base input offset for this output cell
    std::size_t base = 0, rem = o;
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
      for (std::size_t i = n_red; i-- > 0;) {  // row-major odometer
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
  // out strides measured in the input index space, 0 on reduced axes
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
  const std::size_t total = in.size();
  for (std::size_t i = 0; i < total; ++i) {
    gx[i] += factor * gy[decode_offset(i, in, tails, out_stride)];
  }
}

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_acc_nt(const double* g, const double* b, double* ga, std::size_t m,
                   std::size_t k, std::size_t n) {
  // GA[m,k] += G[m,n] * B[k,n]^T
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[l * n + j];
      ga[i * k + l] += acc;
    }
  }
}

void matmul_acc_tn(const double* a, const double* g, double* gb, std::size_t m,
                   std::size_t k, std::size_t n) {
  // GB[k,n] += A[m,k]^T * G[m,n]
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + l] * g[i * n + j];
      gb[l * n + j] += acc;
    }
  }
}

void conv2d(const double* x, const double* w, double* y, std::size_t cin,
            std::size_t h, std::size_t wd, std::size_t cout, std::size_t kh,
            std::size_t kw, std::size_t pad) {
  const std::size_t oh = h + 2 * pad - kh + 1;
  const std::size_t ow = wd + 2 * pad - kw + 1;
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
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
}

void conv2d_backward_input(const double* gy, const double* w, double* gx,
                           std::size_t cin, std::size_t h, std::size_t wd,
                           std::size_t cout, std::size_t kh, std::size_t kw,
                           std::size_t pad) {
  const std::size_t oh = h + 2 * pad - kh + 1;
  const std::size_t ow = wd + 2 * pad - kw + 1;
  // gather form: one writer per input cell
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t iy = 0; iy < h; ++iy) {
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
}

void conv2d_backward_kernel(const double* gy, const double* x, double* gw,
                            std::size_t cin, std::size_t h, std::size_t wd,
                            std::size_t cout, std::size_t kh, std::size_t kw,
                            std::size_t pad) {
  const std::size_t oh = h + 2 * pad - kh + 1;
  const std::size_t ow = wd + 2 * pad - kw + 1;
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
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
          gw[((co * cin + ci) * kh + ky) * kw + kx] += acc;
        }
      }
    }
  }
}

void pool2d_max(const double* x, double* y, std::size_t* argmax, std::size_t c,
                std::size_t h, std::size_t w, std::size_t win) {
  const std::size_t oh = h / win, ow = w / win;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double best = 0.0;
        std::size_t best_idx = 0;
        bool first = true;
        for (std::size_t dy = 0; dy < win; ++dy) {
          for (std::size_t dx = 0; dx < win; ++dx) {
            const std::size_t idx = (ch * h + oy * win + dy) * w + ox * win + dx;
            // ties keep the first element in row-major order
            if (first || x[idx] > best) {
              best = x[idx];
              best_idx = idx;
              first = false;
            }
          }
        }
        const std::size_t o = (ch * oh + oy) * ow + ox;
        y[o] = best;
        if (argmax) argmax[o] = best_idx;
      }
    }
  }
}

void pool2d_avg(const double* x, double* y, std::size_t c, std::size_t h,
                std::size_t w, std::size_t win) {
  const std::size_t oh = h / win, ow = w / win;
  const double denom = static_cast<double>(win * win);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < win; ++dy) {
          for (std::size_t dx = 0; dx < win; ++dx) {
            acc += x[(ch * h + oy * win + dy) * w + ox * win + dx];
          }
        }
        y[(ch * oh + oy) * ow + ox] = acc / denom;
      }
    }
  }
}

void pool2d_max_backward(const double* gy, const std::size_t* argmax, double* gx,
                         std::size_t n_out) {
  // windows are disjoint, so argmax targets never collide
  for (std::size_t o = 0; o < n_out; ++o) gx[argmax[o]] += gy[o];
}

void pool2d_avg_backward(const double* gy, double* gx, std::size_t c,
                         std::size_t h, std::size_t w, std::size_t win) {
  const std::size_t oh = h / win, ow = w / win;
  const double denom = static_cast<double>(win * win);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t iy = 0; iy < h; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) {
        gx[(ch * h + iy) * w + ix] += gy[(ch * oh + iy / win) * ow + ix / win] / denom;
      }
    }
  }
}

void pairwise_sqdist(const double* x, double* d, std::size_t b, std::size_t dim) {
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        const double diff = x[i * dim + t] - x[j * dim + t];
        acc += diff * diff;
      }
      d[i * b + j] = acc;
    }
  }
}

void pairwise_sqdist_backward(const double* x, const double* gd, double* gx,
                              std::size_t b, std::size_t dim) {
  // d(i,j) depends on rows i and j: dD_ij/dx_i = 2(x_i - x_j), dD_ij/dx_j = -2(x_i - x_j)
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < dim; ++t) {
      double acc = 0.0;
      for (std::size_t j = 0; j < b; ++j) {
        const double diff = x[i * dim + t] - x[j * dim + t];
        acc += 2.0 * diff * (gd[i * b + j] + gd[j * b + i]);
      }
      gx[i * dim + t] += acc;
    }
  }
}

}  // namespace atten::kern::serial
