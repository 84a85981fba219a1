#pragma once

// Shared element-level helpers for the serial and OpenMP kernel variants.
// Keeping the per-element math here guarantees the two variants differ only
// in loop structure, which is what the bitwise-parity tests rely on.

#include <cmath>
#include <cstddef>

#include "atten/kernels.hpp"

namespace atten::kern::detail {

inline double apply_unary(Unary op, double x) {
  switch (op) {
    case Unary::Neg:
      return -x;
    case Unary::Exp:
      return std::exp(x);
    case Unary::Log:
      return std::log(x);
    case Unary::Relu:
      return x > 0.0 ? x : 0.0;
    case Unary::Sigmoid:
      // split form keeps exp() in the underflow-safe direction
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  return 0.0;
}

// gx contribution given input x, output y and upstream gy
inline double unary_grad(Unary op, double x, double y, double gy) {
  switch (op) {
    case Unary::Neg:
      return -gy;
    case Unary::Exp:
      return gy * y;
    case Unary::Log:
      return gy / x;
    case Unary::Relu:
      return x > 0.0 ? gy : 0.0;
    case Unary::Sigmoid:
      return gy * y * (1.0 - y);
  }
  return 0.0;
}

inline double apply_binary(Binary op, double a, double b) {
  switch (op) {
    case Binary::Add:
      return a + b;
    case Binary::Sub:
      return a - b;
    case Binary::Mul:
      return a * b;
    case Binary::Div:
      return a / b;
  }
  return 0.0;
}

// Element strides per axis; 0 where the operand broadcasts (dim 1 vs out>1).
inline void bcast_strides(const Shape& out, const Shape& operand,
                          std::size_t strides[kMaxRank]) {
  std::size_t s = 1;
  for (std::size_t i = operand.rank; i-- > 0;) {
    strides[i] = (operand.dims[i] == 1 && out.dims[i] != 1) ? 0 : s;
    s *= operand.dims[i];
  }
}

// tails[i] = product of out dims after axis i (flat-index decode divisors)
inline void tails_of(const Shape& shape, std::size_t tails[kMaxRank]) {
  std::size_t t = 1;
  for (std::size_t i = shape.rank; i-- > 0;) {
    tails[i] = t;
    t *= shape.dims[i];
  }
}

// Decode flat out index into an operand offset using bcast strides.
inline std::size_t decode_offset(std::size_t flat, const Shape& out,
                                 const std::size_t tails[kMaxRank],
                                 const std::size_t strides[kMaxRank]) {
  std::size_t off = 0;
  std::size_t rem = flat;
  for (std::size_t ax = 0; ax < out.rank; ++ax) {
    const std::size_t c = rem / tails[ax];
    rem -= c * tails[ax];
    off += c * strides[ax];
  }
  return off;
}

}  // namespace atten::kern::detail
