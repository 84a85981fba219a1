#pragma once

#include <cstdint>
#include <string>

#include "atten/tensor.hpp"

namespace atten {

// Exact rational arithmetic over int64. Intermediate products go through
// 128-bit integers; anything that cannot be reduced back into int64 throws
// rather than silently losing exactness. Counts at toolkit scale stay far
// below that limit.
class Rat {
 public:
  constexpr Rat() = default;
  Rat(long long n) : num_(n), den_(1) {}  // NOLINT(google-explicit-constructor)
  Rat(long long n, long long d);

  long long num() const { return num_; }
  long long den() const { return den_; }

  bool is_integer() const { return den_ == 1; }
  bool is_negative() const { return num_ < 0; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  // "3/40", or just "2" for integers
  std::string to_string() const;

  static Rat parse(const std::string& text);  // "p/q", "p", or a decimal like "0.5"

  friend Rat operator+(const Rat& a, const Rat& b);
  friend Rat operator-(const Rat& a, const Rat& b);
  friend Rat operator*(const Rat& a, const Rat& b);
  friend Rat operator/(const Rat& a, const Rat& b);
  Rat operator-() const;

  friend bool operator==(const Rat& a, const Rat& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rat& a, const Rat& b) { return !(a == b); }
  friend bool operator<(const Rat& a, const Rat& b);
  friend bool operator<=(const Rat& a, const Rat& b) { return a == b || a < b; }
  friend bool operator>(const Rat& a, const Rat& b) { return b < a; }
  friend bool operator>=(const Rat& a, const Rat& b) { return b <= a; }

  friend Rat abs(const Rat& a) { return a.num_ < 0 ? -a : a; }

 private:
  static Rat make(__int128 n, __int128 d);
  long long num_ = 0;
  long long den_ = 1;
};

}  // namespace atten
