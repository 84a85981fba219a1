#include "atten/rational.hpp"

#include <cstdlib>
#include <limits>

namespace atten {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

Rat Rat::make(__int128 n, __int128 d) {
  if (d == 0) throw Error("rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const __int128 g = gcd128(n, d);
  if (g != 0) {
    n /= g;
    d /= g;
  }
  constexpr __int128 lo = std::numeric_limits<long long>::min();
  constexpr __int128 hi = std::numeric_limits<long long>::max();
  if (n < lo || n > hi || d > hi) throw Error("rational: overflow");
  Rat r;
  r.num_ = static_cast<long long>(n);
  r.den_ = static_cast<long long>(d);
  return r;
}

Rat::Rat(long long n, long long d) { *this = make(n, d); }

std::string Rat::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rat Rat::parse(const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    const long long n = std::stoll(text.substr(0, slash));
    const long long d = std::stoll(text.substr(slash + 1));
    return Rat(n, d);
  }
  const auto dot = text.find('.');
  if (dot != std::string::npos) {
    const std::string whole = text.substr(0, dot);
    const std::string frac = text.substr(dot + 1);
    if (frac.size() > 18) throw Error("rational: too many decimal places in '" + text + "'");
    long long den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const bool neg = !whole.empty() && whole[0] == '-';
    const long long w = whole.empty() || whole == "-" ? 0 : std::stoll(whole);
    const long long f = frac.empty() ? 0 : std::stoll(frac);
    return Rat(w, 1) + Rat(neg ? -f : f, den);
  }
  return Rat(std::stoll(text), 1);
}

Rat operator+(const Rat& a, const Rat& b) {
  return Rat::make(static_cast<__int128>(a.num_) * b.den_ +
                       static_cast<__int128>(b.num_) * a.den_,
                   static_cast<__int128>(a.den_) * b.den_);
}

Rat operator-(const Rat& a, const Rat& b) {
  return Rat::make(static_cast<__int128>(a.num_) * b.den_ -
                       static_cast<__int128>(b.num_) * a.den_,
                   static_cast<__int128>(a.den_) * b.den_);
}

Rat operator*(const Rat& a, const Rat& b) {
  return Rat::make(static_cast<__int128>(a.num_) * b.num_,
                   static_cast<__int128>(a.den_) * b.den_);
}

Rat operator/(const Rat& a, const Rat& b) {
  if (b.num_ == 0) throw Error("rational: division by zero");
  return Rat::make(static_cast<__int128>(a.num_) * b.den_,
                   static_cast<__int128>(a.den_) * b.num_);
}

Rat Rat::operator-() const { return make(-static_cast<__int128>(num_), den_); }

bool operator<(const Rat& a, const Rat& b) {
  return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
}

}  // namespace atten
