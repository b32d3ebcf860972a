#pragma once

// Exact rational arithmetic on checked 64-bit integers.
//
// Partition certificates in this library are equalities (for instance
// A*|U(tau1)|/|tau1| == sup|j| in the irregularity construction) and must
// not be blurred by floating point.  All segment endpoints and regularity
// bounds therefore run on this type.  Magnitudes stay tiny here: dyadic
// endpoints, small-integer scan parameters, unions of a few hundred pieces.
// Intermediates go through __int128 and are reduced by gcd before the
// range check, so the only way to overflow is to genuinely leave the
// int64 range, which we treat as a logic error rather than widening.

#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rvl {

struct rational_overflow : std::overflow_error {
  rational_overflow() : std::overflow_error("rational: out of 64-bit range") {}
};

class rational {
public:
  constexpr rational() = default;
  constexpr rational(std::int64_t n) : num_(n), den_(1) {}
  rational(std::int64_t n, std::int64_t d) { assign(n, d); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  double to_double() const { return double(num_) / double(den_); }

  // "p/q" with q > 0 after reduction; plain "p" when q == 1.
  std::string str() const {
    return den_ == 1 ? std::to_string(num_)
                     : std::to_string(num_) + "/" + std::to_string(den_);
  }

  // Accepts "p", "p/q", optional leading sign on p.
  static rational parse(std::string_view s) {
    auto bad = [&] { throw std::invalid_argument("rational: cannot parse '" + std::string(s) + "'"); };
    if (s.empty()) bad();
    std::size_t slash = s.find('/');
    std::int64_t n = parse_int(s.substr(0, slash), bad);
    std::int64_t d = 1;
    if (slash != std::string_view::npos) d = parse_int(s.substr(slash + 1), bad);
    return rational(n, d);
  }

  friend rational operator+(const rational& a, const rational& b) {
    return from128((__int128)a.num_ * b.den_ + (__int128)b.num_ * a.den_,
                   (__int128)a.den_ * b.den_);
  }
  friend rational operator-(const rational& a, const rational& b) {
    return from128((__int128)a.num_ * b.den_ - (__int128)b.num_ * a.den_,
                   (__int128)a.den_ * b.den_);
  }
  friend rational operator*(const rational& a, const rational& b) {
    return from128((__int128)a.num_ * b.num_, (__int128)a.den_ * b.den_);
  }
  friend rational operator/(const rational& a, const rational& b) {
    if (b.num_ == 0) throw std::domain_error("rational: division by zero");
    return from128((__int128)a.num_ * b.den_, (__int128)a.den_ * b.num_);
  }
  rational operator-() const { rational r; r.num_ = -num_; r.den_ = den_; return r; }

  rational& operator+=(const rational& b) { return *this = *this + b; }
  rational& operator-=(const rational& b) { return *this = *this - b; }
  rational& operator*=(const rational& b) { return *this = *this * b; }
  rational& operator/=(const rational& b) { return *this = *this / b; }

  // Cross products fit in __int128 because both sides are reduced int64.
  friend bool operator==(const rational& a, const rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator<(const rational& a, const rational& b) {
    return (__int128)a.num_ * b.den_ < (__int128)b.num_ * a.den_;
  }
  friend bool operator!=(const rational& a, const rational& b) { return !(a == b); }
  friend bool operator>(const rational& a, const rational& b) { return b < a; }
  friend bool operator<=(const rational& a, const rational& b) { return !(b < a); }
  friend bool operator>=(const rational& a, const rational& b) { return !(a < b); }

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;

  void assign(std::int64_t n, std::int64_t d) {
    if (d == 0) throw std::domain_error("rational: zero denominator");
    if (n == INT64_MIN || d == INT64_MIN) throw rational_overflow();
    if (d < 0) { n = -n; d = -d; }
    std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    num_ = n;
    den_ = d;
  }

  static rational from128(__int128 n, __int128 d) {
    if (d == 0) throw std::domain_error("rational: zero denominator");
    if (d < 0) { n = -n; d = -d; }
    __int128 a = n < 0 ? -n : n, b = d;
    while (b) { __int128 t = a % b; a = b; b = t; }  // gcd
    if (a > 1) { n /= a; d /= a; }
    if (n > INT64_MAX || n < -INT64_MAX || d > INT64_MAX) throw rational_overflow();
    rational r;
    r.num_ = (std::int64_t)n;
    r.den_ = (std::int64_t)d;
    return r;
  }

  template <class Fail>
  static std::int64_t parse_int(std::string_view t, Fail bad) {
    if (t.empty()) bad();
    bool neg = t[0] == '-' || t[0] == '+' ? (t[0] == '-') : false;
    std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
    if (i == t.size()) bad();
    __int128 v = 0;
    for (; i < t.size(); ++i) {
      if (t[i] < '0' || t[i] > '9') bad();
      v = v * 10 + (t[i] - '0');
      if (v > INT64_MAX) throw rational_overflow();
    }
    return neg ? -(std::int64_t)v : (std::int64_t)v;
  }
};

inline rational abs(const rational& a) { return a < rational(0) ? -a : a; }

// 1/2^n as an exact rational; n is capped well inside the int64 mantissa.
inline rational dyadic(int n) {
  if (n < 0 || n > 62) throw std::domain_error("dyadic: exponent out of range");
  return rational(1, std::int64_t(1) << n);
}

}  // namespace rvl
