#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "jmc/common.hpp"

namespace jmc {

//! Closed real interval [lo, hi]. Plain double endpoints, no outward
//! rounding: downstream tolerances (>= 1e-12) absorb last-ulp effects.
struct Interval {
  double lo = 0.0, hi = 0.0;

  Interval() = default;
  Interval(double l, double h) : lo(l), hi(h) {
    if (!(l <= h)) throw DomainError("empty interval [" + std::to_string(l) + ", " + std::to_string(h) + "]");
  }
  static Interval point(double v) { return Interval(v, v); }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool degenerate() const { return lo == hi; }
  bool contains(double v) const { return lo <= v && v <= hi; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

inline Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }
inline Interval operator+(const Interval& a, const Interval& b) { return Interval(a.lo + b.lo, a.hi + b.hi); }
inline Interval operator-(const Interval& a, const Interval& b) { return Interval(a.lo - b.hi, a.hi - b.lo); }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return Interval(std::min(std::min(p1, p2), std::min(p3, p4)),
                  std::max(std::max(p1, p2), std::max(p3, p4)));
}

inline bool sign_definite(const Interval& a) { return a.lo > 0.0 || a.hi < 0.0; }

inline Interval recip(const Interval& a) {
  if (!sign_definite(a)) throw DomainError("reciprocal of an interval containing zero");
  return Interval(1.0 / a.hi, 1.0 / a.lo);
}

inline Interval operator/(const Interval& a, const Interval& b) {
  if (a.degenerate() && b.degenerate()) {
    if (b.lo == 0.0) throw DomainError("division by an interval containing zero");
    return Interval::point(a.lo / b.lo);  // keeps point chains exact
  }
  return a * recip(b);
}

inline Interval exp(const Interval& a) { return Interval(std::exp(a.lo), std::exp(a.hi)); }

inline Interval ln(const Interval& a) {
  if (!(a.lo > 0.0)) throw DomainError("ln of an interval touching nonpositive reals");
  return Interval(std::log(a.lo), std::log(a.hi));
}

inline Interval sqrt(const Interval& a) {
  if (a.lo < 0.0) throw DomainError("sqrt of an interval with negative values");
  return Interval(std::sqrt(a.lo), std::sqrt(a.hi));
}

namespace detail {
// Integer power of a double via binary exponentiation; n >= 0.
inline double ipow(double x, int n) {
  double r = 1.0, b = x;
  for (unsigned m = static_cast<unsigned>(n); m; m >>= 1, b *= b)
    if (m & 1u) r *= b;
  return r;
}
}  // namespace detail

//! Parity-aware integer power. Negative exponents require a sign-definite base.
inline Interval pow_int(const Interval& a, int n) {
  if (n == 0) return Interval(1.0, 1.0);
  if (n < 0) {
    if (!sign_definite(a)) throw DomainError("negative power of an interval containing zero");
    return recip(pow_int(a, -n));
  }
  const double pl = detail::ipow(a.lo, n), ph = detail::ipow(a.hi, n);
  if (n % 2 == 1) return Interval(pl, ph);
  if (a.lo >= 0.0) return Interval(pl, ph);
  if (a.hi <= 0.0) return Interval(ph, pl);
  return Interval(0.0, std::max(pl, ph));  // even power over a zero-spanning base
}

namespace detail {
// Does [a, b] contain a point congruent to c (mod 2*pi)?
inline bool contains_mod_2pi(double a, double b, double c) {
  const double k = std::ceil((a - c) / (2.0 * PI));
  return c + 2.0 * PI * k <= b;
}
}  // namespace detail

inline Interval cos(const Interval& x) {
  if (x.degenerate()) return Interval::point(std::cos(x.lo));
  if (x.width() >= 2.0 * PI) return Interval(-1.0, 1.0);
  const double ca = std::cos(x.lo), cb = std::cos(x.hi);
  double lo = std::min(ca, cb), hi = std::max(ca, cb);
  if (detail::contains_mod_2pi(x.lo, x.hi, 0.0)) hi = 1.0;
  if (detail::contains_mod_2pi(x.lo, x.hi, PI)) lo = -1.0;
  return Interval(lo, hi);
}

inline Interval sin(const Interval& x) {
  if (x.degenerate()) return Interval::point(std::sin(x.lo));
  return cos(Interval(x.lo - 0.5 * PI, x.hi - 0.5 * PI));
}

//! Axis-aligned box: a vector of intervals.
using Box = std::vector<Interval>;

//! Box width: the largest side length.
inline double width(const Box& b) {
  double w = 0.0;
  for (const auto& s : b) w = std::max(w, s.width());
  return w;
}

inline std::vector<double> midpoint(const Box& b) {
  std::vector<double> m(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) m[i] = b[i].mid();
  return m;
}

inline bool contains(const Box& b, std::span<const double> p) {
  if (p.size() != b.size()) return false;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (!b[i].contains(p[i])) return false;
  return true;
}

}  // namespace jmc
