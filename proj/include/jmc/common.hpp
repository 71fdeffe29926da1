#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmc {

inline constexpr double PI = 3.141592653589793238462643383279502884;

//! Base class for all errors raised by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

//! Domain violation in real, interval, or relaxation arithmetic
//! (ln of a nonpositive range, division by a range containing zero, ...).
//! These are hard errors by design, never IEEE special values.
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

//! Syntax error while parsing an expression string.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t pos)
      : Error(msg + " (at offset " + std::to_string(pos) + ")"), position(pos) {}
  std::size_t position;
};

//! Malformed experiment configuration.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

//! Median of three; clips z into [cv, cc] assuming cv <= cc.
inline double mid3(double cv, double cc, double z) {
  if (z < cv) return cv;
  if (z > cc) return cc;
  return z;
}

//! Pairwise (cascade) summation over a fixed-order sequence. Used everywhere a
//! weighted sum over partition cells is formed so results do not depend on
//! accumulation order or platform reassociation.
inline double pairwise_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  if (v.size() == 2) return v[0] + v[1];
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.subspan(0, h)) + pairwise_sum(v.subspan(h));
}

//! Safeguarded Newton iteration on a bracket [lo, hi] with g(lo), g(hi) of
//! opposite sign (either orientation). Falls back to bisection whenever the
//! Newton step leaves the bracket or stalls. Used to locate envelope tangency
//! points; residual tolerance is scaled by `scale`.
template <typename F, typename DF>
double newton_bisect(F&& g, DF&& dg, double lo, double hi, double scale = 1.0) {
  double glo = g(lo), ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  // Tolerate same-sign brackets caused by roundoff at a touching root.
  if ((glo > 0) == (ghi > 0)) return std::fabs(glo) < std::fabs(ghi) ? lo : hi;
  const double tol = 1e-13 * std::max(1.0, std::fabs(scale));
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    double gt = g(t);
    if (std::fabs(gt) <= tol) return t;
    if ((gt > 0) == (glo > 0)) { lo = t; glo = gt; } else { hi = t; }
    double d = dg(t);
    double step = (d != 0.0) ? t - gt / d : lo - 1.0;  // force bisection if flat
    t = (step > lo && step < hi) ? step : 0.5 * (lo + hi);
    if (hi - lo <= 1e-15 * std::max(1.0, std::fabs(lo) + std::fabs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace jmc
