#pragma once

// Shared helpers for the test suites: an independent reference evaluator for
// expression strings, a seeded random expression generator that tracks value
// ranges to keep generated cases in-domain, a long-double composite
// Gauss-Legendre quadrature oracle, and small numeric utilities. Everything
// here is written independently of the library internals it is used to check
// (the reference evaluator re-parses text; the quadrature oracle integrates
// densities directly).

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "jmc/interval.hpp"

namespace testsup {

// --- ulp distance ----------------------------------------------------------

inline std::int64_t ordered_bits(double x) {
  auto b = std::bit_cast<std::int64_t>(x);
  return b < 0 ? std::int64_t(0x8000000000000000ULL) - b : b;
}

inline std::int64_t ulp_diff(double a, double b) {
  if (a == b) return 0;
  const std::int64_t d = ordered_bits(a) - ordered_bits(b);
  return d < 0 ? -d : d;
}

// --- independent recursive-descent evaluator over expression text -----------
// Grammar mirrored from the library parser; evaluates immediately on doubles
// without building a DAG.

class RefEval {
 public:
  RefEval(const std::string& s, const std::vector<double>& x, const std::vector<double>& w)
      : s_(s), x_(x), w_(w) {}

  double run() {
    const double v = expr();
    ws();
    if (pos_ != s_.size()) throw std::runtime_error("ref: trailing input");
    return v;
  }

 private:
  void ws() { while (pos_ < s_.size() && std::isspace((unsigned char)s_[pos_])) ++pos_; }
  bool eat(char c) { ws(); if (pos_ < s_.size() && s_[pos_] == c) { ++pos_; return true; } return false; }

  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v = v + term();
      else if (eat('-')) v = v - term();
      else return v;
    }
  }
  double term() {
    double v = factor();
    for (;;) {
      if (eat('*')) v = v * factor();
      else if (eat('/')) { double d = factor(); if (d == 0) throw std::runtime_error("ref: div0"); v = v / d; }
      else return v;
    }
  }
  double factor() {
    if (eat('-')) return -factor();
    double v = base();
    if (eat('^')) {
      ws();
      bool neg = false;
      if (pos_ < s_.size() && s_[pos_] == '-') { neg = true; ++pos_; }
      long n = 0;
      if (pos_ >= s_.size() || !std::isdigit((unsigned char)s_[pos_])) throw std::runtime_error("ref: exponent");
      while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_])) n = n * 10 + (s_[pos_++] - '0');
      double r = 1, b = v;
      for (long m = n; m; m >>= 1, b *= b)
        if (m & 1) r *= b;
      v = neg ? 1.0 / r : r;
    }
    return v;
  }
  double base() {
    ws();
    if (pos_ >= s_.size()) throw std::runtime_error("ref: eof");
    char c = s_[pos_];
    if (std::isdigit((unsigned char)c) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isdigit((unsigned char)s_[pos_]) || s_[pos_] == '.')) ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
        ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
        while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_])) ++pos_;
      }
      return std::stod(s_.substr(start, pos_ - start));
    }
    if (c == '(') {
      ++pos_;
      double v = expr();
      if (!eat(')')) throw std::runtime_error("ref: paren");
      return v;
    }
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha((unsigned char)s_[pos_])) ++pos_;
    std::string id = s_.substr(start, pos_ - start);
    if (id == "x" || id == "w" || id == "g") {
      std::size_t ds = pos_;
      while (pos_ < s_.size() && std::isdigit((unsigned char)s_[pos_])) ++pos_;
      int idx = std::stoi(s_.substr(ds, pos_ - ds)) - 1;
      return id == "x" ? x_.at(idx) : w_.at(idx);
    }
    if (!eat('(')) throw std::runtime_error("ref: func paren");
    double a = expr();
    if (!eat(')')) throw std::runtime_error("ref: func close");
    if (id == "exp") return std::exp(a);
    if (id == "ln") { if (a <= 0) throw std::runtime_error("ref: ln"); return std::log(a); }
    if (id == "sqrt") { if (a < 0) throw std::runtime_error("ref: sqrt"); return std::sqrt(a); }
    if (id == "sin") return std::sin(a);
    if (id == "cos") return std::cos(a);
    throw std::runtime_error("ref: unknown id " + id);
  }

  const std::string& s_;
  const std::vector<double>& x_;
  const std::vector<double>& w_;
  std::size_t pos_ = 0;
};

inline double ref_eval(const std::string& s, const std::vector<double>& x, const std::vector<double>& w) {
  return RefEval(s, x, w).run();
}

// --- random in-domain expression generator ----------------------------------
// Builds expression text bottom-up while tracking a conservative value range,
// so ln/sqrt/div/negative powers are only emitted where they are defined over
// the whole variable box. Ranges are also used to cap magnitudes.

struct GenExpr {
  std::string text;
  jmc::Interval rng{0, 0};
};

class ExprGen {
 public:
  ExprGen(std::mt19937_64& eng, std::vector<jmc::Interval> xbox, std::vector<jmc::Interval> wbox)
      : eng_(&eng), xbox_(std::move(xbox)), wbox_(std::move(wbox)) {}

  GenExpr gen(int depth) {
    if (depth <= 0 || pick(4) == 0) return leaf();
    const int choice = pick(10);
    if (choice < 5) return binary(depth);
    return unary(depth);
  }

 private:
  int pick(int n) { return static_cast<int>((*eng_)() % static_cast<std::uint64_t>(n)); }
  double uni(double lo, double hi) {
    return lo + ((*eng_)() >> 11) * 0x1.0p-53 * (hi - lo);
  }

  static bool bounded(const jmc::Interval& r, double cap = 1e6) {
    return std::isfinite(r.lo) && std::isfinite(r.hi) && std::max(std::fabs(r.lo), std::fabs(r.hi)) < cap;
  }

  GenExpr leaf() {
    const int total = static_cast<int>(xbox_.size() + wbox_.size());
    const int c = pick(total + 1);
    if (c < static_cast<int>(xbox_.size()))
      return {"x" + std::to_string(c + 1), xbox_[static_cast<std::size_t>(c)]};
    if (c < total) {
      const int j = c - static_cast<int>(xbox_.size());
      return {"w" + std::to_string(j + 1), wbox_[static_cast<std::size_t>(j)]};
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", uni(-3.0, 3.0));
    const double v = std::strtod(buf, nullptr);
    return {buf, jmc::Interval::point(v)};
  }

  GenExpr binary(int depth) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      GenExpr a = gen(depth - 1), b = gen(depth - 1);
      switch (pick(4)) {
        case 0: {
          jmc::Interval r = a.rng + b.rng;
          if (bounded(r)) return {"(" + a.text + " + " + b.text + ")", r};
          break;
        }
        case 1: {
          jmc::Interval r = a.rng - b.rng;
          if (bounded(r)) return {"(" + a.text + " - " + b.text + ")", r};
          break;
        }
        case 2: {
          jmc::Interval r = a.rng * b.rng;
          if (bounded(r)) return {"(" + a.text + " * " + b.text + ")", r};
          break;
        }
        default: {
          if (jmc::sign_definite(b.rng) && std::min(std::fabs(b.rng.lo), std::fabs(b.rng.hi)) > 1e-3) {
            jmc::Interval r = a.rng / b.rng;
            if (bounded(r)) return {"(" + a.text + " / " + b.text + ")", r};
          }
          break;
        }
      }
    }
    GenExpr a = leaf(), b = leaf();
    return {"(" + a.text + " + " + b.text + ")", a.rng + b.rng};
  }

  GenExpr unary(int depth) {
    GenExpr a = gen(depth - 1);
    for (int attempt = 0; attempt < 10; ++attempt) {
      switch (pick(8)) {
        case 0:
          return {"(-" + a.text + ")", -a.rng};
        case 1:
          if (a.rng.hi < 20.0) return {"exp(" + a.text + ")", jmc::exp(a.rng)};
          break;
        case 2:
          if (a.rng.lo > 1e-3) return {"ln(" + a.text + ")", jmc::ln(a.rng)};
          break;
        case 3:
          if (a.rng.lo >= 0.0) return {"sqrt(" + a.text + ")", jmc::sqrt(a.rng)};
          break;
        case 4:
          if (bounded(a.rng, 50.0)) return {"sin(" + a.text + ")", jmc::sin(a.rng)};
          break;
        case 5:
          if (bounded(a.rng, 50.0)) return {"cos(" + a.text + ")", jmc::cos(a.rng)};
          break;
        case 6: {
          const int n = 2 + pick(3);  // 2..4
          jmc::Interval r = jmc::pow_int(a.rng, n);
          if (bounded(r)) return {"(" + a.text + ")^" + std::to_string(n), r};
          break;
        }
        default: {
          const int n = 1 + pick(2);  // 1..2
          if (jmc::sign_definite(a.rng) && std::min(std::fabs(a.rng.lo), std::fabs(a.rng.hi)) > 1e-2) {
            jmc::Interval r = jmc::pow_int(a.rng, -n);
            if (bounded(r)) return {"(" + a.text + ")^-" + std::to_string(n), r};
          }
          break;
        }
      }
    }
    return a;
  }

  std::mt19937_64* eng_;
  std::vector<jmc::Interval> xbox_, wbox_;
};

// Random box with sides in [0.2, 2.5] centered in [-3, 3].
inline std::vector<jmc::Interval> random_box(std::mt19937_64& eng, int dims) {
  std::vector<jmc::Interval> b;
  auto uni = [&](double lo, double hi) { return lo + (eng() >> 11) * 0x1.0p-53 * (hi - lo); };
  for (int i = 0; i < dims; ++i) {
    const double c = uni(-3.0, 3.0), h = 0.5 * uni(0.2, 2.5);
    b.emplace_back(c - h, c + h);
  }
  return b;
}

inline std::vector<double> random_point(std::mt19937_64& eng, const std::vector<jmc::Interval>& box) {
  std::vector<double> p;
  auto uni01 = [&]() { return (eng() >> 11) * 0x1.0p-53; };
  for (const auto& s : box) p.push_back(s.lo + uni01() * s.width());
  return p;
}

// --- long-double composite Gauss-Legendre quadrature oracle ------------------
// 40-node rule per panel, panels split until the refined estimate moves by
// less than the tolerance. Independent from the library's quadrature.

namespace gl40 {
// Nodes/weights generated by Newton iteration on the Legendre polynomial.
inline void rule(std::vector<long double>& xs, std::vector<long double>& ws) {
  const int n = 40;
  xs.assign(n, 0.0L);
  ws.assign(n, 0.0L);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double x = std::cos(3.141592653589793238462643383279502884L * (i + 0.75L) / (n + 0.5L));
    long double pp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      long double p0 = 1.0L, p1 = x;
      for (int j = 2; j <= n; ++j) {
        long double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0L);
      long double dx = p1 / pp;
      x -= dx;
      if (std::fabs((double)dx) < 1e-19) break;
    }
    xs[i] = -x;
    xs[n - 1 - i] = x;
    ws[i] = ws[n - 1 - i] = 2.0L / ((1.0L - x * x) * pp * pp);
  }
}
}  // namespace gl40

inline long double quad_panel(const std::function<long double(long double)>& f, long double a, long double b) {
  static std::vector<long double> xs, ws;
  if (xs.empty()) gl40::rule(xs, ws);
  const long double c = 0.5L * (a + b), h = 0.5L * (b - a);
  long double s = 0.0L;
  for (std::size_t i = 0; i < xs.size(); ++i) s += ws[i] * f(c + h * xs[i]);
  return s * h;
}

//! Adaptive composite quadrature: split into 2^k uniform panels until stable.
inline long double quad_ld(const std::function<long double(long double)>& f, long double a, long double b,
                           long double tol = 1e-13L) {
  long double prev = quad_panel(f, a, b);
  for (int panels = 2; panels <= 1024; panels *= 2) {
    long double s = 0.0L;
    const long double h = (b - a) / panels;
    for (int i = 0; i < panels; ++i) s += quad_panel(f, a + i * h, a + (i + 1) * h);
    if (std::fabs((double)(s - prev)) <= (double)(tol * std::max(1.0L, std::fabs(s)))) return s;
    prev = s;
  }
  return prev;
}

// --- brute-force lower convex hull of samples (envelope oracle) --------------
// Returns hull values at the same grid; Andrew's monotone chain on (z, f(z)).

inline std::vector<double> lower_hull_values(const std::vector<double>& z, const std::vector<double>& f) {
  const std::size_t n = z.size();
  std::vector<std::size_t> h;  // hull vertex indices
  for (std::size_t i = 0; i < n; ++i) {
    while (h.size() >= 2) {
      const std::size_t a = h[h.size() - 2], b = h[h.size() - 1];
      // pop b if it lies above segment a-i
      const double cross = (z[b] - z[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (z[i] - z[a]);
      if (cross <= 0.0) h.pop_back();
      else break;
    }
    h.push_back(i);
  }
  std::vector<double> out(n);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (seg + 1 < h.size() && z[h[seg + 1]] < z[i]) ++seg;
    if (seg + 1 >= h.size()) { out[i] = f[h.back()]; continue; }
    const std::size_t a = h[seg], b = h[seg + 1];
    const double t = (z[i] - z[a]) / (z[b] - z[a]);
    out[i] = f[a] + t * (f[b] - f[a]);
  }
  return out;
}

}  // namespace testsup
