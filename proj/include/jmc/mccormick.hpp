#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/expr.hpp"
#include "jmc/interval.hpp"

namespace jmc {

//! McCormick relaxation value of a subexpression over a fixed box:
//! interval bounds plus convex under- and concave over-estimator values at
//! one query point. Invariant after every operation (which ends in a cut):
//! box.lo <= cv <= cc <= box.hi up to roundoff.
struct McCormick {
  Interval box;
  double cv = 0.0, cc = 0.0;
  double gap() const { return cc - cv; }
};

inline McCormick mc_constant(double c) { return {Interval::point(c), c, c}; }

//! Variable leaf. The query point is mid-cut into the bounds.
inline McCormick mc_variable(const Interval& bounds, double p) {
  const double q = bounds.clamp(p);
  return {bounds, q, q};
}

inline void cut(McCormick& m) {
  m.cv = std::max(m.cv, m.box.lo);
  m.cc = std::min(m.cc, m.box.hi);
}

namespace detail {

// ---------------------------------------------------------------------------
// Piecewise convex envelope of cos over an interval, absolute coordinates.
// Pieces left to right; at most five (line, cos, -1 plateau, cos, line).
// Line pieces are anchored at a reference point so evaluation does not lose
// precision for arguments far from zero.
// ---------------------------------------------------------------------------
struct CosEnv {
  struct Piece {
    double upto;          // piece applies for z <= upto (last piece: to the end)
    int kind;             // 0: line  1: cos(z)  2: constant -1
    double zr, c0, c1;    // line: c0 + c1*(z - zr)
  };
  Piece p[5];
  int np = 0;

  double eval(double z) const {
    for (int i = 0; i + 1 < np; ++i)
      if (z <= p[i].upto) return piece(i, z);
    return piece(np - 1, z);
  }

 private:
  double piece(int i, double z) const {
    switch (p[i].kind) {
      case 0: return p[i].c0 + p[i].c1 * (z - p[i].zr);
      case 1: return std::cos(z);
      default: return -1.0;
    }
  }
};

// Tangency point of a line through (e, cos e) touching cos inside [tlo, thi]:
// root of q(t) = cos t - sin(t) (e - t) - cos e, with q'(t) = -cos(t) (e - t).
inline double cos_tangent(double e, double tlo, double thi) {
  return newton_bisect(
      [e](double t) { return std::cos(t) - std::sin(t) * (e - t) - std::cos(e); },
      [e](double t) { return -std::cos(t) * (e - t); }, tlo, thi);
}

inline CosEnv cos_cv_env(double a, double b) {
  CosEnv e;
  auto add = [&e](double upto, int kind, double zr = 0, double c0 = 0, double c1 = 0) {
    e.p[e.np++] = {upto, kind, zr, c0, c1};
  };
  auto add_tangent_line = [&](double upto, double t) {
    add(upto, 0, t, std::cos(t), -std::sin(t));
  };
  auto add_secant = [&]() {
    const double s = (std::cos(b) - std::cos(a)) / (b - a);
    add(b, 0, a, std::cos(a), s);
  };
  // Minima of cos (odd multiples of pi) bracketing the interval.
  const double m1 = 2.0 * PI * std::ceil((a - PI) / (2.0 * PI)) + PI;
  const double m2 = 2.0 * PI * std::floor((b - PI) / (2.0 * PI)) + PI;

  if (m1 <= m2) {
    // At least one interior minimum: flat -1 plateau between the first and
    // last minima, curve/tangent pieces on both flanks.
    if (a >= m1 - 0.5 * PI) {
      if (m1 > a) add(m1, 1);
    } else {
      const double t = cos_tangent(a, m1 - 0.5 * PI, m1);
      add_tangent_line(t, t);
      add(m1, 1);
    }
    if (m2 > m1) add(m2, 2);
    if (b <= m2 + 0.5 * PI) {
      if (b > m2) add(b, 1);
    } else {
      const double t = cos_tangent(b, m2, m2 + 0.5 * PI);
      add(t, 1);
      add_tangent_line(b, t);
    }
    if (e.np == 0) add(b, 1);  // a == b == minimum
    return e;
  }

  // No interior minimum: the interval sits between two minima, possibly
  // covering the maximum at c.
  const double c = m1 - PI;
  const double u = a - c, v = b - c;  // in (-pi, pi)
  if (v <= -0.5 * PI || u >= 0.5 * PI) {
    add(b, 1);  // cos is convex on the whole interval
  } else if (u >= -0.5 * PI && v <= 0.5 * PI) {
    add_secant();  // cos is concave on the whole interval
  } else {
    bool done = false;
    if (u < -0.5 * PI) {
      // Envelope may follow the left convex branch, then a tangent line
      // through the right endpoint.
      const double t = cos_tangent(b, c - PI, c - 0.5 * PI);
      if (t >= a) {
        add(t, 1);
        add_tangent_line(b, t);
        done = true;
      }
    }
    if (!done && v > 0.5 * PI) {
      // Tangent line from the left endpoint into the right convex branch.
      const double t = cos_tangent(a, c + 0.5 * PI, c + PI);
      if (t <= b) {
        add_tangent_line(t, t);
        add(b, 1);
        done = true;
      }
    }
    if (!done) add_secant();
  }
  return e;
}

// First point >= a congruent to ref (mod 2*pi).
inline double first_point_geq(double a, double ref) {
  return ref + 2.0 * PI * std::ceil((a - ref) / (2.0 * PI));
}

inline double argmin_cos(double a, double b) {
  const double p = first_point_geq(a, PI);
  if (p <= b) return p;
  return std::cos(a) <= std::cos(b) ? a : b;
}
inline double argmax_cos(double a, double b) {
  const double p = first_point_geq(a, 0.0);
  if (p <= b) return p;
  return std::cos(a) >= std::cos(b) ? a : b;
}
inline double argmin_sin(double a, double b) {
  const double p = first_point_geq(a, -0.5 * PI);
  if (p <= b) return p;
  return std::sin(a) <= std::sin(b) ? a : b;
}
inline double argmax_sin(double a, double b) {
  const double p = first_point_geq(a, 0.5 * PI);
  if (p <= b) return p;
  return std::sin(a) >= std::sin(b) ? a : b;
}

inline double secant_eval(double z, double lo, double flo, double hi, double fhi) {
  return flo + (z - lo) * (fhi - flo) / (hi - lo);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Envelope catalog for the univariate library functions over a child range.
// Supplies the convex/concave envelope values together with the minimizer and
// maximizer of the function on the range (the anchor points used by the
// composition rule).
// ---------------------------------------------------------------------------
class ScalarEnvelope {
 public:
  ScalarEnvelope(Op op, int exponent, const Interval& dom) : op_(op), n_(exponent), dom_(dom) {
    if (dom_.degenerate()) {
      exact_ = fn(dom_.lo);
      zmin_ = zmax_ = dom_.lo;
      degenerate_ = true;
      return;
    }
    switch (op_) {
      case Op::Exp:
        zmin_ = dom_.lo; zmax_ = dom_.hi;
        break;
      case Op::Ln:
        if (!(dom_.lo > 0.0)) throw DomainError("ln envelope needs a positive range");
        zmin_ = dom_.lo; zmax_ = dom_.hi;
        break;
      case Op::Sqrt:
        if (dom_.lo < 0.0) throw DomainError("sqrt envelope needs a nonnegative range");
        zmin_ = dom_.lo; zmax_ = dom_.hi;
        break;
      case Op::Sin:
        cv_env_ = detail::cos_cv_env(dom_.lo - 0.5 * PI, dom_.hi - 0.5 * PI);
        cv_shift_ = 0.5 * PI;
        cc_env_ = detail::cos_cv_env(dom_.lo - 1.5 * PI, dom_.hi - 1.5 * PI);
        cc_shift_ = 1.5 * PI;
        zmin_ = detail::argmin_sin(dom_.lo, dom_.hi);
        zmax_ = detail::argmax_sin(dom_.lo, dom_.hi);
        break;
      case Op::Cos:
        cv_env_ = detail::cos_cv_env(dom_.lo, dom_.hi);
        cv_shift_ = 0.0;
        cc_env_ = detail::cos_cv_env(dom_.lo - PI, dom_.hi - PI);
        cc_shift_ = PI;
        zmin_ = detail::argmin_cos(dom_.lo, dom_.hi);
        zmax_ = detail::argmax_cos(dom_.lo, dom_.hi);
        break;
      case Op::Pow:
        init_pow();
        break;
      default:
        throw Error("no envelope for this operation");
    }
  }

  double zmin() const { return zmin_; }
  double zmax() const { return zmax_; }
  const Interval& dom() const { return dom_; }

  //! Convex envelope value at z (z inside the range).
  double cv(double z) const {
    if (degenerate_) return exact_;
    switch (op_) {
      case Op::Exp: return std::exp(z);
      case Op::Ln: return secant(z, std::log(dom_.lo), std::log(dom_.hi));
      case Op::Sqrt: return secant(z, std::sqrt(dom_.lo), std::sqrt(dom_.hi));
      case Op::Sin: return cv_env_.eval(z - cv_shift_);
      case Op::Cos: return cv_env_.eval(z - cv_shift_);
      default: return pow_cv(z);
    }
  }

  //! Concave envelope value at z.
  double cc(double z) const {
    if (degenerate_) return exact_;
    switch (op_) {
      case Op::Exp: return secant(z, std::exp(dom_.lo), std::exp(dom_.hi));
      case Op::Ln: return std::log(z);
      case Op::Sqrt: return std::sqrt(z);
      case Op::Sin: return -cc_env_.eval(z - cc_shift_);
      case Op::Cos: return -cc_env_.eval(z - cc_shift_);
      default: return pow_cc(z);
    }
  }

  double fn(double z) const {
    switch (op_) {
      case Op::Exp: return std::exp(z);
      case Op::Ln: return std::log(z);
      case Op::Sqrt: return std::sqrt(z);
      case Op::Sin: return std::sin(z);
      case Op::Cos: return std::cos(z);
      case Op::Pow: {
        const double p = detail::ipow(z, n_ < 0 ? -n_ : n_);
        return n_ < 0 ? 1.0 / p : p;
      }
      default: throw Error("no envelope for this operation");
    }
  }

 private:
  double secant(double z, double flo, double fhi) const {
    return detail::secant_eval(z, dom_.lo, flo, dom_.hi, fhi);
  }

  void init_pow() {
    const double lo = dom_.lo, hi = dom_.hi;
    if (n_ == 0 || n_ == 1) { zmin_ = lo; zmax_ = hi; return; }
    if (n_ < 0) {
      if (!sign_definite(dom_)) throw DomainError("negative power envelope over a range containing zero");
      const bool even = ((-n_) % 2 == 0);
      if (lo > 0.0) { zmin_ = hi; zmax_ = lo; }        // convex decreasing
      else if (even) { zmin_ = lo; zmax_ = hi; }       // convex increasing
      else { zmin_ = hi; zmax_ = lo; }                 // concave decreasing
      return;
    }
    if (n_ % 2 == 0) {
      zmin_ = dom_.clamp(0.0);
      zmax_ = std::fabs(lo) >= std::fabs(hi) ? lo : hi;
      return;
    }
    // Odd n >= 3: increasing; envelopes may need a tangent construction when
    // the range spans zero.
    zmin_ = lo;
    zmax_ = hi;
    if (lo >= 0.0 || hi <= 0.0) return;
    const double scale = detail::ipow(std::max(std::fabs(lo), std::fabs(hi)), n_);
    auto tangent = [this, scale](double l, double h) {
      // Tangent point t in [0, h] of a line from (l, l^n) touching z^n:
      // root of g(t) = (n-1) t^n - n l t^(n-1) + l^n; g is increasing on [0,h].
      const double gh = (n_ - 1) * detail::ipow(h, n_) - n_ * l * detail::ipow(h, n_ - 1) + detail::ipow(l, n_);
      if (gh <= 0.0) return std::pair{false, 0.0};  // secant over the whole range
      const double t = newton_bisect(
          [this, l](double t) {
            return (n_ - 1) * detail::ipow(t, n_) - n_ * l * detail::ipow(t, n_ - 1) + detail::ipow(l, n_);
          },
          [this, l](double t) {
            return static_cast<double>(n_) * (n_ - 1) * detail::ipow(t, n_ - 2) * (t - l);
          },
          0.0, h, scale);
      return std::pair{true, t};
    };
    auto [tcv_ok, tcv] = tangent(lo, hi);
    pow_cv_secant_ = !tcv_ok;
    pow_tcv_ = tcv;
    auto [tcc_ok, tcc] = tangent(-hi, -lo);  // mirrored problem
    pow_cc_secant_ = !tcc_ok;
    pow_tcc_ = -tcc;
  }

  double pow_cv(double z) const {
    const double lo = dom_.lo, hi = dom_.hi;
    if (n_ == 0) return 1.0;
    if (n_ == 1) return z;
    if (n_ < 0) {
      const bool even = ((-n_) % 2 == 0);
      if (lo > 0.0 || even) return fn(z);                      // convex branch
      return secant(z, fn(lo), fn(hi));                        // concave branch
    }
    if (n_ % 2 == 0) return detail::ipow(z, n_);
    if (lo >= 0.0) return detail::ipow(z, n_);
    if (hi <= 0.0) return secant(z, detail::ipow(lo, n_), detail::ipow(hi, n_));
    if (pow_cv_secant_) return secant(z, detail::ipow(lo, n_), detail::ipow(hi, n_));
    if (z >= pow_tcv_) return detail::ipow(z, n_);
    const double s = n_ * detail::ipow(pow_tcv_, n_ - 1);
    return detail::ipow(pow_tcv_, n_) + s * (z - pow_tcv_);
  }

  double pow_cc(double z) const {
    const double lo = dom_.lo, hi = dom_.hi;
    if (n_ == 0) return 1.0;
    if (n_ == 1) return z;
    if (n_ < 0) {
      const bool even = ((-n_) % 2 == 0);
      if (lo > 0.0 || even) return secant(z, fn(lo), fn(hi));
      return fn(z);
    }
    if (n_ % 2 == 0) return secant(z, detail::ipow(lo, n_), detail::ipow(hi, n_));
    if (lo >= 0.0) return secant(z, detail::ipow(lo, n_), detail::ipow(hi, n_));
    if (hi <= 0.0) return detail::ipow(z, n_);
    if (pow_cc_secant_) return secant(z, detail::ipow(lo, n_), detail::ipow(hi, n_));
    if (z <= pow_tcc_) return detail::ipow(z, n_);
    const double s = n_ * detail::ipow(pow_tcc_, n_ - 1);
    return detail::ipow(pow_tcc_, n_) + s * (z - pow_tcc_);
  }

  Op op_;
  int n_;
  Interval dom_;
  double zmin_ = 0, zmax_ = 0;
  bool degenerate_ = false;
  double exact_ = 0;
  detail::CosEnv cv_env_, cc_env_;
  double cv_shift_ = 0, cc_shift_ = 0;
  bool pow_cv_secant_ = false, pow_cc_secant_ = false;
  double pow_tcv_ = 0, pow_tcc_ = 0;
};

inline ScalarEnvelope scalar_envelope(Op op, int exponent, const Interval& dom) {
  return ScalarEnvelope(op, exponent, dom);
}

// ---------------------------------------------------------------------------
// McCormick arithmetic. Every rule ends with a cut against the interval
// bounds. Operations whose operands all have degenerate boxes short-circuit
// to exact real arithmetic so relaxations over a point reproduce function
// values bitwise.
// ---------------------------------------------------------------------------

inline McCormick mc_neg(const McCormick& a) { return {-a.box, -a.cc, -a.cv}; }

inline McCormick mc_add(const McCormick& a, const McCormick& b) {
  McCormick r{a.box + b.box, a.cv + b.cv, a.cc + b.cc};
  cut(r);
  return r;
}

inline McCormick mc_sub(const McCormick& a, const McCormick& b) {
  McCormick r{a.box - b.box, a.cv - b.cc, a.cc - b.cv};
  cut(r);
  return r;
}

inline McCormick mc_mul(const McCormick& a, const McCormick& b) {
  if (a.box.degenerate() && b.box.degenerate()) return mc_constant(a.box.lo * b.box.lo);
  const double al = a.box.lo, au = a.box.hi, bl = b.box.lo, bu = b.box.hi;
  // c * u relaxed from below / above for a constant multiplier c.
  auto lo_term = [](double c, const McCormick& u) { return c >= 0 ? c * u.cv : c * u.cc; };
  auto hi_term = [](double c, const McCormick& u) { return c >= 0 ? c * u.cc : c * u.cv; };
  const double cv = std::max(lo_term(bl, a) + lo_term(al, b) - al * bl,
                             lo_term(bu, a) + lo_term(au, b) - au * bu);
  const double cc = std::min(hi_term(bl, a) + hi_term(au, b) - au * bl,
                             hi_term(bu, a) + hi_term(al, b) - al * bu);
  McCormick r{a.box * b.box, cv, cc};
  cut(r);
  return r;
}

//! Composition rule: envelope values taken at the child's relaxation values
//! mid-cut toward the function's minimizer / maximizer on the child range.
inline McCormick mc_compose(const McCormick& g, const ScalarEnvelope& env, const Interval& out_box) {
  const double zcv = mid3(g.cv, g.cc, env.zmin());
  const double zcc = mid3(g.cv, g.cc, env.zmax());
  McCormick r{out_box, env.cv(zcv), env.cc(zcc)};
  cut(r);
  return r;
}

inline McCormick mc_pow(const McCormick& a, int n) {
  if (a.box.degenerate()) return mc_constant(detail::RealOps::pow_int(a.box.lo, n));
  if (n == 0) return mc_constant(1.0);
  if (n == 1) return a;
  return mc_compose(a, ScalarEnvelope(Op::Pow, n, a.box), pow_int(a.box, n));
}

inline McCormick mc_div(const McCormick& a, const McCormick& b) {
  if (a.box.degenerate() && b.box.degenerate()) {
    if (b.box.lo == 0.0) throw DomainError("division by zero");
    return mc_constant(a.box.lo / b.box.lo);
  }
  return mc_mul(a, mc_pow(b, -1));
}

inline McCormick mc_exp(const McCormick& a) {
  if (a.box.degenerate()) return mc_constant(std::exp(a.box.lo));
  return mc_compose(a, ScalarEnvelope(Op::Exp, 0, a.box), exp(a.box));
}

inline McCormick mc_ln(const McCormick& a) {
  if (a.box.degenerate()) return mc_constant(detail::RealOps::ln(a.box.lo));
  return mc_compose(a, ScalarEnvelope(Op::Ln, 0, a.box), ln(a.box));
}

inline McCormick mc_sqrt(const McCormick& a) {
  if (a.box.degenerate()) return mc_constant(detail::RealOps::sqrt(a.box.lo));
  return mc_compose(a, ScalarEnvelope(Op::Sqrt, 0, a.box), sqrt(a.box));
}

inline McCormick mc_sin(const McCormick& a) {
  if (a.box.degenerate()) return mc_constant(std::sin(a.box.lo));
  return mc_compose(a, ScalarEnvelope(Op::Sin, 0, a.box), sin(a.box));
}

inline McCormick mc_cos(const McCormick& a) {
  if (a.box.degenerate()) return mc_constant(std::cos(a.box.lo));
  return mc_compose(a, ScalarEnvelope(Op::Cos, 0, a.box), cos(a.box));
}

namespace detail {
struct McCormickOps {
  static McCormick constant(double c) { return mc_constant(c); }
  static McCormick neg(const McCormick& a) { return mc_neg(a); }
  static McCormick add(const McCormick& a, const McCormick& b) { return mc_add(a, b); }
  static McCormick sub(const McCormick& a, const McCormick& b) { return mc_sub(a, b); }
  static McCormick mul(const McCormick& a, const McCormick& b) { return mc_mul(a, b); }
  static McCormick div(const McCormick& a, const McCormick& b) { return mc_div(a, b); }
  static McCormick exp(const McCormick& a) { return mc_exp(a); }
  static McCormick ln(const McCormick& a) { return mc_ln(a); }
  static McCormick sqrt(const McCormick& a) { return mc_sqrt(a); }
  static McCormick sin(const McCormick& a) { return mc_sin(a); }
  static McCormick cos(const McCormick& a) { return mc_cos(a); }
  static McCormick pow_int(const McCormick& a, int n) { return mc_pow(a, n); }
};
}  // namespace detail

//! Relaxation of an expression over a fixed joint box (decision coordinates
//! first, then uncertainty coordinates).
class RelaxationScheme {
 public:
  //! `joint` is the decision box followed by the uncertainty box; `nx` gives
  //! the split (defaults to the number of decision variables the expression
  //! uses). Dimensions the expression does not reference may trail each part.
  RelaxationScheme(const ExprGraph& g, Box joint, int nx = -1)
      : g_(&g), box_(std::move(joint)), nx_(nx < 0 ? g.n_x() : nx) {
    if (g.n_x() > nx_ || nx_ + g.n_w() > static_cast<int>(box_.size()))
      throw Error("scheme box dimension does not match expression");
  }

  const Box& box() const { return box_; }
  const ExprGraph& graph() const { return *g_; }

  //! Convex/concave relaxation values at a query point (joint coordinates).
  //! Coordinates are mid-cut into the box before propagation.
  McCormick relax_at(std::span<const double> p) const {
    if (p.size() != box_.size()) throw Error("query point dimension does not match scheme");
    return g_->eval_with<McCormick, detail::McCormickOps>(
        [&](int i) { return mc_variable(box_[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i)]); },
        [&](int j) {
          const std::size_t k = static_cast<std::size_t>(nx_ + j);
          return mc_variable(box_[k], p[k]);
        });
  }

 private:
  const ExprGraph* g_;
  Box box_;
  int nx_;
};

}  // namespace jmc
