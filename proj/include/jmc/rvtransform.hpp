#pragma once

// Factorable random-variable transforms: express a random vector omega as
// omega = psi(gamma) where gamma follows a primitive product law and each
// component of psi is an expression graph. Relaxing f(x, psi(gamma)) over
// gamma-space then bounds E[f(x, omega)] even when omega itself has no
// closed-form conditional means (correlated components, exotic laws).
//
// Three constructions are provided:
//   * inverse-CDF transforms of common truncated univariate laws, with
//     gamma uniform on [0,1],
//   * the Box-Muller map from a uniform pair to a standard normal pair,
//     including the disc-truncated variant,
//   * affine maps omega = d + A*(omega_hat - E[omega_hat]) that impose a
//     target mean and covariance on top of another transform.

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/dist.hpp"
#include "jmc/expr.hpp"
#include "jmc/interval.hpp"
#include "jmc/oracle.hpp"

namespace jmc {

using Matrix = std::vector<std::vector<double>>;

// ---------------------------------------------------------------------------
// small dense symmetric eigensolver (cyclic Jacobi); dimensions stay tiny

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void check_square(const Matrix& a, const char* what) {
  if (a.empty()) throw DomainError(std::string(what) + " must be non-empty");
  for (const auto& row : a)
    if (row.size() != a.size()) throw DomainError(std::string(what) + " must be square");
}

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (const auto& row : a)
    for (double v : row) m = std::max(m, std::fabs(v));
  return m;
}

//! Eigendecomposition A = V diag(lam) V^T of a symmetric matrix by cyclic
//! Jacobi rotations. Returns (lam, V); sweeps until every off-diagonal entry
//! is at most 1e-14 times the largest input magnitude.
inline std::pair<std::vector<double>, Matrix> jacobi_eigensym(Matrix a) {
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  const double tol = 1e-14 * std::max(1.0, max_abs(a));

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::fabs(a[p][q]));
    if (off <= tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) <= tol) continue;
        const double tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        a[p][q] = a[q][p] = 0.0;  // rotation zeroes this pair by construction
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> lam(n);
  for (std::size_t i = 0; i < n; ++i) lam[i] = a[i][i];
  return {lam, v};
}

//! |det A| by partial-pivot elimination; used only to reject singular maps.
inline double abs_det(Matrix a) {
  const std::size_t n = a.size();
  double det = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    if (a[piv][c] == 0.0) return 0.0;
    if (piv != c) std::swap(a[piv], a[c]);
    det *= a[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  return std::fabs(det);
}

}  // namespace detail

inline bool is_symmetric(const Matrix& a, double tol = 1e-12) {
  detail::check_square(a, "matrix");
  const double scale = std::max(1.0, detail::max_abs(a));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if (std::fabs(a[i][j] - a[j][i]) > tol * scale) return false;
  return true;
}

inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
  detail::check_square(a, "matrix");
  detail::check_square(b, "matrix");
  if (a.size() != b.size()) throw DomainError("matrix dimensions do not match");
  const std::size_t n = a.size();
  Matrix c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

//! Unique symmetric positive definite square root of a symmetric positive
//! definite matrix. Eigenvalues must clear 1e-12 relative to the largest one.
inline Matrix matrix_sqrt(const Matrix& c) {
  detail::check_square(c, "matrix square root input");
  if (!is_symmetric(c)) throw DomainError("matrix square root needs a symmetric input");
  auto [lam, v] = detail::jacobi_eigensym(c);
  const std::size_t n = c.size();
  double lam_max = 0.0;
  for (double l : lam) lam_max = std::max(lam_max, std::fabs(l));
  for (double l : lam)
    if (!(l > 1e-12 * std::max(1.0, lam_max)))
      throw DomainError("matrix square root needs a positive definite input");

  Matrix s(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += v[i][k] * std::sqrt(lam[k]) * v[j][k];
      s[i][j] = acc;
    }
  for (std::size_t i = 0; i < n; ++i)  // symmetrize away rotation roundoff
    for (std::size_t j = i + 1; j < n; ++j) s[i][j] = s[j][i] = 0.5 * (s[i][j] + s[j][i]);
  return s;
}

// ---------------------------------------------------------------------------
// FactorableRV

//! A random vector omega = psi(gamma): `base` is the primitive product law of
//! gamma, `psi` holds one expression graph per omega component (w-variables
//! refer to gamma components; x-variables are not allowed), and `gamma_box`
//! is the support of gamma. Immutable after construction.
struct FactorableRV {
  ProductDistribution base;
  std::vector<ExprGraph> psi;
  Box gamma_box;

  int dims() const { return static_cast<int>(psi.size()); }
};

namespace detail {

inline FactorableRV make_rv(ProductDistribution base, std::vector<ExprGraph> psi) {
  for (const ExprGraph& g : psi) {
    if (g.n_x() > 0) throw Error("transform components must not reference decision variables");
    if (g.n_w() > base.dims()) throw Error("transform references more primitive components than the law has");
  }
  FactorableRV rv{std::move(base), std::move(psi), {}};
  rv.gamma_box = rv.base.support();
  return rv;
}

}  // namespace detail

//! Wrap a product law as the trivial transform omega = gamma.
inline FactorableRV identity_rv(ProductDistribution law) {
  std::vector<ExprGraph> psi;
  for (int j = 0; j < law.dims(); ++j) {
    ExprGraph g;
    g.set_root(g.add_var_w(j));
    psi.push_back(std::move(g));
  }
  return detail::make_rv(std::move(law), std::move(psi));
}

// ---------------------------------------------------------------------------
// inverse-CDF transforms of truncated univariate laws, gamma uniform on [0,1]
//
// Every entry uses the same composition: with P_eta the untruncated CDF,
//   psi(gamma) = P_eta^{-1}[P_eta(lo) + (P_eta(hi) - P_eta(lo)) * gamma],
// so psi(0) = lo and psi(1) = hi up to roundoff. Fractional roots are
// emitted as exp(ln(u)/beta).

namespace detail {

inline FactorableRV one_dim_rv(const std::string& text) {
  return make_rv(ProductDistribution({Distribution::uniform(0.0, 1.0)}), {parse(text)});
}

inline void check_truncation(double lo, double hi, double support_lo, const char* name) {
  if (!(lo < hi)) throw DomainError(std::string(name) + ": truncation interval is degenerate");
  if (!(lo >= support_lo))
    throw DomainError(std::string(name) + ": truncation leaves the distribution support");
}

}  // namespace detail

//! omega ~ Exp(lambda) truncated to [lo, hi]:
//! psi(g) = -(1/lambda) ln[e^(-lambda lo) + (e^(-lambda hi) - e^(-lambda lo)) g]
inline FactorableRV truncated_exponential_rv(double lambda, double lo, double hi) {
  if (!(lambda > 0.0)) throw DomainError("truncated exponential: lambda must be positive");
  detail::check_truncation(lo, hi, 0.0, "truncated exponential");
  const double e0 = std::exp(-lambda * lo), e1 = std::exp(-lambda * hi);
  return detail::one_dim_rv(detail::fmt_g17(-1.0 / lambda) + "*ln(" + detail::fmt_g17(e0) + " + " +
                            detail::fmt_g17(e1 - e0) + "*w1)");
}

//! omega ~ Weibull(alpha, beta) truncated to [lo, hi], lo > 0 (the root is
//! written exp(ln(u)/beta), which needs u bounded away from zero):
//! psi(g) = alpha * (-ln[e^(-(lo/a)^b) + (e^(-(hi/a)^b) - e^(-(lo/a)^b)) g])^(1/beta)
inline FactorableRV truncated_weibull_rv(double alpha, double beta, double lo, double hi) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw DomainError("truncated weibull: alpha and beta must be positive");
  if (!(lo > 0.0))
    throw DomainError("truncated weibull: lower truncation must be positive for the exp-ln root form");
  detail::check_truncation(lo, hi, 0.0, "truncated weibull");
  const double c0 = std::exp(-std::pow(lo / alpha, beta));
  const double c1 = std::exp(-std::pow(hi / alpha, beta));
  return detail::one_dim_rv(detail::fmt_g17(alpha) + "*exp(ln(-ln(" + detail::fmt_g17(c0) +
                            " + " + detail::fmt_g17(c1 - c0) + "*w1))/" + detail::fmt_g17(beta) +
                            ")");
}

//! omega ~ Cauchy(location alpha, scale beta) truncated to [lo, hi]:
//! psi(g) = beta tan[atan((lo-a)/b) + (atan((hi-a)/b) - atan((lo-a)/b)) g] + alpha
//! with tan u spelled sin u / cos u and the arctangents precomputed.
inline FactorableRV truncated_cauchy_rv(double alpha, double beta, double lo, double hi) {
  if (!(beta > 0.0)) throw DomainError("truncated cauchy: scale beta must be positive");
  detail::check_truncation(lo, hi, -std::numeric_limits<double>::infinity(), "truncated cauchy");
  const double aL = std::atan((lo - alpha) / beta), aU = std::atan((hi - alpha) / beta);
  const std::string arg = "(" + detail::fmt_g17(aL) + " + " + detail::fmt_g17(aU - aL) + "*w1)";
  return detail::one_dim_rv(detail::fmt_g17(beta) + "*(sin" + arg + "/cos" + arg + ") + " +
                            detail::fmt_g17(alpha));
}

//! omega ~ Rayleigh(sigma) truncated to [lo, hi]:
//! psi(g) = sqrt(-2 sigma^2 ln[e^(-lo^2/(2s^2)) + (e^(-hi^2/(2s^2)) - e^(-lo^2/(2s^2))) g])
inline FactorableRV truncated_rayleigh_rv(double sigma, double lo, double hi) {
  if (!(sigma > 0.0)) throw DomainError("truncated rayleigh: sigma must be positive");
  detail::check_truncation(lo, hi, 0.0, "truncated rayleigh");
  const double r0 = std::exp(-lo * lo / (2.0 * sigma * sigma));
  const double r1 = std::exp(-hi * hi / (2.0 * sigma * sigma));
  return detail::one_dim_rv("sqrt(" + detail::fmt_g17(-2.0 * sigma * sigma) + "*ln(" +
                            detail::fmt_g17(r0) + " + " + detail::fmt_g17(r1 - r0) + "*w1))");
}

//! omega ~ Pareto(scale m, shape alpha) truncated to [lo, hi], lo >= m:
//! psi(g) = m [(m/lo)^a + ((m/hi)^a - (m/lo)^a) g]^(-1/alpha)
inline FactorableRV truncated_pareto_rv(double m, double alpha, double lo, double hi) {
  if (!(m > 0.0) || !(alpha > 0.0))
    throw DomainError("truncated pareto: m and alpha must be positive");
  detail::check_truncation(lo, hi, m, "truncated pareto");
  const double pL = std::pow(m / lo, alpha), pU = std::pow(m / hi, alpha);
  return detail::one_dim_rv(detail::fmt_g17(m) + "*exp(" + detail::fmt_g17(-1.0 / alpha) +
                            "*ln(" + detail::fmt_g17(pL) + " + " + detail::fmt_g17(pU - pL) +
                            "*w1))");
}

//! Catalog dispatcher keyed by the config-file kind strings. `params` must
//! carry exactly the named coefficients the kind needs.
inline FactorableRV inverse_cdf_transform(std::string_view kind,
                                          const std::map<std::string, double>& params,
                                          const Interval& truncation) {
  auto need = [&](const char* name) {
    auto it = params.find(name);
    if (it == params.end())
      throw ConfigError(std::string("inverse-cdf transform '") + std::string(kind) +
                        "' needs parameter '" + name + "'");
    return it->second;
  };
  const double lo = truncation.lo, hi = truncation.hi;
  if (kind == "truncated-exponential") return truncated_exponential_rv(need("lambda"), lo, hi);
  if (kind == "truncated-weibull") return truncated_weibull_rv(need("alpha"), need("beta"), lo, hi);
  if (kind == "truncated-cauchy") return truncated_cauchy_rv(need("alpha"), need("beta"), lo, hi);
  if (kind == "truncated-rayleigh") return truncated_rayleigh_rv(need("sigma"), lo, hi);
  if (kind == "truncated-pareto") return truncated_pareto_rv(need("m"), need("alpha"), lo, hi);
  throw ConfigError("unknown inverse-cdf transform kind '" + std::string(kind) + "'");
}

// ---------------------------------------------------------------------------
// Box-Muller

//! Standard normal pair from a uniform pair:
//!   omega1 = sqrt(-2 ln g1) cos(2 pi g2), omega2 = sqrt(-2 ln g1) sin(2 pi g2).
//! g1's lower end is clipped to `delta` to keep ln bounded on the box.
inline FactorableRV box_muller(double delta = 1e-12) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("box-muller: delta must lie in (0,1)");
  const std::string r = "sqrt(-2*ln(w1))";
  const std::string ang = "(" + detail::fmt_g17(2.0 * PI) + "*w2)";
  return detail::make_rv(
      ProductDistribution({Distribution::uniform(delta, 1.0), Distribution::uniform(0.0, 1.0)}),
      {parse(r + "*cos" + ang), parse(r + "*sin" + ang)});
}

//! Box-Muller truncated to the disc omega1^2 + omega2^2 <= rbar^2, achieved by
//! restricting g1 to [exp(-rbar^2/2), 1].
inline FactorableRV box_muller_disc(double rbar) {
  if (!(rbar > 0.0)) throw DomainError("box-muller disc truncation needs a positive radius");
  return box_muller(std::exp(-0.5 * rbar * rbar));
}

// ---------------------------------------------------------------------------
// affine mean/covariance layer

//! E[omega_hat] for each component of `base`: closed form when the component
//! map is the identity, otherwise the quadrature oracle over gamma.
inline std::vector<double> component_means(const FactorableRV& base) {
  std::vector<double> mu(static_cast<std::size_t>(base.dims()));
  for (int j = 0; j < base.dims(); ++j) {
    const ExprGraph& g = base.psi[static_cast<std::size_t>(j)];
    const ExprNode& root = g.node(g.root());
    if (root.op == Op::VarW) {
      mu[static_cast<std::size_t>(j)] = base.base.component(static_cast<int>(root.value)).mean();
    } else {
      mu[static_cast<std::size_t>(j)] = quad_expect(g, {}, base.base).value;
    }
  }
  return mu;
}

//! omega = d + A (omega_hat - E[omega_hat]) on top of `base`. A must be
//! square and nonsingular but is otherwise taken verbatim, so published
//! root matrices that are not exactly symmetric can be reproduced.
inline FactorableRV affine_transform(const FactorableRV& base, const std::vector<double>& d,
                                     const Matrix& a) {
  detail::check_square(a, "affine transform matrix");
  const std::size_t n = a.size();
  if (static_cast<int>(n) != base.dims())
    throw DomainError("affine transform dimension does not match the base transform");
  if (d.size() != n) throw DomainError("affine transform mean length does not match the matrix");
  if (!(detail::abs_det(a) > 0.0)) throw DomainError("affine transform matrix is singular");

  const std::vector<double> mu = component_means(base);
  std::vector<ExprGraph> psi;
  psi.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // row graph over omega_hat, then substitute the base transform
    ExprGraph row;
    std::int32_t acc = row.add_const(d[i]);
    for (std::size_t j = 0; j < n; ++j) {
      const std::int32_t centered =
          row.add_binary(Op::Sub, row.add_var_w(static_cast<int>(j)), row.add_const(mu[j]));
      acc = row.add_binary(Op::Add, acc, row.add_binary(Op::Mul, row.add_const(a[i][j]), centered));
    }
    row.set_root(acc);
    row.declare_dims(0, static_cast<int>(n));
    psi.push_back(compose(row, base.psi));
  }
  return detail::make_rv(base.base, std::move(psi));
}

//! omega = d + C_half (omega_hat - E[omega_hat]) where C_half must be a
//! symmetric positive definite covariance root; when the base components are
//! uncorrelated with unit variance the result has mean d and covariance
//! C_half^2.
inline FactorableRV covariance_transform(const FactorableRV& base, const std::vector<double>& d,
                                         const Matrix& c_half) {
  detail::check_square(c_half, "covariance transform matrix");
  if (!is_symmetric(c_half))
    throw DomainError("covariance transform needs a symmetric root matrix");
  auto lam = detail::jacobi_eigensym(c_half).first;
  double lam_max = 0.0;
  for (double l : lam) lam_max = std::max(lam_max, std::fabs(l));
  for (double l : lam)
    if (!(l > 1e-12 * std::max(1.0, lam_max)))
      throw DomainError("covariance transform needs a positive definite root matrix");
  return affine_transform(base, d, c_half);
}

inline FactorableRV covariance_transform(ProductDistribution base, const std::vector<double>& d,
                                         const Matrix& c_half) {
  return covariance_transform(identity_rv(std::move(base)), d, c_half);
}

// ---------------------------------------------------------------------------
// concatenation and sampling

//! Stack independent transforms into one: gamma components are concatenated
//! in order, and each factor's psi is re-indexed onto its slice.
inline FactorableRV product_rv(const std::vector<FactorableRV>& factors) {
  if (factors.empty()) throw Error("product of transforms needs at least one factor");
  std::vector<Distribution> laws;
  int total = 0;
  for (const FactorableRV& f : factors) total += f.base.dims();

  std::vector<ExprGraph> psi;
  int offset = 0;
  for (const FactorableRV& f : factors) {
    for (int j = 0; j < f.base.dims(); ++j) laws.push_back(f.base.component(j));
    std::vector<ExprGraph> shift;  // w_j -> w_(offset+j)
    for (int j = 0; j < f.base.dims(); ++j) {
      ExprGraph g;
      g.set_root(g.add_var_w(offset + j));
      g.declare_dims(0, total);
      shift.push_back(std::move(g));
    }
    for (const ExprGraph& p : f.psi) {
      // compose wants exactly n_w substitutions; a component may use fewer
      // gamma variables than the factor law carries
      std::vector<ExprGraph> used(shift.begin(), shift.begin() + p.n_w());
      psi.push_back(compose(p, used));
    }
    offset += f.base.dims();
  }
  return detail::make_rv(ProductDistribution(std::move(laws)), std::move(psi));
}

//! One draw of omega: sample gamma from the primitive law, push through psi.
inline std::vector<double> sample_rv(const FactorableRV& rv, Rng& rng) {
  const std::vector<double> g = rv.base.sample([&rng]() { return rng.uniform01(); });
  std::vector<double> w(static_cast<std::size_t>(rv.dims()));
  for (int j = 0; j < rv.dims(); ++j)
    w[static_cast<std::size_t>(j)] = eval_real(rv.psi[static_cast<std::size_t>(j)], {}, g);
  return w;
}

//! Seeded Monte-Carlo estimate of E[f(x, omega)] with omega = psi(gamma):
//! samples gamma, maps each draw through psi numerically, evaluates f. With
//! the same seed this must agree with estimating E[f(x, psi(gamma))] from the
//! composed graph under the gamma law, up to roundoff.
inline Estimate mc_expect(const ExprGraph& f, std::span<const double> x, const FactorableRV& rv,
                          std::size_t n, std::uint64_t seed) {
  if (rv.dims() < f.n_w())
    throw Error("integrand references more random components than the transform provides");
  const std::vector<double> xv(x.begin(), x.end());
  Rng rng(seed);
  return detail::mc_accumulate(
      [&](std::size_t) {
        const std::vector<double> w = sample_rv(rv, rng);
        return eval_real(f, xv, w);
      },
      n, "mc");
}

}  // namespace jmc
