#pragma once

// Primitive one-dimensional distributions with exact subinterval
// probabilities and conditional means, plus independent product composition.
// Each law is a truncation to its support interval; prob/cond_mean use the
// closed forms of the catalog (normal via pdf/cdf, gamma via upper incomplete
// gamma, beta via incomplete beta). Queries are pure and thread-safe.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/interval.hpp"
#include "jmc/special.hpp"

namespace jmc {

class Distribution {
 public:
  enum class Kind { Uniform, TruncatedNormal, TruncatedGamma, Beta };

  static Distribution uniform(double lo, double hi) {
    Distribution d(Kind::Uniform, Interval(lo, hi));
    d.require(lo < hi, "uniform support must have positive width");
    return d;
  }

  static Distribution truncated_normal(double mu, double sigma, double lo, double hi) {
    Distribution d(Kind::TruncatedNormal, Interval(lo, hi));
    d.require(sigma > 0.0, "sigma must be positive");
    d.require(lo < hi, "truncation must have positive width");
    d.mu_ = mu;
    d.sigma_ = sigma;
    d.cdf_lo_ = std_normal_cdf((lo - mu) / sigma);
    d.norm_ = std_normal_cdf((hi - mu) / sigma) - d.cdf_lo_;
    d.require(d.norm_ > 0.0, "truncation interval carries no probability mass");
    return d;
  }

  static Distribution truncated_gamma(double alpha, double beta, double lo, double hi) {
    Distribution d(Kind::TruncatedGamma, Interval(lo, hi));
    d.require(alpha > 0.0 && beta > 0.0, "gamma shape and scale must be positive");
    d.require(lo >= 0.0, "gamma support starts at nonnegative values");
    d.require(lo < hi, "truncation must have positive width");
    d.alpha_ = alpha;
    d.beta_ = beta;
    d.cdf_lo_ = gamma_upper(alpha, lo / beta);
    // upper incomplete gamma decreases in z, so this is positive
    d.norm_ = d.cdf_lo_ - gamma_upper(alpha, hi / beta);
    d.require(d.norm_ > 0.0, "truncation interval carries no probability mass");
    return d;
  }

  static Distribution beta(double alpha, double bparam) {
    Distribution d(Kind::Beta, Interval(0.0, 1.0));
    d.require(alpha > 0.0 && bparam > 0.0, "beta shape parameters must be positive");
    d.alpha_ = alpha;
    d.beta_ = bparam;
    d.norm_ = beta_complete(alpha, bparam);
    d.cdf_lo_ = 0.0;
    return d;
  }

  Kind kind() const { return kind_; }
  const Interval& support() const { return support_; }

  //! Probability of a subinterval of the support under the truncated law.
  double prob(const Interval& W) const {
    check_sub(W);
    switch (kind_) {
      case Kind::Uniform:
        return W.width() / support_.width();
      case Kind::TruncatedNormal:
        return (std_normal_cdf(z(W.hi)) - std_normal_cdf(z(W.lo))) / norm_;
      case Kind::TruncatedGamma:
        return (gamma_upper(alpha_, W.lo / beta_) - gamma_upper(alpha_, W.hi / beta_)) / norm_;
      case Kind::Beta:
        return (beta_inc(alpha_, beta_, W.hi) - beta_inc(alpha_, beta_, W.lo)) / norm_;
    }
    throw Error("unreachable");
  }

  //! Conditional expectation E[w | w in W] under the truncated law.
  double cond_mean(const Interval& W) const {
    check_sub(W);
    if (W.degenerate()) return W.lo;
    switch (kind_) {
      case Kind::Uniform:
        return W.mid();
      case Kind::TruncatedNormal: {
        const double a = z(W.lo), b = z(W.hi);
        const double mass = std_normal_cdf(b) - std_normal_cdf(a);
        if (mass <= 0.0) throw DomainError("conditional mean of a zero-probability interval");
        return mu_ + sigma_ * (std_normal_pdf(a) - std_normal_pdf(b)) / mass;
      }
      case Kind::TruncatedGamma: {
        const double mass = gamma_upper(alpha_, W.lo / beta_) - gamma_upper(alpha_, W.hi / beta_);
        if (mass <= 0.0) throw DomainError("conditional mean of a zero-probability interval");
        const double m1 = gamma_upper(alpha_ + 1.0, W.lo / beta_) - gamma_upper(alpha_ + 1.0, W.hi / beta_);
        return beta_ * m1 / mass;
      }
      case Kind::Beta: {
        const double mass = beta_inc(alpha_, beta_, W.hi) - beta_inc(alpha_, beta_, W.lo);
        if (mass <= 0.0) throw DomainError("conditional mean of a zero-probability interval");
        const double m1 = beta_inc(alpha_ + 1.0, beta_, W.hi) - beta_inc(alpha_ + 1.0, beta_, W.lo);
        return m1 / mass;
      }
    }
    throw Error("unreachable");
  }

  double mean() const { return cond_mean(support_); }

  //! Density of the truncated law at a support point.
  double density(double w) const {
    if (!support_.contains(w)) throw DomainError("density query outside the support");
    switch (kind_) {
      case Kind::Uniform:
        return 1.0 / support_.width();
      case Kind::TruncatedNormal:
        return std_normal_pdf(z(w)) / (sigma_ * norm_);
      case Kind::TruncatedGamma:
        if (w == 0.0) {
          if (alpha_ > 1.0) return 0.0;
          if (alpha_ == 1.0) return 1.0 / (beta_ * norm_);
          throw DomainError("gamma density diverges at zero for alpha < 1");
        }
        return std::exp((alpha_ - 1.0) * std::log(w) - w / beta_ - alpha_ * std::log(beta_)) / norm_;
      case Kind::Beta:
        return std::pow(w, alpha_ - 1.0) * std::pow(1.0 - w, beta_ - 1.0) / norm_;
    }
    throw Error("unreachable");
  }

  //! CDF of the truncated law (0 at support.lo, 1 at support.hi).
  double cdf(double w) const {
    if (!support_.contains(w)) throw DomainError("cdf query outside the support");
    switch (kind_) {
      case Kind::Uniform:
        return (w - support_.lo) / support_.width();
      case Kind::TruncatedNormal:
        return (std_normal_cdf(z(w)) - cdf_lo_) / norm_;
      case Kind::TruncatedGamma:
        return (cdf_lo_ - gamma_upper(alpha_, w / beta_)) / norm_;
      case Kind::Beta:
        return beta_inc(alpha_, beta_, w) / norm_;
    }
    throw Error("unreachable");
  }

  //! Inverse of cdf for u in [0,1], to absolute tolerance ~1e-12 of the
  //! support width. Used for seeded sampling.
  double quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile needs u in [0,1]");
    const double lo = support_.lo, hi = support_.hi;
    if (u == 0.0) return lo;
    if (u == 1.0) return hi;
    switch (kind_) {
      case Kind::Uniform:
        return lo + u * support_.width();
      case Kind::TruncatedNormal: {
        const double w = mu_ + sigma_ * std_normal_quantile(cdf_lo_ + u * norm_);
        return support_.clamp(w);
      }
      default: {
        const double w = newton_bisect([this, u](double t) { return cdf(t) - u; },
                                       [this](double t) { return density(t); }, lo, hi,
                                       std::max(1.0, std::fabs(lo) + std::fabs(hi)) * 1e-1);
        return support_.clamp(w);
      }
    }
  }

 private:
  Distribution(Kind k, Interval s) : kind_(k), support_(s) {}
  void require(bool ok, const char* msg) const {
    if (!ok) throw DomainError(msg);
  }
  void check_sub(const Interval& W) const {
    if (W.lo < support_.lo || W.hi > support_.hi)
      throw DomainError("query interval is not inside the support");
  }
  double z(double w) const { return (w - mu_) / sigma_; }

  Kind kind_;
  Interval support_;
  double mu_ = 0.0, sigma_ = 1.0;    // normal
  double alpha_ = 1.0, beta_ = 1.0;  // gamma shape/scale, beta shapes
  double cdf_lo_ = 0.0;              // untruncated CDF-like value at support.lo
  double norm_ = 1.0;                // untruncated mass of the support
};

//! Independent product of one-dimensional laws.
class ProductDistribution {
 public:
  ProductDistribution() = default;
  explicit ProductDistribution(std::vector<Distribution> factors) : factors_(std::move(factors)) {}

  int dims() const { return static_cast<int>(factors_.size()); }
  const Distribution& component(int i) const { return factors_.at(static_cast<std::size_t>(i)); }

  Box support() const {
    Box b;
    for (const auto& d : factors_) b.push_back(d.support());
    return b;
  }

  double prob(const Box& cell) const {
    check_dims(cell.size());
    double p = 1.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) p *= factors_[i].prob(cell[i]);
    return p;
  }

  std::vector<double> cond_mean(const Box& cell) const {
    check_dims(cell.size());
    std::vector<double> m(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i) m[i] = factors_[i].cond_mean(cell[i]);
    return m;
  }

  std::vector<double> mean() const { return cond_mean(support()); }

  double density(std::span<const double> w) const {
    check_dims(w.size());
    double p = 1.0;
    for (std::size_t i = 0; i < factors_.size(); ++i) p *= factors_[i].density(w[i]);
    return p;
  }

  //! One sample from the product law, consuming one uniform per component in
  //! component order from the supplied callable.
  template <typename Uniform01>
  std::vector<double> sample(Uniform01&& next) const {
    std::vector<double> w(factors_.size());
    for (std::size_t i = 0; i < factors_.size(); ++i) w[i] = factors_[i].quantile(next());
    return w;
  }

 private:
  void check_dims(std::size_t n) const {
    if (n != factors_.size()) throw Error("dimension mismatch against the product law");
  }
  std::vector<Distribution> factors_;
};

}  // namespace jmc
