#pragma once

// Reference estimators of F(x) = E[f(x, w)]: deterministic tensor
// Gauss-Legendre quadrature of f * density for low uncertainty dimension,
// and seeded Monte-Carlo with a 4-standard-error half width. The generator
// is mt19937_64 with an explicit 53-bit mantissa mapping so streams are
// identical across platforms and thread counts.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/dist.hpp"
#include "jmc/expr.hpp"
#include "jmc/quadrature.hpp"

namespace jmc {

//! Seeded portable uniform generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  //! Uniform on [0, 1) with 53 random bits.
  double uniform01() { return (eng_() >> 11) * 0x1.0p-53; }
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

//! Mixes an index into a seed; used to give each grid point its own
//! independent, thread-order-free stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t idx) {
  std::uint64_t z = idx + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z = z ^ (z >> 31);
  return seed ^ z;
}

struct Estimate {
  double value = 0.0;
  double half_width = 0.0;  // 0 for converged quadrature; 4 s / sqrt(n) for MC
  std::string method;
  std::size_t n = 0;
};

//! Tensor quadrature of f(x, .) * density over the law support, doubling
//! nodes per dimension until the estimate moves by less than rel_tol
//! relatively (or the node cap is reached; the last difference is then
//! reported as the half width).
inline Estimate quad_expect(const ExprGraph& f, std::span<const double> x,
                            const ProductDistribution& law, int start_nodes = 8,
                            double rel_tol = 1e-9, int max_nodes = 4096) {
  if (law.dims() > 2) throw Error("tensor quadrature limited to two uncertainty dimensions");
  if (law.dims() < f.n_w()) throw Error("integrand references more random components than the law has");
  const Box dom = law.support();
  const std::vector<double> xv(x.begin(), x.end());

  auto integrand = [&](std::span<const double> w) {
    return eval_real(f, xv, w) * law.density(w);
  };

  Estimate e;
  e.method = "quad";
  double prev = tensor_quad(integrand, dom, start_nodes);
  std::size_t evals = 1;
  for (std::size_t d = 0; d < dom.size(); ++d) evals *= static_cast<std::size_t>(start_nodes);
  for (int n = start_nodes * 2; n <= max_nodes; n *= 2) {
    const double cur = tensor_quad(integrand, dom, n);
    std::size_t cnt = 1;
    for (std::size_t d = 0; d < dom.size(); ++d) cnt *= static_cast<std::size_t>(n);
    evals += cnt;
    const double diff = std::fabs(cur - prev);
    prev = cur;
    if (diff <= rel_tol * std::max(1.0, std::fabs(cur))) {
      e.value = cur;
      e.half_width = 0.0;
      e.n = evals;
      return e;
    }
    e.half_width = diff;  // not yet converged; remember the movement
  }
  e.value = prev;
  e.n = evals;
  return e;  // cap reached: value with the last difference as half width
}

namespace detail {

//! Streaming mean and 4-standard-error half width over fn(i) samples.
template <typename SampleFn>
Estimate mc_accumulate(SampleFn&& fn, std::size_t n, const char* method) {
  if (n < 2) throw Error("Monte-Carlo estimate needs at least two samples");
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = fn(i);
    const double d = v - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (v - mean);
  }
  Estimate e;
  e.value = mean;
  e.half_width = 4.0 * std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  e.method = method;
  e.n = n;
  return e;
}

}  // namespace detail

//! Seeded Monte-Carlo estimate of E[f(x, w)] under a product law.
inline Estimate mc_expect(const ExprGraph& f, std::span<const double> x,
                          const ProductDistribution& law, std::size_t n, std::uint64_t seed) {
  if (law.dims() < f.n_w()) throw Error("integrand references more random components than the law has");
  const std::vector<double> xv(x.begin(), x.end());
  Rng rng(seed);
  return detail::mc_accumulate(
      [&](std::size_t) {
        const std::vector<double> w = law.sample([&rng]() { return rng.uniform01(); });
        return eval_real(f, xv, w);
      },
      n, "mc");
}

}  // namespace jmc
