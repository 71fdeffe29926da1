#pragma once

// Gauss-Legendre quadrature: cached nodes/weights on [-1,1] and a tensor
// rule over a box. Node tables are built on demand by Newton iteration on
// the Legendre recurrence and memoized behind a mutex.

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/interval.hpp"

namespace jmc {

struct GaussRule {
  std::vector<double> x, w;  // nodes and weights on [-1, 1]
};

inline const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw Error("quadrature rule needs at least one node");
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussRule r;
  r.x.assign(static_cast<std::size_t>(n), 0.0);
  r.w.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    r.x[static_cast<std::size_t>(i)] = -x;
    r.x[static_cast<std::size_t>(n - 1 - i)] = x;
    r.w[static_cast<std::size_t>(i)] = r.w[static_cast<std::size_t>(n - 1 - i)] =
        2.0 / ((1.0 - x * x) * pp * pp);
  }
  return cache.emplace(n, std::move(r)).first->second;
}

//! Tensor Gauss-Legendre integral of fn over a box with n nodes per
//! dimension. fn receives the point coordinates.
template <typename Fn>
double tensor_quad(Fn&& fn, const Box& box, int n) {
  const GaussRule& r = gauss_legendre(n);
  const std::size_t nd = box.size();
  if (nd == 0) throw Error("quadrature box must have at least one dimension");

  std::vector<double> mid(nd), half(nd);
  double jac = 1.0;
  for (std::size_t d = 0; d < nd; ++d) {
    mid[d] = box[d].mid();
    half[d] = 0.5 * box[d].width();
    jac *= half[d];
  }

  std::size_t total = 1;
  for (std::size_t d = 0; d < nd; ++d) total *= static_cast<std::size_t>(n);

  std::vector<double> vals;
  vals.reserve(total);
  std::vector<int> idx(nd, 0);
  std::vector<double> pt(nd);
  for (std::size_t c = 0; c < total; ++c) {
    double wgt = 1.0;
    for (std::size_t d = 0; d < nd; ++d) {
      const auto k = static_cast<std::size_t>(idx[d]);
      pt[d] = mid[d] + half[d] * r.x[k];
      wgt *= r.w[k];
    }
    vals.push_back(wgt * fn(std::span<const double>(pt)));
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < n) break;
      idx[d] = 0;
    }
  }
  return jac * pairwise_sum(vals);
}

}  // namespace jmc
