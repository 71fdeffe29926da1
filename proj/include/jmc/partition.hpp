#pragma once

// Tensor-product interval partitions of an uncertainty box and the
// X-dependent refinement rule that drives the convergent scheme: refine
// uniformly, per dimension, until every cell satisfies
// w(cell)^2 <= K * w(X)^2. Since probabilities sum to one, the certificate
// sum_i p_i w(cell_i)^2 <= K w(X)^2 follows.

#include <cmath>
#include <cstdint>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/dist.hpp"
#include "jmc/interval.hpp"

namespace jmc {

struct IntervalPartition {
  Box parent;
  std::vector<int> counts;              // cells per dimension
  std::vector<std::vector<Interval>> slices;  // per-dimension 1-d cells
  std::vector<Box> cells;               // tensor product, lexicographic, dim 0 slowest

  std::size_t size() const { return cells.size(); }
};

//! Uniform tensor grid. Cell k has per-dimension indices given by the mixed
//! radix decomposition of k with dimension 0 most significant. Adjacent cells
//! share endpoints exactly (each edge value is computed once).
inline IntervalPartition uniform_partition(const Box& parent, const std::vector<int>& counts) {
  if (parent.empty()) throw Error("partition parent must have at least one dimension");
  if (counts.size() != parent.size()) throw Error("one cell count per dimension required");
  IntervalPartition part;
  part.parent = parent;
  part.counts = counts;

  std::size_t total = 1;
  for (std::size_t d = 0; d < parent.size(); ++d) {
    const int n = counts[d];
    if (n < 1) throw Error("cell counts must be positive");
    if (total > (std::size_t{1} << 24) / static_cast<std::size_t>(n))
      throw Error("partition would exceed 2^24 cells; loosen K or shrink the query box");
    std::vector<double> edges(static_cast<std::size_t>(n) + 1);
    edges.front() = parent[d].lo;
    edges.back() = parent[d].hi;
    for (int k = 1; k < n; ++k)
      edges[static_cast<std::size_t>(k)] = parent[d].lo + parent[d].width() * k / n;
    std::vector<Interval> sl;
    sl.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k)
      sl.emplace_back(edges[static_cast<std::size_t>(k)], edges[static_cast<std::size_t>(k) + 1]);
    part.slices.push_back(std::move(sl));
    total *= static_cast<std::size_t>(n);
  }

  part.cells.reserve(total);
  const std::size_t nd = parent.size();
  std::vector<int> idx(nd, 0);
  for (std::size_t c = 0; c < total; ++c) {
    Box cell(nd, Interval(0, 0));
    for (std::size_t d = 0; d < nd; ++d) cell[d] = part.slices[d][static_cast<std::size_t>(idx[d])];
    part.cells.push_back(std::move(cell));
    for (std::size_t d = nd; d-- > 0;) {  // increment, dim 0 most significant
      if (++idx[d] < counts[d]) break;
      idx[d] = 0;
    }
  }
  return part;
}

//! Refinement rule: smallest per-dimension counts such that every cell width
//! obeys w <= sqrt(K) * w(X). Counts are verified against the cells actually
//! built and bumped if roundoff made a cell a hair too wide, so the
//! certificate holds exactly as computed.
inline IntervalPartition refine_map_phi(const Box& parent, const Box& X, double K,
                                        const ProductDistribution& law) {
  if (!(K > 0.0)) throw DomainError("refinement constant K must be positive");
  if (law.dims() != static_cast<int>(parent.size()))
    throw Error("law dimension does not match the partitioned box");
  const double wx = width(X);
  if (wx <= 0.0) throw DomainError("refinement rule needs a query box of positive width");
  const double cap2 = K * (wx * wx);
  const double target = std::sqrt(K) * wx;

  std::vector<int> counts(parent.size());
  for (std::size_t d = 0; d < parent.size(); ++d) {
    const double side = parent[d].width();
    if (side / target > 16777216.0)
      throw Error("partition would exceed 2^24 cells; loosen K or shrink the query box");
    int n = std::max(1, static_cast<int>(std::ceil(side / target - 1e-9)));
    for (;;) {
      // check the widths the grid would actually produce
      double worst = 0.0;
      double prev = parent[d].lo;
      for (int k = 1; k <= n; ++k) {
        const double edge = k == n ? parent[d].hi : parent[d].lo + side * k / n;
        worst = std::max(worst, edge - prev);
        prev = edge;
      }
      if (worst * worst <= cap2) break;
      ++n;
    }
    counts[d] = n;
  }
  return uniform_partition(parent, counts);
}

//! Per-cell probability and conditional mean under an independent product
//! law. Computed from per-dimension slices, then combined per cell.
struct PartitionedWeights {
  std::vector<double> p;
  std::vector<std::vector<double>> m;
};

inline PartitionedWeights weights(const IntervalPartition& part, const ProductDistribution& law) {
  const std::size_t nd = part.parent.size();
  if (law.dims() != static_cast<int>(nd)) throw Error("law dimension does not match the partition");

  std::vector<std::vector<double>> sp(nd), sm(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    const auto& dist = law.component(static_cast<int>(d));
    for (const Interval& s : part.slices[d]) {
      sp[d].push_back(dist.prob(s));
      sm[d].push_back(dist.cond_mean(s));
    }
  }

  PartitionedWeights w;
  w.p.reserve(part.size());
  w.m.reserve(part.size());
  std::vector<int> idx(nd, 0);
  for (std::size_t c = 0; c < part.size(); ++c) {
    double p = 1.0;
    std::vector<double> m(nd);
    for (std::size_t d = 0; d < nd; ++d) {
      p *= sp[d][static_cast<std::size_t>(idx[d])];
      m[d] = sm[d][static_cast<std::size_t>(idx[d])];
    }
    w.p.push_back(p);
    w.m.push_back(std::move(m));
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < part.counts[d]) break;
      idx[d] = 0;
    }
  }
  return w;
}

}  // namespace jmc
