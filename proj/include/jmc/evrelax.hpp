#pragma once

// Convex and concave relaxations of F(x) = E[f(x, omega)] over a box X:
// partition the uncertainty box into cells, relax f over each joint box
// X x cell, and combine the per-cell relaxations at the conditional means,
//
//   F_cv(x) = sum_i P(cell_i) * f_cv_{X x cell_i}(x, E[omega | cell_i]),
//
// and symmetrically for F_cc. Convexity in x survives the sum because each
// term is evaluated at a fixed omega point, and the Jensen direction of each
// term is covered by conditioning on the cell. Refining the partition with
// the square-width rule from partition.hpp gives a scheme whose cv/cc gap
// shrinks like w(X)^2.

#include <cstdint>
#include <bit>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jmc/common.hpp"
#include "jmc/dist.hpp"
#include "jmc/expr.hpp"
#include "jmc/interval.hpp"
#include "jmc/mccormick.hpp"
#include "jmc/partition.hpp"

namespace jmc {

//! Relaxations of E[f(x, omega)] over a fixed box X and uncertainty
//! partition. Construction precomputes every per-cell weight and relaxation
//! scheme and verifies f is domain-valid on every joint box, so evaluation
//! cannot hit domain errors later. Immutable afterwards; evaluations are
//! pure and thread-safe.
class EVRelaxation {
 public:
  EVRelaxation(ExprGraph integrand, Box X, IntervalPartition partition,
               const ProductDistribution& law)
      : g_(std::make_shared<const ExprGraph>(std::move(integrand))),
        x_box_(std::move(X)),
        part_(std::move(partition)),
        weights_(weights(part_, law)) {
    if (static_cast<int>(x_box_.size()) < g_->n_x())
      throw Error("relaxation box has fewer dimensions than the integrand uses");
    if (g_->n_w() > static_cast<int>(part_.parent.size()))
      throw Error("integrand references more random components than the partitioned box has");

    schemes_.reserve(part_.size());
    for (std::size_t i = 0; i < part_.size(); ++i) {
      Box joint = x_box_;
      joint.insert(joint.end(), part_.cells[i].begin(), part_.cells[i].end());
      try {
        (void)eval_interval(*g_, x_box_, part_.cells[i]);  // eager domain check
        schemes_.emplace_back(*g_, std::move(joint), static_cast<int>(x_box_.size()));
      } catch (const DomainError& e) {
        throw DomainError("integrand domain violation on cell " + std::to_string(i) + " of " +
                          std::to_string(part_.size()) + ": " + e.what());
      }
    }
  }

  const Box& x_box() const { return x_box_; }
  const IntervalPartition& partition() const { return part_; }
  const PartitionedWeights& cell_weights() const { return weights_; }
  const ExprGraph& integrand() const { return *g_; }

  //! Both relaxation values at x. Cells contribute in lexicographic order
  //! and the weighted terms are combined by pairwise summation, so the
  //! result does not depend on evaluation scheduling.
  std::pair<double, double> eval_bounds(std::span<const double> x) const {
    if (x.size() != x_box_.size()) throw Error("query point dimension does not match relaxation");
    if (!contains(x_box_, x)) throw Error("query point lies outside the relaxation box");

    std::vector<double> p(x.size() + part_.parent.size());
    std::copy(x.begin(), x.end(), p.begin());
    std::vector<double> cv_terms(part_.size()), cc_terms(part_.size());
    for (std::size_t i = 0; i < part_.size(); ++i) {
      const std::vector<double>& m = weights_.m[i];
      std::copy(m.begin(), m.end(), p.begin() + static_cast<std::ptrdiff_t>(x.size()));
      const McCormick r = schemes_[i].relax_at(p);
      cv_terms[i] = weights_.p[i] * r.cv;
      cc_terms[i] = weights_.p[i] * r.cc;
    }
    return {pairwise_sum(cv_terms), pairwise_sum(cc_terms)};
  }

  double eval_cv(std::span<const double> x) const { return eval_bounds(x).first; }
  double eval_cc(std::span<const double> x) const { return eval_bounds(x).second; }

 private:
  std::shared_ptr<const ExprGraph> g_;  // schemes point into this graph
  Box x_box_;
  IntervalPartition part_;
  PartitionedWeights weights_;
  std::vector<RelaxationScheme> schemes_;
};

//! Bounds on F(x) at a single point: the degenerate box [x,x] makes every
//! per-cell relaxation exact in x, leaving relaxations in omega only, so
//! lower <= F(x) <= upper.
inline std::pair<double, double> point_bounds(const ExprGraph& integrand,
                                              std::span<const double> x,
                                              const IntervalPartition& partition,
                                              const ProductDistribution& law) {
  Box degenerate;
  degenerate.reserve(x.size());
  for (double xi : x) degenerate.push_back(Interval::point(xi));
  EVRelaxation r(integrand, std::move(degenerate), partition, law);
  return r.eval_bounds(x);
}

struct SchemeEval {
  double cv = 0.0;
  double cc = 0.0;
  double gap = 0.0;  // cc - cv, nonnegative
};

//! The convergent scheme: every queried box X gets the partition prescribed
//! by the square-width refinement rule, so the cv/cc gap contracts at second
//! order as X shrinks. Built relaxations are cached per X because
//! convergence studies re-query nested box sequences; the cache is
//! internally synchronized.
class ConvergentScheme {
 public:
  ConvergentScheme(ExprGraph integrand, Box parent, ProductDistribution law, double K)
      : g_(std::move(integrand)), parent_(std::move(parent)), law_(std::move(law)), k_(K) {
    if (!(K > 0.0)) throw DomainError("refinement constant K must be positive");
    if (g_.n_w() > static_cast<int>(parent_.size()))
      throw Error("integrand references more random components than the parent box has");
  }

  const Box& parent() const { return parent_; }
  const ProductDistribution& law() const { return law_; }
  double refinement_constant() const { return k_; }

  //! Relaxation values and gap at x for the query box X.
  SchemeEval scheme_eval(const Box& X, std::span<const double> x) const {
    const std::shared_ptr<const EVRelaxation> r = relaxation_for(X);
    const auto [cv, cc] = r->eval_bounds(x);
    return {cv, cc, cc - cv};
  }

  //! The cached relaxation for X, built on first use.
  std::shared_ptr<const EVRelaxation> relaxation_for(const Box& X) const {
    for (const Interval& s : X)
      if (!(s.hi > s.lo))
        throw Error("degenerate query box: the refinement rule needs w(X) > 0; "
                    "use point_bounds for single-point queries");
    std::vector<std::uint64_t> key;
    key.reserve(2 * X.size());
    for (const Interval& s : X) {
      key.push_back(std::bit_cast<std::uint64_t>(s.lo));
      key.push_back(std::bit_cast<std::uint64_t>(s.hi));
    }
    {
      const std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    auto built = std::make_shared<const EVRelaxation>(g_, X, refine_map_phi(parent_, X, k_, law_),
                                                      law_);
    const std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(std::move(key), std::move(built)).first->second;
  }

 private:
  ExprGraph g_;
  Box parent_;
  ProductDistribution law_;
  double k_;
  mutable std::mutex mu_;
  mutable std::map<std::vector<std::uint64_t>, std::shared_ptr<const EVRelaxation>> cache_;
};

}  // namespace jmc
