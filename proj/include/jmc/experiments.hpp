#pragma once

// Experiment drivers behind the command-line tool: surface grids, shrink-
// ladder convergence tables, and point-bound certificates, each with a CSV
// or JSON writer. Outputs are deterministic for a fixed config and seed:
// every grid point draws from its own seed stream derived by index, so
// results do not depend on the thread count, and all numbers are printed
// with "%.17g" (C locale, '.' decimal).

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jmc/common.hpp"
#include "jmc/config.hpp"
#include "jmc/evrelax.hpp"
#include "jmc/oracle.hpp"
#include "jmc/partition.hpp"

namespace jmc {

//! Runs fn(i) for i in [0, n), split into contiguous blocks across at most
//! `threads` workers. Work items must be independent; results should be
//! written by index so the outcome is identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, threads < 1 ? 1 : static_cast<std::size_t>(threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex err_mu;
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t begin = n * t / workers, end = n * (t + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- surface ----------------------------------------------------------------

struct SurfaceRow {
  double x1 = 0.0, x2 = 0.0;
  double cv = 0.0, cc = 0.0;
  double mc = 0.0, mc_half = 0.0;
};

struct SurfaceTable {
  std::vector<int> counts;
  std::size_t cells = 0;
  std::vector<SurfaceRow> rows;  // x1-major grid order
  double max_gap = 0.0;
};

struct SurfaceResult {
  std::vector<SurfaceTable> tables;
};

inline SurfaceResult run_surface(const ExperimentConfig& cfg, std::uint64_t seed, int threads) {
  if (cfg.kind != ExperimentKind::surface)
    throw ConfigError("config kind is '" + std::string(to_string(cfg.kind)) + "', expected 'surface'");
  const Box& X = *cfg.x_box;
  const int g = cfg.grid;
  const std::size_t npts = static_cast<std::size_t>(g) * static_cast<std::size_t>(g);

  std::vector<std::array<double, 2>> pts(npts);
  for (std::size_t i = 0; i < npts; ++i) {
    const int i1 = static_cast<int>(i) / g, i2 = static_cast<int>(i) % g;
    pts[i] = {X[0].lo + (g == 1 ? 0.5 : static_cast<double>(i1) / (g - 1)) * X[0].width(),
              X[1].lo + (g == 1 ? 0.5 : static_cast<double>(i2) / (g - 1)) * X[1].width()};
  }

  // The sample-average column is partition-independent; draw it once per
  // point from a seed derived only from the point index.
  std::vector<Estimate> mc(npts);
  parallel_for(npts, threads, [&](std::size_t i) {
    mc[i] = mc_expect(cfg.relaxed, pts[i], cfg.rv.base,
                      static_cast<std::size_t>(cfg.mc_samples), mix_seed(seed, i));
  });

  SurfaceResult out;
  for (const auto& counts : cfg.partitions) {
    SurfaceTable table;
    table.counts = counts;
    const EVRelaxation rel(cfg.relaxed, X, uniform_partition(cfg.rv.gamma_box, counts),
                           cfg.rv.base);
    table.cells = rel.partition().size();
    table.rows.assign(npts, SurfaceRow{});
    parallel_for(npts, threads, [&](std::size_t i) {
      const auto [cv, cc] = rel.eval_bounds(pts[i]);
      table.rows[i] = {pts[i][0], pts[i][1], cv, cc, mc[i].value, mc[i].half_width};
    });
    for (const auto& r : table.rows) table.max_gap = std::max(table.max_gap, r.cc - r.cv);
    out.tables.push_back(std::move(table));
  }
  return out;
}

//! Output file name for one partition of a surface run: `base_<n>cells.csv`,
//! inserted before a trailing ".csv" if the base already carries one.
inline std::string surface_csv_path(std::string base, std::size_t cells) {
  const std::string suffix = "_" + std::to_string(cells) + "cells.csv";
  if (base.size() > 4 && base.compare(base.size() - 4, 4, ".csv") == 0)
    base.resize(base.size() - 4);
  return base + suffix;
}

inline void write_surface_csv(std::ostream& os, const SurfaceTable& t) {
  os << "x1,x2,Fcv,Fcc,F_mc,mc_halfwidth\n";
  for (const auto& r : t.rows)
    os << g17(r.x1) << ',' << g17(r.x2) << ',' << g17(r.cv) << ',' << g17(r.cc) << ','
       << g17(r.mc) << ',' << g17(r.mc_half) << '\n';
}

inline std::vector<std::string> write_surface_csvs(const std::string& base,
                                                   const SurfaceResult& res) {
  std::vector<std::string> paths;
  for (const auto& t : res.tables) {
    paths.push_back(surface_csv_path(base, t.cells));
    std::ofstream os(paths.back());
    if (!os) throw Error("cannot open output file: " + paths.back());
    write_surface_csv(os, t);
  }
  return paths;
}

// --- convergence --------------------------------------------------------------

struct ConvergenceRow {
  double eps = 0.0;
  double width = 0.0;  // w(X_eps) = 2*eps
  std::size_t cells = 0;
  double cv = 0.0, cc = 0.0, gap = 0.0;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  bool fitted = false;
  double slope = 0.0;
  int fit_first = 0, fit_last = -1;   // configured window
  std::vector<int> fit_rungs;         // rungs that actually entered the fit
  std::vector<std::string> notes;
};

inline ConvergenceResult run_convergence(const ExperimentConfig& cfg, int threads) {
  if (cfg.kind != ExperimentKind::convergence)
    throw ConfigError("config kind is '" + std::string(to_string(cfg.kind)) +
                      "', expected 'convergence'");
  ConvergentScheme scheme(cfg.relaxed, cfg.rv.gamma_box, cfg.rv.base, cfg.k);

  ConvergenceResult out;
  out.rows.assign(cfg.epsilons.size(), ConvergenceRow{});
  parallel_for(cfg.epsilons.size(), threads, [&](std::size_t i) {
    const double e = cfg.epsilons[i];
    Box X;
    for (const double c : cfg.x) X.emplace_back(c - e, c + e);
    const auto rel = scheme.relaxation_for(X);
    const auto r = scheme.scheme_eval(X, cfg.x);
    out.rows[i] = {e, width(X), rel->partition().size(), r.cv, r.cc, r.gap};
  });

  out.fit_first = cfg.fit_window ? cfg.fit_window->first : 0;
  out.fit_last = cfg.fit_window ? cfg.fit_window->second : static_cast<int>(out.rows.size()) - 1;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = out.fit_first; i <= out.fit_last; ++i) {
    const auto& r = out.rows[static_cast<std::size_t>(i)];
    if (r.gap < 1e-14) {
      out.notes.push_back("rung eps=" + g17(r.eps) + " excluded from the fit: gap " + g17(r.gap) +
                          " is below 1e-14");
      continue;
    }
    out.fit_rungs.push_back(i);
    const double lx = std::log(r.width), ly = std::log(r.gap);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(out.fit_rungs.size());
  if (out.fit_rungs.size() >= 2) {
    out.fitted = true;
    out.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  } else {
    out.notes.push_back("fit skipped: fewer than two usable rungs");
  }
  return out;
}

inline void write_convergence_csv(std::ostream& os, const ConvergenceResult& res) {
  os << "epsilon,width,cells,cv,cc,gap\n";
  for (const auto& r : res.rows)
    os << g17(r.eps) << ',' << g17(r.width) << ',' << r.cells << ',' << g17(r.cv) << ','
       << g17(r.cc) << ',' << g17(r.gap) << '\n';
}

// --- bounds ---------------------------------------------------------------

struct BoundsResult {
  std::vector<double> x;
  double lower = 0.0, upper = 0.0;
  double mc_value = 0.0, mc_halfwidth = 0.0;
  std::size_t partition_size = 0;
  bool passed = false;
};

inline BoundsResult run_bounds(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.kind != ExperimentKind::bounds)
    throw ConfigError("config kind is '" + std::string(to_string(cfg.kind)) + "', expected 'bounds'");
  BoundsResult out;
  out.x = cfg.x;
  const IntervalPartition part = uniform_partition(cfg.rv.gamma_box, cfg.counts);
  out.partition_size = part.size();
  const auto [lo, up] = point_bounds(cfg.relaxed, cfg.x, part, cfg.rv.base);
  out.lower = lo;
  out.upper = up;
  const Estimate est =
      mc_expect(cfg.relaxed, cfg.x, cfg.rv.base, static_cast<std::size_t>(cfg.mc_samples), seed);
  out.mc_value = est.value;
  out.mc_halfwidth = est.half_width;
  out.passed = lo <= est.value + est.half_width && est.value - est.half_width <= up;
  return out;
}

inline void write_bounds_json(std::ostream& os, const BoundsResult& res) {
  nlohmann::json j;
  j["x"] = res.x;
  j["lower"] = res.lower;
  j["upper"] = res.upper;
  j["mc_value"] = res.mc_value;
  j["mc_halfwidth"] = res.mc_halfwidth;
  j["partition_size"] = res.partition_size;
  j["passed"] = res.passed;
  os << j.dump(2) << '\n';
}

// --- selftest ---------------------------------------------------------------

namespace detail {

struct SelftestScope {
  std::ostream& os;
  const char* name;
  long checks = 0;
  long failures = 0;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
      ++failures;
      if (failures <= 3) os << "  " << name << ": " << what << '\n';
    }
  }
  ~SelftestScope() {
    os << "selftest " << name << ": " << (failures == 0 ? "pass" : "FAIL") << " (" << checks
       << " checks";
    if (failures > 0) os << ", " << failures << " failures";
    os << ")\n";
  }
};

struct SelftestCase {
  const char* text;
  Box x_box;
  Box w_box;
};

inline std::vector<SelftestCase> selftest_cases() {
  return {
      {"(x1 + 2)*(w1 - 3) + x1^2*w1", {Interval(-1, 1)}, {Interval(0, 1)}},
      {"exp(0.3*x1 - 0.2*w1) + ln(2 + x1*w1)", {Interval(-1, 1)}, {Interval(0, 1.5)}},
      {"sqrt(3 + x1*w1)/(2 + w1)", {Interval(-1, 1)}, {Interval(0, 2)}},
      {"sin(x1)*cos(w1) + (w1 - 0.5)^3", {Interval(-2, 2)}, {Interval(0, 1)}},
      {"((w1 - 10)^2*ln(x1) + (x1 - 5)^2)/w1", {Interval(24, 26)}, {Interval(10, 13)}},
      {"(x1*x2*ln(3 + x1*w1*w2) - (x1^2 - 1)*(x2^2 - 1)*w2^2)/(2 + w1*x1)",
       {Interval(-1, 1), Interval(-1, 1)},
       {Interval(0, 1), Interval(0, 2)}},
  };
}

inline std::vector<double> random_in(Rng& rng, const Box& b) {
  std::vector<double> p;
  for (const auto& s : b) p.push_back(s.lo + rng.uniform01() * s.width());
  return p;
}

}  // namespace detail

//! Condensed property checks behind `jmc selftest`. Returns the number of
//! failing suites; prints one line per suite.
inline int run_selftest(std::ostream& os) {
  int failed_suites = 0;
  const auto cases = detail::selftest_cases();

  {
    detail::SelftestScope t{os, "interval enclosure"};
    Rng rng(1001u);
    for (const auto& c : cases) {
      const ExprGraph g = parse(c.text);
      const Interval range = eval_interval(g, c.x_box, c.w_box);
      for (int i = 0; i < 400; ++i) {
        const auto x = detail::random_in(rng, c.x_box);
        const auto w = detail::random_in(rng, c.w_box);
        const double v = eval_real(g, x, w);
        t.expect(range.lo <= v && v <= range.hi, std::string("value escapes range for ") + c.text);
      }
    }
    if (t.failures) ++failed_suites;
  }

  {
    detail::SelftestScope t{os, "relaxation sandwich"};
    Rng rng(1002u);
    for (const auto& c : cases) {
      const ExprGraph g = parse(c.text);
      Box joint = c.x_box;
      joint.insert(joint.end(), c.w_box.begin(), c.w_box.end());
      const RelaxationScheme scheme(g, joint);
      for (int i = 0; i < 400; ++i) {
        std::vector<double> p = detail::random_in(rng, joint);
        const McCormick m = scheme.relax_at(p);
        std::vector<double> x(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(c.x_box.size()));
        std::vector<double> w(p.begin() + static_cast<std::ptrdiff_t>(c.x_box.size()), p.end());
        const double v = eval_real(g, x, w);
        t.expect(m.cv <= v + 1e-12 && v <= m.cc + 1e-12,
                 std::string("relaxation fails to sandwich ") + c.text);
        t.expect(m.cv <= m.cc + 1e-12, "cv exceeds cc");
      }
    }
    if (t.failures) ++failed_suites;
  }

  {
    detail::SelftestScope t{os, "distribution moments"};
    Rng rng(1003u);
    const std::vector<Distribution> laws = {
        Distribution::uniform(-1.0, 2.0), Distribution::truncated_normal(0.5, 1.2, -3.0, 4.0),
        Distribution::truncated_gamma(2.0, 1.5, 0.0, 7.0), Distribution::beta(2.0, 3.0)};
    for (const auto& law : laws) {
      const Interval sup = law.support();
      for (int trial = 0; trial < 50; ++trial) {
        // random partition of the support into 2..6 pieces
        const int k = 2 + static_cast<int>(rng.uniform01() * 4.99);
        std::vector<double> cuts{sup.lo, sup.hi};
        for (int i = 1; i < k; ++i) cuts.push_back(sup.lo + rng.uniform01() * sup.width());
        std::sort(cuts.begin(), cuts.end());
        double ptot = 0.0, mtot = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
          const Interval piece(cuts[i], cuts[i + 1]);
          const double p = law.prob(piece);
          t.expect(p >= -1e-15 && p <= 1.0 + 1e-12, "probability outside [0, 1]");
          ptot += p;
          if (p > 0.0) {
            const double m = law.cond_mean(piece);
            t.expect(m >= piece.lo - 1e-12 && m <= piece.hi + 1e-12,
                     "conditional mean escapes its cell");
            mtot += p * m;
          }
        }
        t.expect(std::fabs(ptot - 1.0) <= 1e-11, "cell probabilities do not sum to one");
        t.expect(std::fabs(mtot - law.cond_mean(sup)) <= 1e-10,
                 "total expectation identity violated");
      }
    }
    if (t.failures) ++failed_suites;
  }

  {
    detail::SelftestScope t{os, "transform maps"};
    const std::vector<FactorableRV> rvs = {
        truncated_exponential_rv(1.7, 0.2, 5.0), truncated_weibull_rv(2.0, 3.0, 0.5, 6.0),
        truncated_cauchy_rv(1.0, 2.0, -4.0, 7.0), truncated_rayleigh_rv(1.3, 0.0, 5.0),
        truncated_pareto_rv(1.5, 2.5, 1.5, 30.0)};
    for (const auto& rv : rvs) {
      const auto at = [&](double gamma) {
        const std::vector<double> g{gamma};
        return eval_real(rv.psi[0], std::span<const double>{}, g);
      };
      double prev = at(0.0);
      for (int i = 1; i <= 200; ++i) {
        const double cur = at(i / 200.0);
        t.expect(cur >= prev - 1e-12, "inverse map is not monotone");
        prev = cur;
      }
    }
    Rng rng(1004u);
    for (const auto& rv : rvs)
      for (int i = 0; i < 200; ++i) {
        const auto w = sample_rv(rv, rng);
        t.expect(w.size() == 1, "sample dimension mismatch");
      }
    if (t.failures) ++failed_suites;
  }

  {
    detail::SelftestScope t{os, "partition certificate"};
    Rng rng(1005u);
    const ProductDistribution law({Distribution::uniform(0.0, 1.0), Distribution::uniform(-2.0, 3.0)});
    const Box parent = law.support();
    for (int trial = 0; trial < 200; ++trial) {
      const double k = std::exp(std::log(0.5) + rng.uniform01() * std::log(2e3));
      Box X;
      for (int d = 0; d < 2; ++d) {
        const double c = -1.0 + 2.0 * rng.uniform01();
        const double h = 0.05 + 0.45 * rng.uniform01();
        X.emplace_back(c - h, c + h);
      }
      const auto part = refine_map_phi(parent, X, k, law);
      const double cap = k * width(X) * width(X);
      double worst = 0.0;
      for (const auto& cell : part.cells) {
        const double w = width(cell);
        worst = std::max(worst, w * w - cap);
      }
      t.expect(worst <= 0.0, "a cell violates the square-width certificate");
      const auto wts = weights(part, law);
      t.expect(std::fabs(pairwise_sum(wts.p) - 1.0) <= 1e-11, "cell probabilities do not sum to one");
    }
    if (t.failures) ++failed_suites;
  }

  {
    detail::SelftestScope t{os, "expectation bounds"};
    const ExprGraph g = parse("((w1 - 10)^2*ln(x1) + (x1 - 5)^2)/w1");
    const ProductDistribution law({Distribution::uniform(10.0, 13.0)});
    for (const int cells : {1, 2, 4, 8, 16}) {
      const auto part = uniform_partition(law.support(), {cells});
      for (const double xq : {24.0, 24.7, 25.0, 25.8, 26.0}) {
        const std::vector<double> x{xq};
        const auto [lo, up] = point_bounds(g, x, part, law);
        const auto est = quad_expect(g, x, law);
        t.expect(lo <= est.value + 1e-9 + est.half_width, "lower bound above the quadrature value");
        t.expect(est.value <= up + 1e-9 + est.half_width, "upper bound below the quadrature value");
      }
    }
    if (t.failures) ++failed_suites;
  }

  os << (failed_suites == 0 ? "selftest: all suites passed\n"
                            : "selftest: " + std::to_string(failed_suites) + " suite(s) FAILED\n");
  return failed_suites;
}

}  // namespace jmc
