#pragma once

// JSON experiment configuration: an integrand, a random-variable model
// (either a primitive product law or a transform chain over one), and the
// parameters of one experiment kind. Loading validates dimensions eagerly so
// commands start from a consistent description or not at all.
//
// Schema sketch (one experiment per file):
//   {
//     "kind": "surface" | "convergence" | "bounds" | "overlay",
//     "integrand": "expression in x1.., w1..",
//     "seed": 12345,
//     "x_box": [[lo, hi], ...],
//     "law":  [ {"kind": "uniform", "lo": 0, "hi": 1}, ... ]
//       or
//     "rv": {
//       "components": [ law entry | inverse-CDF entry | box-muller entry, ... ],
//       "transforms": [ {"kind": "affine"|"covariance", "d": [...], matrix}, ... ]
//     },
//     surface:      "partitions": [[n1, n2], ...], "grid": 33, "mc_samples": 10000
//     convergence:  "x": [...], "k": 100.0, "epsilons": [...], "fit_window": [i0, i1]
//     bounds:       "x": [...], "counts": [n1, ...], "mc_samples": 1000000
//   }

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jmc/common.hpp"
#include "jmc/dist.hpp"
#include "jmc/expr.hpp"
#include "jmc/interval.hpp"
#include "jmc/rvtransform.hpp"

namespace jmc {

enum class ExperimentKind { surface, convergence, bounds, overlay };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::surface: return "surface";
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::bounds: return "bounds";
    case ExperimentKind::overlay: return "overlay";
  }
  return "?";
}

struct ExperimentConfig {
  std::string name;
  ExperimentKind kind = ExperimentKind::surface;
  std::string integrand_text;
  ExprGraph integrand;   // as written, over (x, omega)
  ExprGraph relaxed;     // integrand composed with the RV map, over (x, base)
  FactorableRV rv;       // identity map when a plain law was given
  std::uint64_t seed = 0;
  std::optional<Box> x_box;

  // surface
  std::vector<std::vector<int>> partitions;
  int grid = 33;
  long long mc_samples = 10000;

  // convergence
  std::vector<double> x;
  double k = 0.0;
  std::vector<double> epsilons;
  std::optional<std::pair<int, int>> fit_window;  // inclusive rung indices

  // bounds
  std::vector<int> counts;
};

namespace detail {

using nlohmann::json;

inline ConfigError cfg_err(const std::string& where, const std::string& what) {
  return ConfigError("config field '" + where + "': " + what);
}

inline double num(const json& j, const std::string& where) {
  if (!j.is_number()) throw cfg_err(where, "expected a number");
  return j.get<double>();
}

inline double field_num(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw cfg_err(where, "missing required number '" + key + "'");
  return num(j.at(key), where + "." + key);
}

inline std::vector<double> num_list(const json& j, const std::string& where,
                                    bool allow_empty = false) {
  if (!j.is_array() || (j.empty() && !allow_empty))
    throw cfg_err(where, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(num(v, where));
  return out;
}

inline Matrix matrix_field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw cfg_err(where, "missing required matrix '" + key + "'");
  Matrix m;
  for (const auto& row : j.at(key)) m.push_back(num_list(row, where + "." + key));
  return m;
}

inline Box box_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw cfg_err(where, "expected a nonempty array of [lo, hi] pairs");
  Box b;
  for (const auto& side : j) {
    const auto v = num_list(side, where);
    if (v.size() != 2 || !(v[0] <= v[1]))
      throw cfg_err(where, "each side must be [lo, hi] with lo <= hi");
    b.emplace_back(v[0], v[1]);
  }
  return b;
}

inline Distribution law_from(const json& j, const std::string& where) {
  const std::string kind = j.value("kind", "");
  if (kind == "uniform")
    return Distribution::uniform(field_num(j, "lo", where), field_num(j, "hi", where));
  if (kind == "normal")
    return Distribution::truncated_normal(field_num(j, "mu", where), field_num(j, "sigma", where),
                                          field_num(j, "lo", where), field_num(j, "hi", where));
  if (kind == "gamma")
    return Distribution::truncated_gamma(field_num(j, "alpha", where), field_num(j, "beta", where),
                                         field_num(j, "lo", where), field_num(j, "hi", where));
  if (kind == "beta")
    return Distribution::beta(field_num(j, "alpha", where), field_num(j, "beta", where));
  throw cfg_err(where, "unknown law kind '" + kind + "'");
}

inline bool is_law_kind(const std::string& kind) {
  return kind == "uniform" || kind == "normal" || kind == "gamma" || kind == "beta";
}

inline FactorableRV component_from(const json& j, const std::string& where) {
  const std::string kind = j.value("kind", "");
  if (is_law_kind(kind)) return identity_rv(ProductDistribution({law_from(j, where)}));
  if (kind == "box-muller") {
    if (j.contains("delta")) return box_muller(field_num(j, "delta", where));
    return box_muller();
  }
  if (kind == "box-muller-disc") return box_muller_disc(field_num(j, "rbar", where));
  if (kind == "exponential" || kind == "weibull" || kind == "cauchy" || kind == "rayleigh" ||
      kind == "pareto") {
    if (!j.contains("support")) throw cfg_err(where, "missing required '[lo, hi]' field 'support'");
    const auto sup = num_list(j.at("support"), where + ".support");
    if (sup.size() != 2) throw cfg_err(where, "'support' must be [lo, hi]");
    std::map<std::string, double> params;
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "kind" && it.key() != "support") params[it.key()] = num(*it, where + "." + it.key());
    return inverse_cdf_transform("truncated-" + kind, params, Interval(sup[0], sup[1]));
  }
  throw cfg_err(where, "unknown random-variable component kind '" + kind + "'");
}

inline FactorableRV rv_from(const json& j, const std::string& where) {
  if (!j.contains("components") || !j.at("components").is_array() || j.at("components").empty())
    throw cfg_err(where, "needs a nonempty 'components' array");
  std::vector<FactorableRV> parts;
  std::size_t i = 0;
  for (const auto& c : j.at("components"))
    parts.push_back(component_from(c, where + ".components[" + std::to_string(i++) + "]"));
  FactorableRV rv = parts.size() == 1 ? std::move(parts.front()) : product_rv(parts);

  if (j.contains("transforms")) {
    if (!j.at("transforms").is_array()) throw cfg_err(where, "'transforms' must be an array");
    i = 0;
    for (const auto& t : j.at("transforms")) {
      const std::string twhere = where + ".transforms[" + std::to_string(i++) + "]";
      const std::string kind = t.value("kind", "");
      if (kind == "affine")
        rv = affine_transform(rv, num_list(t.at("d"), twhere + ".d"), matrix_field(t, "a", twhere));
      else if (kind == "covariance")
        rv = covariance_transform(rv, num_list(t.at("d"), twhere + ".d"),
                                  matrix_field(t, "c", twhere));
      else
        throw cfg_err(twhere, "unknown transform kind '" + kind + "'");
    }
  }
  return rv;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::cfg_err;
  ExperimentConfig cfg;
  cfg.name = j.value("name", "");

  const std::string kind = j.value("kind", "");
  if (kind == "surface") cfg.kind = ExperimentKind::surface;
  else if (kind == "convergence") cfg.kind = ExperimentKind::convergence;
  else if (kind == "bounds") cfg.kind = ExperimentKind::bounds;
  else if (kind == "overlay") cfg.kind = ExperimentKind::overlay;
  else throw cfg_err("kind", "must be surface, convergence, bounds, or overlay");

  if (!j.contains("integrand") || !j.at("integrand").is_string())
    throw cfg_err("integrand", "missing required expression string");
  cfg.integrand_text = j.at("integrand").get<std::string>();
  try {
    cfg.integrand = parse(cfg.integrand_text);
  } catch (const Error& e) {
    throw cfg_err("integrand", e.what());
  }

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw cfg_err("seed", "expected an unsigned integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }

  if (j.contains("law") == j.contains("rv"))
    throw cfg_err("law", "exactly one of 'law' and 'rv' is required");
  if (j.contains("law")) {
    if (!j.at("law").is_array() || j.at("law").empty())
      throw cfg_err("law", "expected a nonempty array of law entries");
    std::vector<Distribution> laws;
    std::size_t i = 0;
    for (const auto& entry : j.at("law"))
      laws.push_back(detail::law_from(entry, "law[" + std::to_string(i++) + "]"));
    cfg.rv = identity_rv(ProductDistribution(std::move(laws)));
  } else {
    cfg.rv = detail::rv_from(j.at("rv"), "rv");
  }

  if (cfg.integrand.n_w() > static_cast<int>(cfg.rv.dims()))
    throw cfg_err("integrand", "references more random components than the model provides");
  const std::vector<ExprGraph> used(cfg.rv.psi.begin(),
                                    cfg.rv.psi.begin() + cfg.integrand.n_w());
  cfg.relaxed = compose(cfg.integrand, used);

  if (j.contains("x_box")) {
    cfg.x_box = detail::box_from(j.at("x_box"), "x_box");
    if (cfg.integrand.n_x() > static_cast<int>(cfg.x_box->size()))
      throw cfg_err("x_box", "integrand references more decision variables than the box has");
  }

  const auto counts_from = [&](const nlohmann::json& a, const std::string& where) {
    std::vector<int> c;
    for (const auto& v : a) {
      const double d = detail::num(v, where);
      if (d < 1 || d != static_cast<int>(d)) throw cfg_err(where, "cell counts must be positive integers");
      c.push_back(static_cast<int>(d));
    }
    if (static_cast<int>(c.size()) != cfg.rv.dims())
      throw cfg_err(where, "one cell count per random dimension required");
    return c;
  };

  switch (cfg.kind) {
    case ExperimentKind::surface: {
      if (!cfg.x_box || cfg.x_box->size() != 2) throw cfg_err("x_box", "surface runs need a two-dimensional box");
      if (!j.contains("partitions") || !j.at("partitions").is_array() || j.at("partitions").empty())
        throw cfg_err("partitions", "expected a nonempty array of per-dimension cell counts");
      std::size_t i = 0;
      for (const auto& p : j.at("partitions"))
        cfg.partitions.push_back(counts_from(p, "partitions[" + std::to_string(i++) + "]"));
      cfg.grid = j.value("grid", 33);
      if (cfg.grid < 1) throw cfg_err("grid", "must be at least 1");
      cfg.mc_samples = j.value("mc_samples", 10000LL);
      if (cfg.mc_samples < 2) throw cfg_err("mc_samples", "must be at least 2");
      break;
    }
    case ExperimentKind::convergence: {
      if (!j.contains("x")) throw cfg_err("x", "convergence runs need a center point");
      cfg.x = detail::num_list(j.at("x"), "x");
      if (!j.contains("k")) throw cfg_err("k", "convergence runs need the refinement constant");
      cfg.k = detail::num(j.at("k"), "k");
      if (!(cfg.k > 0.0)) throw cfg_err("k", "must be positive");
      if (!j.contains("epsilons")) throw cfg_err("epsilons", "convergence runs need a shrink ladder");
      cfg.epsilons = detail::num_list(j.at("epsilons"), "epsilons");
      for (const double e : cfg.epsilons)
        if (!(e > 0.0)) throw cfg_err("epsilons", "entries must be positive");
      if (static_cast<int>(cfg.x.size()) < cfg.integrand.n_x())
        throw cfg_err("x", "integrand references more decision variables than the point has");
      if (cfg.x_box) {
        if (cfg.x_box->size() != cfg.x.size()) throw cfg_err("x_box", "dimension mismatch with 'x'");
        const double emax = *std::max_element(cfg.epsilons.begin(), cfg.epsilons.end());
        for (std::size_t d = 0; d < cfg.x.size(); ++d)
          if (cfg.x[d] - emax < (*cfg.x_box)[d].lo || cfg.x[d] + emax > (*cfg.x_box)[d].hi)
            throw cfg_err("x_box", "largest query box leaves the configured domain");
      }
      if (j.contains("fit_window")) {
        const auto w = detail::num_list(j.at("fit_window"), "fit_window");
        if (w.size() != 2 || w[0] < 0 || w[1] >= static_cast<double>(cfg.epsilons.size()) ||
            w[0] > w[1])
          throw cfg_err("fit_window", "expected [first, last] rung indices inside the ladder");
        cfg.fit_window = {static_cast<int>(w[0]), static_cast<int>(w[1])};
      }
      break;
    }
    case ExperimentKind::bounds: {
      if (!j.contains("x")) throw cfg_err("x", "bounds runs need a query point");
      cfg.x = detail::num_list(j.at("x"), "x", /*allow_empty=*/true);
      if (static_cast<int>(cfg.x.size()) < cfg.integrand.n_x())
        throw cfg_err("x", "integrand references more decision variables than the point has");
      if (cfg.x_box && !contains(*cfg.x_box, cfg.x)) throw cfg_err("x", "point lies outside 'x_box'");
      if (!j.contains("counts")) throw cfg_err("counts", "bounds runs need per-dimension cell counts");
      cfg.counts = counts_from(j.at("counts"), "counts");
      cfg.mc_samples = j.value("mc_samples", 1000000LL);
      if (cfg.mc_samples < 2) throw cfg_err("mc_samples", "must be at least 2");
      break;
    }
    case ExperimentKind::overlay:
      break;  // parsed for forward compatibility; no command consumes it
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse failure in " + path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("config validation failure in " + path + ": " + e.what());
  }
}

}  // namespace jmc
