#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcins/problem.hpp"

// JSON scenario files. One document holds the problem data plus optional
// blocks for the comparison and sweep commands.
namespace vcins {

struct SweepSpec {
  std::string parameter;  // "rho", "nu" or "w0"
  std::vector<double> values;
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct Scenario {
  LossModel loss = ContinuousTruncatedLoss{};
  UtilityModel utility;
  double w0 = 0.0;
  double rho = 0.0;
  double nu = 0.0;
  std::size_t grid_n = kDefaultGridSize;
  SolverOptions tolerances;
  std::optional<std::pair<double, double>> wealth_pair;    // compare-wealth (w1, w2)
  std::optional<std::pair<double, double>> variance_pair;  // compare-variance (nu1, nu2)
  std::optional<SweepSpec> sweep;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline Problem to_problem(const Scenario& s) {
  return Problem{discretize(s.loss, s.grid_n), s.utility, s.w0, s.rho, s.nu};
}

namespace detail {

using json = nlohmann::json;

/// Reads a number, recording a problem instead of throwing.
inline std::optional<double> number(const json& j, const std::string& key, const std::string& where,
                                    std::vector<std::string>& problems, bool required = true) {
  if (!j.contains(key)) {
    if (required) problems.push_back(where + ": missing '" + key + "'");
    return std::nullopt;
  }
  if (!j.at(key).is_number()) {
    problems.push_back(where + ": '" + key + "' must be a number");
    return std::nullopt;
  }
  return j.at(key).get<double>();
}

inline std::optional<LossModel> parse_loss(const json& j, std::vector<std::string>& problems) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    problems.push_back("loss: expected an object with a string 'type'");
    return std::nullopt;
  }
  const auto type = j.at("type").get<std::string>();
  if (type == "discrete") {
    DiscreteLoss d;
    if (!j.contains("atoms") || !j.at("atoms").is_array()) {
      problems.push_back("loss: discrete needs an 'atoms' array of [value, prob] pairs");
      return std::nullopt;
    }
    for (const auto& a : j.at("atoms")) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
        problems.push_back("loss: each atom must be a [value, prob] pair");
        continue;
      }
      d.atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return d;
  }
  ContinuousTruncatedLoss c;
  const std::string where = "loss (" + type + ")";
  if (type == "uniform") {
    c.family = UniformFamily{};
  } else if (type == "exponential") {
    c.family = ExponentialFamily{number(j, "rate", where, problems).value_or(1.0)};
  } else if (type == "lognormal") {
    c.family = LognormalFamily{number(j, "mu", where, problems).value_or(0.0),
                               number(j, "sigma", where, problems).value_or(1.0)};
  } else if (type == "pareto") {
    c.family = ParetoFamily{number(j, "alpha", where, problems).value_or(2.0),
                            number(j, "scale", where, problems).value_or(1.0)};
  } else {
    problems.push_back("loss: unknown type '" + type +
                       "' (expected uniform, exponential, lognormal, pareto or discrete)");
    return std::nullopt;
  }
  c.support_max = number(j, "support_max", where, problems).value_or(1.0);
  c.atom_at_zero = number(j, "atom_at_zero", where, problems, false).value_or(0.0);
  return c;
}

inline std::optional<UtilityModel::Family> parse_utility(const json& j, std::vector<std::string>& problems) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    problems.push_back("utility: expected an object with a string 'type'");
    return std::nullopt;
  }
  const auto type = j.at("type").get<std::string>();
  const std::string where = "utility (" + type + ")";
  if (type == "log") return Log{};
  if (type == "cara") return Cara{number(j, "a", where, problems).value_or(1.0)};
  if (type == "crra") return Crra{number(j, "gamma", where, problems).value_or(2.0)};
  if (type == "hara")
    return Hara{number(j, "p", where, problems).value_or(0.5), number(j, "q", where, problems).value_or(1.0)};
  if (type == "quadratic") return Quadratic{number(j, "saturation", where, problems).value_or(10.0)};
  problems.push_back("utility: unknown type '" + type + "' (expected log, cara, crra, hara or quadratic)");
  return std::nullopt;
}

inline void parse_tolerances(const json& j, SolverOptions& o, std::vector<std::string>& problems) {
  if (!j.is_object()) {
    problems.push_back("tolerances: expected an object");
    return;
  }
  const std::string where = "tolerances";
  auto real = [&](const char* key, double& field) {
    if (auto v = number(j, key, where, problems, false)) {
      if (!(*v > 0.0)) problems.push_back(where + ": '" + key + "' must be positive");
      field = *v;
    }
  };
  auto count = [&](const char* key, std::size_t& field) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_unsigned()) {
      problems.push_back(where + ": '" + std::string(key) + "' must be a non-negative integer");
      return;
    }
    field = j.at(key).get<std::size_t>();
  };
  real("inner_root_tol", o.inner_root_tol);
  real("outer_rel_tol", o.outer_rel_tol);
  real("deductible_rel_tol", o.deductible_rel_tol);
  real("oracle_pg_tol", o.oracle_pg_tol);
  count("max_outer_iter", o.max_outer_iter);
  count("fallback_scan", o.fallback_scan);
  count("oracle_max_iter", o.oracle_max_iter);
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> known{"inner_root_tol", "outer_rel_tol", "deductible_rel_tol",
                                                "oracle_pg_tol",  "max_outer_iter", "fallback_scan",
                                                "oracle_max_iter"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      problems.push_back(where + ": unknown key '" + key + "'");
  }
}

inline std::optional<std::pair<double, double>> parse_pair(const json& j, const char* a, const char* b,
                                                           const std::string& where,
                                                           std::vector<std::string>& problems) {
  auto x = number(j, a, where, problems);
  auto y = number(j, b, where, problems);
  if (!x || !y) return std::nullopt;
  return std::make_pair(*x, *y);
}

inline json loss_to_json(const LossModel& loss) {
  if (const auto* d = std::get_if<DiscreteLoss>(&loss)) {
    json atoms = json::array();
    for (const auto& a : d->atoms) atoms.push_back({a.value, a.prob});
    return {{"type", "discrete"}, {"atoms", atoms}};
  }
  const auto& c = std::get<ContinuousTruncatedLoss>(loss);
  json j = std::visit(
      [](const auto& f) -> json {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, UniformFamily>) return {{"type", "uniform"}};
        else if constexpr (std::is_same_v<F, ExponentialFamily>) return {{"type", "exponential"}, {"rate", f.rate}};
        else if constexpr (std::is_same_v<F, LognormalFamily>)
          return {{"type", "lognormal"}, {"mu", f.mu}, {"sigma", f.sigma}};
        else return {{"type", "pareto"}, {"alpha", f.alpha}, {"scale", f.scale}};
      },
      c.family);
  j["support_max"] = c.support_max;
  j["atom_at_zero"] = c.atom_at_zero;
  return j;
}

inline json utility_to_json(const UtilityModel& u) {
  return std::visit(
      [](const auto& f) -> json {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, Cara>) return {{"type", "cara"}, {"a", f.a}};
        else if constexpr (std::is_same_v<F, Crra>) return {{"type", "crra"}, {"gamma", f.gamma}};
        else if constexpr (std::is_same_v<F, Log>) return {{"type", "log"}};
        else if constexpr (std::is_same_v<F, Hara>) return {{"type", "hara"}, {"p", f.p}, {"q", f.q}};
        else return {{"type", "quadratic"}, {"saturation", f.sat}};
      },
      u.family());
}

}  // namespace detail

/// Parses and validates a scenario document. Every violated invariant is
/// collected before a single ValidationError is thrown.
inline Scenario parse_scenario(const nlohmann::json& j) {
  std::vector<std::string> problems;
  if (!j.is_object()) throw ValidationError({"scenario: expected a JSON object"});
  Scenario s;
  static const std::vector<std::string> known{"loss", "utility", "w0", "rho", "nu", "grid_n",
                                              "tolerances", "compare", "sweep"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      problems.push_back("scenario: unknown key '" + key + "'");

  std::optional<LossModel> loss;
  if (j.contains("loss")) loss = detail::parse_loss(j.at("loss"), problems);
  else problems.push_back("scenario: missing 'loss'");
  if (loss) {
    auto lp = validate(*loss);
    problems.insert(problems.end(), lp.begin(), lp.end());
    s.loss = *loss;
  }

  std::optional<UtilityModel::Family> family;
  if (j.contains("utility")) family = detail::parse_utility(j.at("utility"), problems);
  else problems.push_back("scenario: missing 'utility'");
  bool utility_ok = false;
  if (family) {
    try {
      s.utility = UtilityModel(*family);
      utility_ok = true;
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
  }

  s.w0 = detail::number(j, "w0", "scenario", problems).value_or(0.0);
  s.rho = detail::number(j, "rho", "scenario", problems, false).value_or(0.0);
  s.nu = detail::number(j, "nu", "scenario", problems).value_or(0.0);
  if (j.contains("grid_n")) {
    if (!j.at("grid_n").is_number_unsigned() || j.at("grid_n").get<std::size_t>() < 2)
      problems.push_back("scenario: 'grid_n' must be an integer >= 2");
    else s.grid_n = j.at("grid_n").get<std::size_t>();
  }
  if (j.contains("tolerances")) detail::parse_tolerances(j.at("tolerances"), s.tolerances, problems);

  if (j.contains("compare")) {
    const auto& c = j.at("compare");
    if (!c.is_object()) problems.push_back("compare: expected an object");
    else if (c.contains("w1") || c.contains("w2")) s.wealth_pair = detail::parse_pair(c, "w1", "w2", "compare", problems);
    else if (c.contains("nu1") || c.contains("nu2"))
      s.variance_pair = detail::parse_pair(c, "nu1", "nu2", "compare", problems);
    else problems.push_back("compare: expected {w1, w2} or {nu1, nu2}");
  }
  if (j.contains("sweep")) {
    const auto& w = j.at("sweep");
    SweepSpec sp;
    if (!w.is_object() || !w.contains("parameter") || !w.at("parameter").is_string()) {
      problems.push_back("sweep: expected an object with a string 'parameter'");
    } else {
      sp.parameter = w.at("parameter").get<std::string>();
      if (sp.parameter != "rho" && sp.parameter != "nu" && sp.parameter != "w0")
        problems.push_back("sweep: parameter must be rho, nu or w0");
      if (!w.contains("values") || !w.at("values").is_array() || w.at("values").empty())
        problems.push_back("sweep: 'values' must be a non-empty array of numbers");
      else
        for (const auto& v : w.at("values")) {
          if (!v.is_number()) problems.push_back("sweep: 'values' must hold numbers only");
          else sp.values.push_back(v.get<double>());
        }
      s.sweep = sp;
    }
  }

  // Problem-level invariants need a discretized loss and a valid utility.
  if (problems.empty() && utility_ok) {
    try {
      auto pp = validate(to_problem(s));
      problems.insert(problems.end(), pp.begin(), pp.end());
    } catch (const ValidationError& e) {
      problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return s;
}

inline nlohmann::json to_json(const Scenario& s) {
  using nlohmann::json;
  json j;
  j["loss"] = detail::loss_to_json(s.loss);
  j["utility"] = detail::utility_to_json(s.utility);
  j["w0"] = s.w0;
  j["rho"] = s.rho;
  j["nu"] = s.nu;
  j["grid_n"] = s.grid_n;
  const auto& o = s.tolerances;
  j["tolerances"] = {{"inner_root_tol", o.inner_root_tol},     {"outer_rel_tol", o.outer_rel_tol},
                     {"deductible_rel_tol", o.deductible_rel_tol}, {"oracle_pg_tol", o.oracle_pg_tol},
                     {"max_outer_iter", o.max_outer_iter},     {"fallback_scan", o.fallback_scan},
                     {"oracle_max_iter", o.oracle_max_iter}};
  if (s.wealth_pair) j["compare"] = {{"w1", s.wealth_pair->first}, {"w2", s.wealth_pair->second}};
  if (s.variance_pair) j["compare"] = {{"nu1", s.variance_pair->first}, {"nu2", s.variance_pair->second}};
  if (s.sweep) j["sweep"] = {{"parameter", s.sweep->parameter}, {"values", s.sweep->values}};
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError({"config '" + path + "' is not valid JSON: " + e.what()});
  }
  return parse_scenario(j);
}

}  // namespace vcins
