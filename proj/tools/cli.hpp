#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vcins/vcins.hpp"

// Command-line front end. Kept in a header so tests can drive it in-process.
namespace vcins::cli {

using nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kValidation = 3,
  kDomain = 4,
  kRange = 5,
  kSolver = 6,
  kPrecondition = 7,
  kUnsupported = 8,
  kContract = 9,
  kInconsistency = 10,
  kIo = 11,
};

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::validation: return kValidation;
    case ErrorCategory::domain: return kDomain;
    case ErrorCategory::range: return kRange;
    case ErrorCategory::solver: return kSolver;
    case ErrorCategory::precondition: return kPrecondition;
    case ErrorCategory::unsupported: return kUnsupported;
    case ErrorCategory::contract: return kContract;
    case ErrorCategory::inconsistency: return kInconsistency;
    case ErrorCategory::io: return kIo;
  }
  return kInternal;
}

inline std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline const char* kScheduleHeader = "x,indemnity,retention,marginal,exposure,phi_kkt";

/// One CSV row per grid node, columns as in kScheduleHeader. `prefix` is
/// prepended verbatim to each row (used by sweep).
inline std::string schedule_rows(const ContractSolution& s, const std::string& prefix = {}) {
  const auto nodes = s.problem.measure.nodes();
  const double mean = s.expected_indemnity();
  std::optional<std::vector<double>> phi;
  if (s.beta()) phi = kkt_profile(s);
  std::string out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double x = nodes[i];
    const double y = s.table[i];
    out += prefix;
    out += fmt12(x) + "," + fmt12(y) + "," + fmt12(x - y) + "," + fmt12(s.marginal(x)) + "," +
           fmt12(y - mean) + "," + (phi ? fmt12((*phi)[i]) : std::string("nan")) + "\n";
  }
  return out;
}

inline json summary(const ContractSolution& s, const SolverOptions& opts) {
  const auto& p = s.problem;
  const auto arrow = arrow_deductible(p, opts);
  json j;
  j["regime"] = s.regime_name();
  j["d_star"] = arrow.d_star;
  j["var_at_d_star"] = arrow.var_at_d;
  j["deductible"] = s.deductible();
  j["expected_indemnity"] = s.expected_indemnity();
  j["indemnity_variance"] = s.indemnity_variance();
  j["premium"] = s.premium;
  j["expected_utility"] = expected_utility(p, s.table);
  j["beta"] = s.beta() ? json(*s.beta()) : json(nullptr);
  if (const auto* f = std::get_if<InteriorFair>(&s.regime)) {
    j["m_star"] = f->m_star;
    j["lambda_star"] = f->lambda_star;
  } else if (const auto* l = std::get_if<InteriorLoaded>(&s.regime)) {
    j["m_star"] = l->m_star;
    j["d_tilde"] = l->d_tilde;
    j["lambda_star"] = l->lambda_star;
  } else if (const auto* t = std::get_if<TwoPoint>(&s.regime)) {
    j["jump_at"] = t->jump_at;
    j["pay"] = t->pay;
  }
  if (!is_variance_slack(arrow, p.nu)) {
    const auto b = compute_bracket(p.measure, arrow, p.nu);
    j["bracket"] = {{"d_L", b.d_L}, {"m_L", b.m_L}, {"K_U", b.K_U}, {"m_U", b.m_U}, {"degenerate", b.degenerate}};
  }
  j["diagnostics"] = {{"mean_residual", s.diagnostics.mean_residual},
                      {"variance_residual", s.diagnostics.variance_residual},
                      {"outer_iterations", s.diagnostics.outer_iterations},
                      {"inner_iterations", s.diagnostics.inner_iterations},
                      {"fallback_scan", s.diagnostics.fallback_scan}};
  const auto ic = check_incentive_compatible(s);
  j["incentive_compatible"] = ic.passed();
  return j;
}

inline json certification(const Problem& p, const SolverOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = solve(p, opts);
  const auto o = brute_solve(p, opts);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double gap = 0.0;
  for (std::size_t i = 0; i < s.table.size(); ++i) gap = std::max(gap, std::abs(s.table[i] - o.schedule[i]));
  // Grid size counts the cells on (0, M]; an atom at zero adds a node but no cell.
  const auto nodes = p.measure.nodes();
  const auto cells = std::count_if(nodes.begin(), nodes.end(), [](double x) { return x > 0.0; });
  const double tol = 3.0 * p.measure.support_max() / static_cast<double>(std::max<std::ptrdiff_t>(cells, 1));
  const double obj_solver = expected_utility(p, s.table);
  json j;
  j["regime"] = s.regime_name();
  j["sup_norm_gap"] = gap;
  j["sup_norm_tolerance"] = tol;
  j["agreement"] = gap <= tol;
  j["objective_solver"] = obj_solver;
  j["objective_oracle"] = o.objective;
  j["objective_gap"] = o.objective - obj_solver;
  j["oracle"] = {{"converged", o.converged},
                 {"iterations", o.iterations},
                 {"kkt_residual", o.kkt_residual},
                 {"active_variance", o.active_variance},
                 {"multiplier", o.multiplier}};
  if (s.beta() && *s.beta() > 0.0) {
    const auto k = certify_kkt(s);
    j["kkt"] = {{"passed", k.passed},
                {"max_abs_phi_coinsurance", k.max_abs_phi_coinsurance},
                {"max_phi_deductible", k.deductible_nodes > 0 ? json(k.max_phi_deductible) : json(nullptr)},
                {"scale", k.scale}};
  }
  j["incentive_compatible"] = check_incentive_compatible(s).passed();
  j["elapsed_seconds"] = elapsed;
  return j;
}

inline json comparison(const ComparisonReport& r) {
  auto profile = [](const CrossingProfile& c) {
    return json{{"count", c.count}, {"locations", c.locations}, {"direction_first", c.direction_first}};
  };
  json assertions = json::array();
  for (const auto& a : r.assertions) assertions.push_back({{"name", a.name}, {"passed", a.passed}});
  json j;
  j["regimes"] = {r.contracts.first.regime_name(), r.contracts.second.regime_name()};
  j["exposure_crossings"] = profile(r.exposure_crossings);
  j["indemnity_crossings"] = profile(r.indemnity_crossings);
  j["mean_coverage"] = {r.mean_coverage.first, r.mean_coverage.second};
  j["betas"] = {r.betas.first, r.betas.second};
  j["downside_verdict"] = r.downside_verdict ? json(*r.downside_verdict) : json(nullptr);
  j["convex_verdict"] = r.convex_verdict ? json(*r.convex_verdict) : json(nullptr);
  j["assertions"] = assertions;
  j["all_passed"] = r.all_passed();
  return j;
}

inline std::size_t thread_cap() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("VC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
  }
  return n;
}

inline Scenario with_value(Scenario s, const std::string& parameter, double v) {
  if (parameter == "rho") s.rho = v;
  else if (parameter == "nu") s.nu = v;
  else s.w0 = v;
  return s;
}

/// Long-form CSV over the sweep values; rows keep the input order whatever
/// the thread count.
inline std::string sweep_csv(const Scenario& base) {
  const auto& sp = *base.sweep;
  std::vector<std::string> blocks(sp.values.size());
  std::vector<std::exception_ptr> failures(sp.values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < sp.values.size(); k = next++) {
      try {
        const auto sc = with_value(base, sp.parameter, sp.values[k]);
        const auto s = solve(to_problem(sc), sc.tolerances);
        blocks[k] = schedule_rows(s, sp.parameter + "," + fmt12(sp.values[k]) + "," + s.regime_name() + ",");
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min(thread_cap(), sp.values.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  std::string out = std::string("parameter,value,regime,") + kScheduleHeader + "\n";
  for (const auto& b : blocks) out += b;
  return out;
}

inline json error_json(const std::string& category, const std::string& message,
                       const std::vector<std::string>& problems = {}) {
  json j{{"category", category}, {"message", message}};
  if (!problems.empty()) j["problems"] = problems;
  return json{{"error", j}};
}

/// Entry point; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Optimal insurance under an insurer's variance bound"};
  std::string command;
  std::string config;
  std::string output;
  std::optional<std::size_t> grid_n;
  bool quiet = false;
  app.add_option("command", command, "solve | certify | compare-wealth | compare-variance | sweep")
      ->required()
      ->check(CLI::IsMember({"solve", "certify", "compare-wealth", "compare-variance", "sweep"}));
  app.add_option("--config", config, "scenario JSON")->required();
  app.add_option("--out", output, "output path")->required();
  app.add_option("--grid-n", grid_n, "override grid size")->check(CLI::Range(2, 100000));
  app.add_flag("--quiet", quiet, "suppress progress notes");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << error_json("usage", e.what()).dump() << "\n";
    return kUsage;
  }

  try {
    auto sc = load_scenario(config);
    if (grid_n) {
      sc.grid_n = *grid_n;
      sc = parse_scenario(to_json(sc));
    }
    const auto& opts = sc.tolerances;
    if (command == "solve") {
      const auto s = solve(to_problem(sc), opts);
      write_file(output, std::string(kScheduleHeader) + "\n" + schedule_rows(s));
      write_file(output + ".json", summary(s, opts).dump(2) + "\n");
      if (!quiet) out << "solve: regime " << s.regime_name() << ", schedule in " << output << "\n";
    } else if (command == "certify") {
      const auto j = certification(to_problem(sc), opts);
      write_file(output, j.dump(2) + "\n");
      if (!quiet)
        out << "certify: sup-norm gap " << fmt12(j["sup_norm_gap"].get<double>()) << " (tolerance "
            << fmt12(j["sup_norm_tolerance"].get<double>()) << ")\n";
    } else if (command == "compare-wealth" || command == "compare-variance") {
      const bool wealth = command == "compare-wealth";
      const auto& pair = wealth ? sc.wealth_pair : sc.variance_pair;
      if (!pair)
        throw ValidationError({std::string("config has no compare block with ") +
                               (wealth ? "{w1, w2}" : "{nu1, nu2}")});
      const auto base = to_problem(sc);
      const auto r = wealth ? compare_wealth(base, pair->first, pair->second, opts)
                            : compare_variance(base, pair->first, pair->second, opts);
      write_file(output, comparison(r).dump(2) + "\n");
      if (!quiet) out << command << ": " << (r.all_passed() ? "all assertions hold" : "assertions FAILED") << "\n";
    } else {
      if (!sc.sweep) throw ValidationError({"config has no sweep block"});
      write_file(output, sweep_csv(sc));
      json meta{{"scenario", to_json(sc)}, {"rows_per_value", to_problem(sc).measure.size()}};
      write_file(output + ".meta.json", meta.dump(2) + "\n");
      if (!quiet) out << "sweep: " << sc.sweep->values.size() << " values over " << sc.sweep->parameter << "\n";
    }
  } catch (const ValidationError& e) {
    err << error_json(std::string(to_string(e.category())), e.what(), e.problems()).dump() << "\n";
    return exit_code(e.category());
  } catch (const Error& e) {
    err << error_json(std::string(to_string(e.category())), e.what()).dump() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << error_json("internal", e.what()).dump() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace vcins::cli
