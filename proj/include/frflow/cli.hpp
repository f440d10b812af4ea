#pragma once

/**
 * @file cli.hpp
 * @brief Subcommand drivers behind the frflow executable.
 *
 * Each run_* takes a RunConfig, writes its artifacts and returns an exit code:
 * 0 pass, 1 usage error or failed check, 2 numerical failure.
 */

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "frflow/counterexamples.hpp"
#include "frflow/density.hpp"
#include "frflow/divergences.hpp"
#include "frflow/errors.hpp"
#include "frflow/flow.hpp"
#include "frflow/geometry.hpp"
#include "frflow/inequalities.hpp"

namespace frflow::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kNumeric = 2 };

struct RunConfig {
  std::string command;     // flow | check | geodesic | counterexample
  std::string subcommand;  // checker or counterexample id
  std::string gen = "kl";
  std::string pair;        // density spec; empty means a command-specific default
  double T = 1.0;
  double dt = 1e-3;
  std::size_t K = 6;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  std::optional<double> alpha;
  double p = -1.0;
  std::string out;         // output prefix; empty prints JSON to stdout
  // counterexample parameters
  double mu2 = 3.0;
  double sigma2 = 0.25;
  double eps = 1.0;
  std::optional<double> eps_bound;  // epsilon in the two-value gdc regime
  double M = 5.0;
  std::vector<double> sweep_M;
  // grids
  int per_decade = 400;
  double x_min = 1e-4;
  double y_max = 1e4;
  // flow
  std::vector<std::string> observe;
  std::optional<double> window_start;
  std::optional<double> window_end;
  bool store_state = false;
  bool soft_floor = false;
  double concentration = 1.0;
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"command", c.command}, {"subcommand", c.subcommand}, {"gen", c.gen}, {"pair", c.pair}, {"T", c.T},
       {"dt", c.dt}, {"K", c.K}, {"samples", c.samples}, {"seed", c.seed}, {"p", c.p}, {"out", c.out},
       {"mu2", c.mu2}, {"sigma2", c.sigma2}, {"eps", c.eps}, {"M", c.M}, {"sweep_M", c.sweep_M},
       {"per_decade", c.per_decade}, {"x_min", c.x_min}, {"y_max", c.y_max}, {"observe", c.observe},
       {"store_state", c.store_state}, {"soft_floor", c.soft_floor}, {"concentration", c.concentration}};
  j["alpha"] = c.alpha ? nlohmann::json(*c.alpha) : nlohmann::json(nullptr);
  j["eps_bound"] = c.eps_bound ? nlohmann::json(*c.eps_bound) : nlohmann::json(nullptr);
  j["window_start"] = c.window_start ? nlohmann::json(*c.window_start) : nlohmann::json(nullptr);
  j["window_end"] = c.window_end ? nlohmann::json(*c.window_end) : nlohmann::json(nullptr);
}

/// Writes via a temporary file and rename so readers never see partial output.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os << content;
    if (!os) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Emits the primary JSON artifact: <out>.json, or stdout when out is empty.
inline void emit_json(const RunConfig& c, const nlohmann::json& j, std::ostream& stdout_stream) {
  if (c.out.empty()) {
    stdout_stream << dump(j);
  } else {
    write_atomic(c.out + ".json", dump(j));
  }
}

inline void emit_csv(const RunConfig& c, const std::string& csv) {
  if (!c.out.empty()) write_atomic(c.out + ".csv", csv);
}

// flow

inline int run_flow(const RunConfig& c, std::ostream& out = std::cout) {
  const auto gen = make_generator(c.gen);
  const auto pair = parse_pair_spec(c.pair.empty() ? "random:K=8" : c.pair, c.seed);
  FlowOptions opt;
  opt.T = c.T;
  opt.dt = c.dt;
  opt.observe = c.observe.empty()
                    ? std::vector<std::string>{"D_f", "D_fbar", "D_f+D_fbar", "chi2_reverse", "grad_norm_sq"}
                    : c.observe;
  opt.store_states = c.store_state;
  opt.floor = c.soft_floor ? FloorPolicy::soft : FloorPolicy::hard;
  const auto trace = integrate_flow(gen, pair, opt);

  const double t0 = c.window_start.value_or(std::min(1.0, c.T / 5.0));
  const double t1 = c.window_end.value_or(c.T);
  nlohmann::json rates = nlohmann::json::object();
  std::map<std::string, double> fitted;
  for (const auto& [key, values] : trace.observables) {
    try {
      fitted[key] = measure_decay_rate(trace.times, values, t0, t1);
      rates[key] = fitted[key];
    } catch (const std::exception&) {
      rates[key] = nullptr;  // observable not positive on the window
    }
  }
  auto summary = flow_summary_json(trace, fitted);
  summary["fitted_rates"] = rates;
  summary["rate_window"] = {t0, t1};
  if (trace.observables.contains("D_f")) summary["D_f_max_increase"] = max_increase(trace.observables.at("D_f"));
  if (trace.observables.contains("D_f") && trace.observables.contains("grad_norm_sq")) {
    summary["dissipation_residual"] = dissipation_residual(trace);
  }
  std::ostringstream csv;
  write_flow_csv(csv, trace, c.store_state);
  emit_csv(c, csv.str());
  emit_json(c, summary, out);
  return kPass;
}

// check

inline std::vector<std::string> checker_ids() {
  return {"gdc",          "two-point",        "kpoint",    "support-reduction", "convexity",
          "strong-convexity", "dual-chi2", "dual-conjugate", "lemma-neighborhood"};
}

/// Witness pairs against gradient dominance of KL: two-value pairs for any
/// generator, Gaussian grid pairs only for KL (their floored tails distort
/// generators that weight rho*^2 / rho).
inline void append_gdc_witnesses(const FGenerator& gen, std::vector<DensityPair>& pairs,
                                 std::vector<nlohmann::json>& labels) {
  for (double ep : {1.0, 0.1}) {
    for (double M : {5.0, 10.0, 15.0, 20.0, 25.0}) {
      pairs.push_back(make_two_point(std::exp(ep), std::exp(-M)));
      labels.push_back({{"family", "two-value"}, {"eps_prime", ep}, {"M", M}});
    }
  }
  if (gen.name() == "kl" || gen.name() == "power:-1") {
    for (double M : {2.0, 5.0, 10.0}) {
      const double s2 = 1.0 / (M * M);
      const auto g = default_gaussian_grid(M, s2);
      pairs.push_back(gaussian_grid_pair(M, s2, g.half_width, g.n));
      labels.push_back({{"family", "gaussian"}, {"M", M}, {"mu", M}, {"sigma2", s2}});
    }
  }
}

inline InequalityReport run_checker(const RunConfig& c) {
  const std::string& id = c.subcommand;
  if (id == "dual-conjugate") {
    const auto pairs = random_pairs(c.samples, 2, std::max<std::size_t>(c.K, 2), c.seed, c.concentration);
    return dual_conjugate_check(c.p, pairs);
  }
  const auto gen = make_generator(c.gen);
  if (id == "gdc") {
    auto pairs = random_pairs(c.samples, 2, std::max<std::size_t>(c.K, 2), c.seed, c.concentration);
    std::vector<nlohmann::json> labels;
    for (const auto& pr : pairs) labels.push_back(detail::simplex_witness(pr.rho, pr.rho_star));
    if (!c.pair.empty()) {
      pairs.push_back(parse_pair_spec(c.pair, c.seed));
      labels.push_back({{"family", "user"}, {"spec", c.pair}});
    }
    append_gdc_witnesses(gen, pairs, labels);
    auto rep = gdc_check(gen, pairs, c.alpha.value_or(0.01), labels);
    rep.details["witness_families"] = nlohmann::json::array();
    const auto g = normalize_slope(gen);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!labels[i].contains("family")) continue;
      auto entry = labels[i];
      entry["ratio"] = grad_norm_sq(g, pairs[i]) / divergence(g, pairs[i]);
      entry["divergence"] = divergence(g, pairs[i]);
      rep.details["witness_families"].push_back(entry);
    }
    return rep;
  }
  if (id == "two-point") {
    const auto xs = make_log_grid(c.x_min, 1.0, c.per_decade, true, false);
    const auto ys = make_log_grid(1.0, c.y_max, c.per_decade, false, true);
    return scan_two_point(gen, xs, ys, c.alpha.value_or(0.01));
  }
  if (id == "kpoint") {
    double alpha = 0.0;
    if (c.alpha) {
      alpha = *c.alpha;
    } else {
      std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
      alpha = 0.9 * optimize_three_point(gen, 10000, rng).min_ratio;
    }
    auto rep = kpoint_check(gen, c.K, c.samples, alpha, c.seed);
    rep.details["alpha_source"] = c.alpha ? "flag" : "0.9 x optimised 3-point minimum";
    return rep;
  }
  if (id == "support-reduction") return support_reduction_probe(gen, c.K, c.samples, c.seed);
  if (id == "convexity") return convexity_check(gen, make_log_grid(c.x_min, c.y_max, c.per_decade));
  if (id == "strong-convexity") return strong_convexity_check(gen, c.samples, c.seed);
  if (id == "dual-chi2") {
    const auto pairs = random_pairs(c.samples, 2, std::max<std::size_t>(c.K, 2), c.seed, c.concentration);
    auto rep = dual_chi2_check(gen, pairs);
    const auto pointwise = dual_chi2_pointwise_check(normalize_slope(gen), c.samples * 100, c.seed + 1);
    rep.details["pointwise"] = pointwise;
    for (const auto& v : pointwise.violations) rep.add_violation({{"check", "pointwise"}, {"witness", v.config}}, v.lhs, v.rhs);
    return rep;
  }
  if (id == "lemma-neighborhood") {
    const auto xs = make_log_grid(c.x_min, 1.0, c.per_decade, true, false);
    const auto ys = make_log_grid(1.0, c.y_max, c.per_decade, false, true);
    const auto scan = scan_two_point(gen, xs, ys, 0.0);
    const double a = std::isfinite(scan.min_ratio) ? std::max(scan.min_ratio, 0.0) : 0.0;
    auto rep = lemma_gdc_neighborhood_check(gen, a);
    rep.details["scan_min_ratio"] = a;
    return rep;
  }
  throw std::invalid_argument("unknown checker '" + id + "'");
}

inline int run_check(const RunConfig& c, std::ostream& out = std::cout) {
  const auto rep = run_checker(c);
  emit_json(c, rep, out);
  return rep.passed ? kPass : kFail;
}

// geodesic

inline int run_geodesic(const RunConfig& c, std::ostream& out = std::cout) {
  const auto pair = parse_pair_spec(c.pair.empty() ? "simplex:0.5,0.5/0.75,0.25" : c.pair, c.seed);
  const std::span<const double> r0(pair.rho), r1(pair.rho_star), w(pair.weights);
  nlohmann::json j;
  j["rho0"] = pair.rho;
  j["rho1"] = pair.rho_star;
  j["bhattacharyya"] = bhattacharyya(r0, r1, w);
  j["bc_clamp_warning"] = bhattacharyya_clamp_warning(r0, r1, w);
  j["distance_sq"] = fr_distance_sq(r0, r1, w);
  j["hellinger_sq"] = hellinger_sq(r0, r1, w);
  j["midpoint"] = geodesic_point(r0, r1, 0.5, w);

  const auto psi0 = geodesic_initial_potential(r0, r1, w);
  const auto states = integrate_geodesic(r0, psi0, 1.0, c.dt, w);
  double gap = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) gap = std::max(gap, std::abs(states.back().rho[i] - pair.rho_star[i]));
  double vmin = std::numeric_limits<double>::infinity();
  double vmax = 0.0;
  for (const auto& s : states) {
    const double v = geodesic_speed(s, w);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  j["ode_endpoint_error"] = gap;
  j["speed"] = vmax;
  j["speed_relative_variation"] = vmax > 0.0 ? (vmax - vmin) / vmax : 0.0;
  j["steps"] = states.size() - 1;
  std::ostringstream csv;
  write_geodesic_csv(csv, states, w);
  emit_csv(c, csv.str());
  emit_json(c, j, out);
  return kPass;
}

// counterexample

inline std::vector<std::string> counterexample_ids() {
  return {"gaussian-hessian", "twovalue-hessian", "gdc-gaussian", "gdc-twovalue"};
}

inline CounterexampleResult counterexample_at(const RunConfig& c, double M) {
  const std::string& id = c.subcommand;
  if (id == "gaussian-hessian") return gaussian_hessian_result(c.mu2, c.sigma2);
  if (id == "twovalue-hessian") return twovalue_hessian_result(c.eps, M);
  if (id == "gdc-gaussian") return gdc_gaussian_result(M);
  if (id == "gdc-twovalue") return gdc_twovalue_result(c.eps, M, c.eps_bound);
  throw std::invalid_argument("unknown counterexample '" + id + "'");
}

inline int run_counterexample(const RunConfig& c, std::ostream& out = std::cout) {
  const auto result = counterexample_at(c, c.M);
  if (!c.sweep_M.empty()) {
    std::ostringstream csv;
    csv << std::setprecision(17) << "M,closed_form_value,quadrature_value,kl_budget,negative,passed\n";
    for (double M : c.sweep_M) {
      const auto r = counterexample_at(c, M);
      csv << M << ',' << r.closed_form_value << ',' << r.quadrature_value << ',' << r.kl_budget << ','
          << (r.negative ? 1 : 0) << ',' << (r.passed() ? 1 : 0) << '\n';
    }
    emit_csv(c, csv.str());
  }
  emit_json(c, result, out);
  return result.passed() ? kPass : kFail;
}

/// Dispatches on c.command and maps exceptions to exit codes.
inline int run(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    if (c.command == "flow") return run_flow(c, out);
    if (c.command == "check") return run_check(c, out);
    if (c.command == "geodesic") return run_geodesic(c, out);
    if (c.command == "counterexample") return run_counterexample(c, out);
    err << "frflow: unknown command '" << c.command << "'\n";
    return kFail;
  } catch (const NumericalError& e) {
    err << "frflow: numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const DomainError& e) {
    err << "frflow: numerical failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "frflow: " << e.what() << '\n';
    return kFail;
  }
}

}  // namespace frflow::cli
