#pragma once

/**
 * @file flow.hpp
 * @brief Fisher-Rao gradient flow d rho = -rho (f'(x) - E_rho f'(x)) with rho* fixed.
 */

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "frflow/density.hpp"
#include "frflow/divergences.hpp"
#include "frflow/errors.hpp"
#include "frflow/geometry.hpp"

namespace frflow {

/// Right-hand side of the flow, -fr_gradient.
inline std::vector<double> flow_rhs(const FGenerator& gen, std::span<const double> rho,
                                    std::span<const double> rho_star, std::span<const double> w = {}) {
  auto v = fr_gradient(gen, rho, rho_star, w);
  for (auto& x : v) x = -x;
  return v;
}

inline std::vector<double> flow_rhs(const FGenerator& gen, const DensityPair& pair) {
  return flow_rhs(gen, pair.rho, pair.rho_star, pair.weights);
}

enum class FloorPolicy {
  hard,  // component below 1e-300 raises BlowUpError
  soft   // clamp to 1e-14 and flag the trace
};

inline constexpr double kSoftFloor = 1e-14;
inline constexpr double kDissipationTolerance = 1e-5;

struct FlowOptions {
  double T = 1.0;
  double dt = 1e-3;
  /// Observable keys recorded at every step; see evaluate_observable.
  std::vector<std::string> observe = {"D_f", "grad_norm_sq"};
  bool store_states = true;
  FloorPolicy floor = FloorPolicy::hard;
  /// Raise StepSizeError when the central-difference dissipation residual
  /// exceeds watchdog_factor * kDissipationTolerance * max(1, |grad|^2).
  bool watchdog = true;
  double watchdog_factor = 100.0;
};

struct FlowTrace {
  std::string generator;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::map<std::string, std::vector<double>> observables;
  std::vector<double> rho_star;
  std::vector<double> weights;
  std::vector<double> final_state;
  bool floor_hit = false;
};

/// Observable keys:
///   D_f            divergence of the flow generator
///   D_fbar         divergence of its *-conjugate, i.e. D_f[rho* || rho]
///   chi2_reverse   chi^2[rho* || rho]
///   grad_norm_sq   squared Fisher-Rao gradient norm
///   D:<gen>        D_gen[rho || rho*] for any registered key
///   Drev:<gen>     D_gen[rho* || rho]
///   a+b            sum of observables
inline double evaluate_observable(std::string_view key, const FGenerator& gen, std::span<const double> rho,
                                  std::span<const double> rho_star, std::span<const double> w) {
  if (const auto plus = key.find('+'); plus != std::string_view::npos) {
    return evaluate_observable(key.substr(0, plus), gen, rho, rho_star, w) +
           evaluate_observable(key.substr(plus + 1), gen, rho, rho_star, w);
  }
  if (key == "D_f") return divergence(gen, rho, rho_star, w);
  if (key == "D_fbar") return divergence(gen, rho_star, rho, w);
  if (key == "grad_norm_sq") return grad_norm_sq(gen, rho, rho_star, w);
  if (key == "chi2_reverse") {
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) s += weight_at(w, i) * rho_star[i] * rho_star[i] / rho[i];
    return s - 1.0;
  }
  if (key.starts_with("D:")) return divergence(make_generator(key.substr(2)), rho, rho_star, w);
  if (key.starts_with("Drev:")) return divergence(make_generator(key.substr(5)), rho_star, rho, w);
  throw std::invalid_argument("unknown observable '" + std::string(key) + "'");
}

namespace detail {

/// Throws BlowUpError or clamps, per policy. Returns true if a clamp happened.
inline bool enforce_floor(std::vector<double>& rho, FloorPolicy policy, double t) {
  bool clamped = false;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (policy == FloorPolicy::hard) {
      if (!(rho[i] >= kPositivityFloorHard) || !std::isfinite(rho[i])) {
        throw BlowUpError("integrate_flow: component " + std::to_string(i) + " left the positive range at t = " +
                          std::to_string(t));
      }
    } else {
      if (!std::isfinite(rho[i])) throw BlowUpError("integrate_flow: non-finite state at t = " + std::to_string(t));
      if (rho[i] < kSoftFloor) {
        rho[i] = kSoftFloor;
        clamped = true;
      }
    }
  }
  return clamped;
}

}  // namespace detail

/// Classical RK4 with fixed step and renormalisation after every step.
inline FlowTrace integrate_flow(const FGenerator& gen, const DensityPair& pair0, const FlowOptions& opt) {
  if (!(opt.T > 0.0) || !(opt.dt > 0.0)) throw std::invalid_argument("integrate_flow requires T > 0 and dt > 0");
  validate(pair0);
  for (const auto& key : opt.observe) evaluate_observable(key, gen, pair0.rho, pair0.rho_star, pair0.weights);

  const std::size_t n = pair0.size();
  const auto steps = static_cast<std::size_t>(std::llround(std::ceil(opt.T / opt.dt - 1e-9)));
  const double h = opt.T / static_cast<double>(steps);
  const std::span<const double> rs(pair0.rho_star);
  const std::span<const double> w(pair0.weights);

  FlowTrace trace;
  trace.generator = gen.name();
  trace.rho_star = pair0.rho_star;
  trace.weights = pair0.weights;
  trace.times.reserve(steps + 1);
  for (const auto& key : opt.observe) trace.observables[key].reserve(steps + 1);

  std::vector<double> d_hist;
  std::vector<double> g_hist;
  auto record = [&](const std::vector<double>& r, double t) {
    trace.times.push_back(t);
    if (opt.store_states) trace.states.push_back(r);
    for (const auto& key : opt.observe) trace.observables[key].push_back(evaluate_observable(key, gen, r, rs, w));
    if (opt.watchdog) {
      d_hist.push_back(divergence(gen, r, rs, w));
      g_hist.push_back(grad_norm_sq(gen, r, rs, w));
      const std::size_t m = d_hist.size();
      if (m >= 3) {
        const double g = g_hist[m - 2];
        const double resid = (d_hist[m - 1] - d_hist[m - 3]) / (2.0 * h) + g;
        const double bound = opt.watchdog_factor * kDissipationTolerance * std::max(1.0, g);
        if (std::abs(resid) > bound) {
          throw StepSizeError("integrate_flow: dissipation residual " + std::to_string(resid) + " at t = " +
                              std::to_string(t - h) + " exceeds watchdog bound; reduce dt");
        }
      }
    }
  };

  std::vector<double> r = pair0.rho;
  record(r, 0.0);
  std::vector<double> tmp(n);
  auto stage = [&](const std::vector<double>& base, const std::vector<double>& k, double scale) {
    for (std::size_t i = 0; i < n; ++i) tmp[i] = base[i] + scale * k[i];
    // under the soft policy intermediate stages are clamped too, so the generator stays in its domain
    if (opt.floor == FloorPolicy::soft) {
      for (auto& v : tmp) {
        if (v < kSoftFloor) {
          v = kSoftFloor;
          trace.floor_hit = true;
        }
      }
    }
    return flow_rhs(gen, tmp, rs, w);
  };
  try {
    for (std::size_t s = 1; s <= steps; ++s) {
      const auto k1 = flow_rhs(gen, r, rs, w);
      const auto k2 = stage(r, k1, 0.5 * h);
      const auto k3 = stage(r, k2, 0.5 * h);
      const auto k4 = stage(r, k3, h);
      for (std::size_t i = 0; i < n; ++i) r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      const double t = h * static_cast<double>(s);
      if (detail::enforce_floor(r, opt.floor, t)) trace.floor_hit = true;
      const double m = weighted_mass(r, w);
      for (auto& v : r) v /= m;
      record(r, t);
    }
  } catch (const DomainError& e) {
    // an RK stage left the generator domain: the step overshot the boundary
    throw BlowUpError(std::string("integrate_flow: ") + e.what());
  }
  trace.final_state = r;
  return trace;
}

inline FlowTrace integrate_flow(const FGenerator& gen, const DensityPair& pair0, double T, double dt,
                                std::vector<std::string> observe) {
  FlowOptions opt;
  opt.T = T;
  opt.dt = dt;
  opt.observe = std::move(observe);
  return integrate_flow(gen, pair0, opt);
}

/// rho_t proportional to rho0^{e^-t} rho*^{1 - e^-t}.
inline std::vector<double> kl_explicit_solution(std::span<const double> rho0, std::span<const double> rho_star,
                                                double t, std::span<const double> w = {}) {
  if (rho0.size() != rho_star.size()) throw std::invalid_argument("kl_explicit_solution: dimension mismatch");
  if (t < 0.0) throw std::invalid_argument("kl_explicit_solution requires t >= 0");
  const double a = std::exp(-t);
  std::vector<double> logv(rho0.size());
  for (std::size_t i = 0; i < rho0.size(); ++i) logv[i] = a * std::log(rho0[i]) + (1.0 - a) * std::log(rho_star[i]);
  const double top = *std::max_element(logv.begin(), logv.end());
  for (auto& v : logv) v = std::exp(v - top);
  const double m = weighted_mass(logv, w);
  for (auto& v : logv) v /= m;
  return logv;
}

/// Least-squares slope of -log(observable) against t over [t0, t1].
inline double measure_decay_rate(std::span<const double> times, std::span<const double> values, double t0, double t1) {
  if (times.size() != values.size()) throw std::invalid_argument("measure_decay_rate: size mismatch");
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t0 - 1e-12 || times[i] > t1 + 1e-12) continue;
    if (!(values[i] > 0.0)) {
      throw std::domain_error("measure_decay_rate: observable not positive at t = " + std::to_string(times[i]));
    }
    const double y = -std::log(values[i]);
    st += times[i];
    sy += y;
    stt += times[i] * times[i];
    sty += times[i] * y;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("measure_decay_rate: fewer than two samples in window");
  const double c = static_cast<double>(count);
  const double denom = c * stt - st * st;
  if (!(denom > 0.0)) throw std::invalid_argument("measure_decay_rate: degenerate time window");
  return (c * sty - st * sy) / denom;
}

inline double measure_decay_rate(const FlowTrace& trace, const std::string& key, double t0, double t1) {
  const auto it = trace.observables.find(key);
  if (it == trace.observables.end()) throw std::invalid_argument("measure_decay_rate: observable '" + key + "' not recorded");
  return measure_decay_rate(trace.times, it->second, t0, t1);
}

/// Worst normalised residual |dD_f/dt + |grad|^2| / max(1, |grad|^2) over interior
/// steps, with a central difference. Needs D_f and grad_norm_sq in the trace.
inline double dissipation_residual(const FlowTrace& trace) {
  const auto& d = trace.observables.at("D_f");
  const auto& g = trace.observables.at("grad_norm_sq");
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < d.size(); ++i) {
    const double deriv = (d[i + 1] - d[i - 1]) / (trace.times[i + 1] - trace.times[i - 1]);
    worst = std::max(worst, std::abs(deriv + g[i]) / std::max(1.0, g[i]));
  }
  return worst;
}

/// Largest increase between consecutive samples of an observable (<= 0 when monotone).
inline double max_increase(std::span<const double> values) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < values.size(); ++i) worst = std::max(worst, values[i] - values[i - 1]);
  return worst;
}

/// CSV: t, observables in key order, optionally rho_0..rho_{K-1}.
inline void write_flow_csv(std::ostream& os, const FlowTrace& trace, bool include_state) {
  os << "t";
  for (const auto& [key, _] : trace.observables) os << ',' << key;
  const bool states = include_state && !trace.states.empty();
  if (states) {
    for (std::size_t i = 0; i < trace.states.front().size(); ++i) os << ",rho_" << i;
  }
  os << '\n' << std::setprecision(17);
  for (std::size_t s = 0; s < trace.times.size(); ++s) {
    os << trace.times[s];
    for (const auto& [key, values] : trace.observables) os << ',' << values[s];
    if (states) {
      for (double v : trace.states[s]) os << ',' << v;
    }
    os << '\n';
  }
}

inline nlohmann::json flow_summary_json(const FlowTrace& trace, const std::map<std::string, double>& fitted_rates) {
  nlohmann::json j;
  j["generator"] = trace.generator;
  j["T"] = trace.times.empty() ? 0.0 : trace.times.back();
  j["steps"] = trace.times.empty() ? 0 : trace.times.size() - 1;
  j["final_state"] = trace.final_state;
  j["fitted_rates"] = fitted_rates;
  j["floor_hit"] = trace.floor_hit;
  nlohmann::json fin = nlohmann::json::object();
  for (const auto& [key, values] : trace.observables) fin[key] = values.back();
  j["final_observables"] = fin;
  return j;
}

}  // namespace frflow
