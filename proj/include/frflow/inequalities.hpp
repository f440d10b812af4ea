#pragma once

/**
 * @file inequalities.hpp
 * @brief Numerical checkers for gradient dominance, geodesic convexity and the
 *        dual gradient dominance inequalities.
 *
 * Every checker returns an InequalityReport. A configuration counts as a
 * violation when lhs < alpha * rhs beyond round-off; configurations whose
 * right-hand side is below kSkipThreshold are skipped (the 0/0 regime).
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "frflow/density.hpp"
#include "frflow/divergences.hpp"
#include "frflow/geometry.hpp"

namespace frflow {

inline constexpr double kSkipThreshold = 1e-14;
inline constexpr double kCrossCheckTolerance = 1e-10;
/// Only the first few violations are stored; violation_count has the total.
inline constexpr std::size_t kMaxStoredViolations = 16;

struct Violation {
  nlohmann::json config;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct InequalityReport {
  std::string inequality_id;
  std::string generator;
  std::optional<double> alpha_tested;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double min_ratio = std::numeric_limits<double>::infinity();
  nlohmann::json argmin_witness = nullptr;
  std::vector<Violation> violations;
  std::size_t violation_count = 0;
  bool passed = true;
  nlohmann::json details = nlohmann::json::object();

  void observe_ratio(double ratio, const nlohmann::json& witness) {
    if (ratio < min_ratio) {
      min_ratio = ratio;
      argmin_witness = witness;
    }
  }

  void add_violation(nlohmann::json config, double lhs, double rhs) {
    ++violation_count;
    if (violations.size() < kMaxStoredViolations) violations.push_back({std::move(config), lhs, rhs});
    passed = false;
  }
};

inline void to_json(nlohmann::json& j, const Violation& v) {
  j = {{"config", v.config}, {"lhs", v.lhs}, {"rhs", v.rhs}};
}

inline void to_json(nlohmann::json& j, const InequalityReport& r) {
  j = nlohmann::json::object();
  j["inequality_id"] = r.inequality_id;
  j["generator"] = r.generator;
  j["alpha_tested"] = r.alpha_tested ? nlohmann::json(*r.alpha_tested) : nlohmann::json(nullptr);
  j["samples"] = r.samples;
  j["skipped"] = r.skipped;
  j["min_ratio"] = std::isfinite(r.min_ratio) ? nlohmann::json(r.min_ratio) : nlohmann::json(nullptr);
  j["argmin_witness"] = r.argmin_witness;
  j["violations"] = r.violations;
  j["violation_count"] = r.violation_count;
  j["passed"] = r.passed;
  j["details"] = r.details;
}

namespace detail {

inline nlohmann::json simplex_witness(std::span<const double> rho, std::span<const double> rho_star) {
  return {{"rho", std::vector<double>(rho.begin(), rho.end())},
          {"rho_star", std::vector<double>(rho_star.begin(), rho_star.end())}};
}

inline double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

/// Round-off allowance for lhs >= rhs comparisons.
inline bool below(double lhs, double rhs) { return lhs < rhs - 1e-12 * std::max(1.0, std::abs(rhs)); }

}  // namespace detail

/// `count` simplex pairs with K uniform in [k_min, k_max], Dirichlet(concentration).
inline std::vector<DensityPair> random_pairs(std::size_t count, std::size_t k_min, std::size_t k_max,
                                             std::uint64_t seed, double concentration = 1.0) {
  if (k_min < 2 || k_max < k_min) throw std::invalid_argument("random_pairs requires 2 <= k_min <= k_max");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> kdist(k_min, k_max);
  std::vector<DensityPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_random_pair(kdist(rng), rng, concentration));
  return out;
}

// Gradient dominance  |grad D_f|^2 >= alpha D_f

/// Checks grad_norm_sq >= alpha D_f on each pair. `labels`, when given, replaces
/// the serialised pair as witness (useful for large grid pairs).
inline InequalityReport gdc_check(const FGenerator& gen, std::span<const DensityPair> pairs, double alpha,
                                  std::span<const nlohmann::json> labels = {}) {
  const FGenerator g = normalize_slope(gen);
  InequalityReport rep;
  rep.inequality_id = "gdc";
  rep.generator = gen.name();
  rep.alpha_tested = alpha;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    ++rep.samples;
    const double d = divergence(g, pair);
    const double gn = grad_norm_sq(g, pair);
    if (d < kSkipThreshold || !std::isfinite(d) || !std::isfinite(gn)) {
      ++rep.skipped;
      continue;
    }
    nlohmann::json witness;
    if (!labels.empty()) {
      witness = labels[i];
    } else if (pair.kind == Support::simplex) {
      witness = detail::simplex_witness(pair.rho, pair.rho_star);
    } else {
      witness = {{"kind", "grid1d"}, {"n", pair.size()}};
    }
    const double ratio = gn / d;
    rep.observe_ratio(ratio, witness);
    if (ratio < alpha) rep.add_violation(witness, gn, alpha * d);
  }
  return rep;
}

// Two-point condition  (f'(y) - f'(x))^2 >= alpha (1/x - 1/y)(f(x)/(1-x) - f(y)/(1-y))

struct TwoPointTerms {
  double lhs;
  double rhs;
};

/// Both sides of the two-point inequality; x and y may be on the same side of 1.
inline TwoPointTerms two_point_terms(const FGenerator& normalized, double x, double y) {
  const double d = normalized.fp(y) - normalized.fp(x);
  return {d * d, (1.0 / x - 1.0 / y) * (f_ratio(normalized, x) - f_ratio(normalized, y))};
}

/// LHS / RHS of the two-point condition for 0 < x < 1 < y; +inf when RHS < 1e-300.
inline double two_point_ratio(const FGenerator& gen, double x, double y) {
  if (!(x > 0.0 && x < 1.0 && y > 1.0)) throw std::invalid_argument("two_point_ratio requires 0 < x < 1 < y");
  const auto t = two_point_terms(normalize_slope(gen), x, y);
  if (t.rhs < 1e-300) return std::numeric_limits<double>::infinity();
  return t.lhs / t.rhs;
}

/// Points 10^(k / per_decade) between lo and hi; endpoints included on request.
inline std::vector<double> make_log_grid(double lo, double hi, int per_decade, bool include_lo = true,
                                         bool include_hi = true) {
  if (!(lo > 0.0 && hi > lo) || per_decade < 1) throw std::invalid_argument("make_log_grid: need 0 < lo < hi");
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  const auto n = static_cast<long>(std::llround(std::ceil((b - a) * per_decade - 1e-9)));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) {
    if (k == 0 && !include_lo) continue;
    if (k == n && !include_hi) continue;
    const double e = k == n ? b : a + static_cast<double>(k) / per_decade;
    g.push_back(std::pow(10.0, e));
  }
  return g;
}

/// Infimum of two_point_ratio over the product grid; violations are points below alpha.
inline InequalityReport scan_two_point(const FGenerator& gen, std::span<const double> xs, std::span<const double> ys,
                                       double alpha) {
  const FGenerator g = normalize_slope(gen);
  InequalityReport rep;
  rep.inequality_id = "two-point";
  rep.generator = gen.name();
  rep.alpha_tested = alpha;
  for (double x : xs) {
    if (!(x > 0.0 && x < 1.0)) throw std::invalid_argument("scan_two_point: x grid must lie in (0, 1)");
  }
  for (double y : ys) {
    if (!(y > 1.0)) throw std::invalid_argument("scan_two_point: y grid must lie in (1, inf)");
  }
  std::vector<double> fpy(ys.size()), fry(ys.size());
  for (std::size_t j = 0; j < ys.size(); ++j) {
    fpy[j] = g.fp(ys[j]);
    fry[j] = f_ratio(g, ys[j]);
  }
  for (double x : xs) {
    const double fpx = g.fp(x);
    const double frx = f_ratio(g, x);
    for (std::size_t j = 0; j < ys.size(); ++j) {
      ++rep.samples;
      const double d = fpy[j] - fpx;
      const double lhs = d * d;
      const double rhs = (1.0 / x - 1.0 / ys[j]) * (frx - fry[j]);
      if (rhs < kSkipThreshold || !std::isfinite(lhs) || !std::isfinite(rhs)) {
        ++rep.skipped;
        continue;
      }
      const double ratio = lhs / rhs;
      const nlohmann::json witness = {{"x", x}, {"y", ys[j]}};
      rep.observe_ratio(ratio, witness);
      if (ratio < alpha) rep.add_violation(witness, lhs, alpha * rhs);
    }
  }
  return rep;
}

// K-point form: sum rho (f'(x) - mean)^2 >= alpha sum (rho / x) f(x)

struct KPointTerms {
  double lhs;
  double rhs;
  double lhs_pairwise;
  double rhs_pairwise;
};

/// Direct and pairwise double-sum forms of both sides on a simplex configuration.
inline KPointTerms kpoint_terms(const FGenerator& normalized, std::span<const double> rho,
                                std::span<const double> rho_star) {
  const std::size_t k = rho.size();
  std::vector<double> x(k), fp(k), fr(k);
  double mean = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    x[i] = rho[i] / rho_star[i];
    fp[i] = normalized.fp(x[i]);
    fr[i] = f_ratio(normalized, x[i]);
    mean += rho[i] * fp[i];
  }
  KPointTerms t{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < k; ++i) {
    const double d = fp[i] - mean;
    t.lhs += rho[i] * d * d;
    t.rhs += rho_star[i] * normalized.f(x[i]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double d = fp[i] - fp[j];
      t.lhs_pairwise += rho[i] * rho[j] * d * d;
      t.rhs_pairwise += rho[i] * rho[j] * (1.0 / x[j] - 1.0 / x[i]) * (fr[j] - fr[i]);
    }
  }
  return t;
}

inline InequalityReport kpoint_check(const FGenerator& gen, std::size_t K, std::size_t samples, double alpha,
                                     std::uint64_t seed) {
  if (K < 2) throw std::invalid_argument("kpoint_check requires K >= 2");
  const FGenerator g = normalize_slope(gen);
  InequalityReport rep;
  rep.inequality_id = "kpoint";
  rep.generator = gen.name();
  rep.alpha_tested = alpha;
  std::mt19937_64 rng(seed);
  double worst_cross = 0.0;
  std::size_t cross_failures = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto pair = sample_random_pair(K, rng, 1.0);
    ++rep.samples;
    const auto t = kpoint_terms(g, pair.rho, pair.rho_star);
    const double gap = std::max(detail::rel_gap(t.lhs, t.lhs_pairwise), detail::rel_gap(t.rhs, t.rhs_pairwise));
    worst_cross = std::max(worst_cross, gap);
    if (gap > kCrossCheckTolerance) {
      ++cross_failures;
      rep.add_violation({{"check", "pairwise-form"}, {"witness", detail::simplex_witness(pair.rho, pair.rho_star)}},
                        t.lhs, t.lhs_pairwise);
    }
    if (t.rhs < kSkipThreshold || !std::isfinite(t.lhs) || !std::isfinite(t.rhs)) {
      ++rep.skipped;
      continue;
    }
    const double ratio = t.lhs / t.rhs;
    const auto witness = detail::simplex_witness(pair.rho, pair.rho_star);
    rep.observe_ratio(ratio, witness);
    if (ratio < alpha) rep.add_violation(witness, t.lhs, alpha * t.rhs);
  }
  rep.details["K"] = K;
  rep.details["seed"] = seed;
  rep.details["max_pairwise_gap"] = worst_cross;
  rep.details["pairwise_failures"] = cross_failures;
  return rep;
}

/// Ratio of the K-point form on a configuration; +inf when skipped.
inline double kpoint_ratio(const FGenerator& normalized, std::span<const double> rho, std::span<const double> rho_star) {
  const auto t = kpoint_terms(normalized, rho, rho_star);
  if (t.rhs < kSkipThreshold || !std::isfinite(t.lhs) || !std::isfinite(t.rhs)) {
    return std::numeric_limits<double>::infinity();
  }
  return t.lhs / t.rhs;
}

struct ThreePointResult {
  double min_ratio = std::numeric_limits<double>::infinity();
  std::array<double, 3> rho{};
  std::array<double, 3> rho_star{};
};

namespace detail {

inline void softmax3(const double* logits, std::array<double, 3>& out) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (out[static_cast<std::size_t>(i)] = std::exp(logits[i] - m));
  for (auto& v : out) v /= s;
}

}  // namespace detail

/// Minimum of the K-point ratio over 3-point configurations: the best of
/// `samples` random draws refined by coordinate descent on softmax logits
/// (10 restarts, 200 iterations, step halved on failure, tolerance 1e-9).
inline ThreePointResult optimize_three_point(const FGenerator& gen, std::size_t samples, std::mt19937_64& rng) {
  const FGenerator g = normalize_slope(gen);
  constexpr double kLogitBound = 30.0;
  ThreePointResult best;
  std::array<double, 6> best_start{};
  auto objective = [&](const std::array<double, 6>& th, std::array<double, 3>& r, std::array<double, 3>& rs) {
    detail::softmax3(th.data(), r);
    detail::softmax3(th.data() + 3, rs);
    try {
      return kpoint_ratio(g, r, rs);
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  std::array<double, 3> r{}, rs{};
  // seed the first restart from the best sampled configuration
  double best_sampled = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < std::max<std::size_t>(samples, 1); ++s) {
    const auto pair = sample_random_pair(3, rng, 1.0);
    std::array<double, 6> th{};
    for (std::size_t i = 0; i < 3; ++i) {
      th[i] = std::log(pair.rho[i]);
      th[i + 3] = std::log(pair.rho_star[i]);
    }
    const double v = objective(th, r, rs);
    if (v < best_sampled) {
      best_sampled = v;
      best_start = th;
    }
  }
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int restart = 0; restart < 10; ++restart) {
    std::array<double, 6> th = best_start;
    if (restart > 0) {
      for (auto& v : th) v = normal(rng);
    }
    double val = objective(th, r, rs);
    double step = 1.0;
    for (int it = 0; it < 200 && step >= 1e-9; ++it) {
      bool improved = false;
      for (std::size_t c = 0; c < th.size(); ++c) {
        for (double sign : {1.0, -1.0}) {
          auto trial = th;
          trial[c] = std::clamp(trial[c] + sign * step, -kLogitBound, kLogitBound);
          const double v = objective(trial, r, rs);
          if (v < val) {
            val = v;
            th = trial;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (val < best.min_ratio) {
      best.min_ratio = val;
      detail::softmax3(th.data(), best.rho);
      detail::softmax3(th.data() + 3, best.rho_star);
    }
  }
  return best;
}

/// Compares the minimum over sampled K-point configurations (a) with the optimised
/// 3-point minimum (b). Passes when a >= b - 1e-6 max(1, b).
inline InequalityReport support_reduction_probe(const FGenerator& gen, std::size_t K, std::size_t samples,
                                                std::uint64_t seed) {
  if (K < 4) throw std::invalid_argument("support_reduction_probe requires K >= 4");
  const FGenerator g = normalize_slope(gen);
  InequalityReport rep;
  rep.inequality_id = "support-reduction";
  rep.generator = gen.name();
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto pair = sample_random_pair(K, rng, 1.0);
    ++rep.samples;
    const double ratio = kpoint_ratio(g, pair.rho, pair.rho_star);
    if (!std::isfinite(ratio)) {
      ++rep.skipped;
      continue;
    }
    rep.observe_ratio(ratio, detail::simplex_witness(pair.rho, pair.rho_star));
  }
  const auto three = optimize_three_point(gen, std::min<std::size_t>(samples, 10000), rng);
  const double a = rep.min_ratio;
  const double b = three.min_ratio;
  rep.details["K"] = K;
  rep.details["seed"] = seed;
  rep.details["kpoint_min"] = std::isfinite(a) ? nlohmann::json(a) : nlohmann::json(nullptr);
  rep.details["threepoint_min"] = std::isfinite(b) ? nlohmann::json(b) : nlohmann::json(nullptr);
  rep.details["threepoint_witness"] = detail::simplex_witness(three.rho, three.rho_star);
  rep.details["gap"] = (std::isfinite(a) && std::isfinite(b)) ? nlohmann::json(a - b) : nlohmann::json(nullptr);
  if (std::isfinite(b) && a < b - 1e-6 * std::max(1.0, b)) {
    rep.add_violation({{"check", "support-reduction"}, {"kpoint_witness", rep.argmin_witness}}, a, b);
  }
  return rep;
}

/// inf over the grid of x^2 f''(x).
inline double sufficient_alpha_s(const FGenerator& gen, std::span<const double> grid) {
  double m = std::numeric_limits<double>::infinity();
  for (double x : grid) {
    if (!(x > 0.0 && x <= 1.0)) throw std::invalid_argument("sufficient_alpha_s: grid must lie in (0, 1]");
    m = std::min(m, x * x * gen.fpp(x));
  }
  return m;
}

// Geodesic convexity

/// h(x) = 2 x f''(x) + f'(x) - f'(1).
inline double convexity_h(const FGenerator& gen, double x) { return 2.0 * x * gen.fpp(x) + gen.fp(x) - gen.fp(1.0); }

/// Minimum of h over a grid; violations where h < 0.
inline InequalityReport convexity_check(const FGenerator& gen, std::span<const double> grid) {
  InequalityReport rep;
  rep.inequality_id = "convexity";
  rep.generator = gen.name();
  rep.alpha_tested = 0.0;
  for (double x : grid) {
    ++rep.samples;
    const double h = convexity_h(gen, x);
    const nlohmann::json witness = {{"x", x}, {"h", h}};
    rep.observe_ratio(h, witness);
    if (h < -1e-12) rep.add_violation(witness, h, 0.0);
  }
  rep.details["h_at_1"] = convexity_h(gen, 1.0);
  return rep;
}

namespace detail {

inline bool fpp_half_bound_on(const FGenerator& gen, double lo, double hi) {
  const double target = 0.5 * gen.fpp(1.0);
  constexpr int kSamples = 256;
  for (int i = 0; i <= kSamples; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / kSamples;
    if (gen.fpp(x) < target) return false;
  }
  return true;
}

template <class Pred>
double bisect_largest(Pred holds, double cap) {
  if (holds(cap)) return cap;
  double lo = 0.0;
  double hi = cap;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (holds(mid)) lo = mid; else hi = mid;
  }
  return lo;
}

}  // namespace detail

/// Largest delta <= 1 with f'' >= f''(1)/2 on [1, 1 + delta].
inline double strong_convexity_delta(const FGenerator& gen) {
  return detail::bisect_largest([&](double d) { return detail::fpp_half_bound_on(gen, 1.0, 1.0 + d); }, 1.0);
}

/// alpha_f = min{f''(1), delta_f f''(1) / 2}.
inline double strong_convexity_alpha(const FGenerator& gen) {
  const double c = gen.fpp(1.0);
  return std::min(c, strong_convexity_delta(gen) * c / 2.0);
}

/// Random (pair, psi) configurations must satisfy Hess >= (alpha_f / 2) metric.
/// Also checks h >= 0 and midpoint concavity of x f'(x) on a log grid over [1e-4, 1e4].
inline InequalityReport strong_convexity_check(const FGenerator& gen, std::size_t samples, std::uint64_t seed) {
  const FGenerator g = normalize_slope(gen);
  if (!(g.fpp(1.0) > 0.0)) throw std::invalid_argument("strong_convexity_check requires f''(1) > 0");
  InequalityReport rep;
  rep.inequality_id = "strong-convexity";
  rep.generator = gen.name();
  const double delta = strong_convexity_delta(g);
  const double alpha = std::min(g.fpp(1.0), delta * g.fpp(1.0) / 2.0);
  rep.alpha_tested = alpha / 2.0;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> kdist(2, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto pair = sample_random_pair(kdist(rng), rng, 1.0);
    std::vector<double> psi(pair.size());
    for (auto& v : psi) v = normal(rng);
    ++rep.samples;
    const auto sigma = tangent_from_potential(pair.rho, psi, pair.weights);
    const double m = metric(pair.rho, sigma, sigma, pair.weights);
    const double hq = hessian_quadratic_form(g, pair, psi);
    if (m < kSkipThreshold || !std::isfinite(hq)) {
      ++rep.skipped;
      continue;
    }
    nlohmann::json witness = detail::simplex_witness(pair.rho, pair.rho_star);
    witness["psi"] = psi;
    rep.observe_ratio(hq / m, witness);
    if (detail::below(hq, 0.5 * alpha * m)) rep.add_violation(witness, hq, 0.5 * alpha * m);
  }

  const auto grid = make_log_grid(1e-4, 1e4, 50);
  double h_min = std::numeric_limits<double>::infinity();
  double h_arg = 1.0;
  for (double x : grid) {
    const double h = convexity_h(g, x);
    if (h < h_min) {
      h_min = h;
      h_arg = x;
    }
  }
  if (h_min < -1e-12) rep.add_violation({{"check", "h-nonnegative"}, {"x", h_arg}, {"h", h_min}}, h_min, 0.0);

  auto xfp = [&](double x) { return x * g.fp(x); };
  double worst = std::numeric_limits<double>::infinity();
  nlohmann::json concave_witness = nullptr;
  for (std::size_t i = 0; i + 2 < grid.size(); ++i) {
    const double a = grid[i];
    const double b = grid[i + 2];
    const double mid = xfp(0.5 * (a + b));
    const double chord = 0.5 * (xfp(a) + xfp(b));
    const double margin = mid - chord;
    if (margin < worst) {
      worst = margin;
      concave_witness = {{"check", "xfp-concave"}, {"a", a}, {"b", b}, {"midpoint_value", mid}, {"chord_value", chord}};
    }
  }
  const double scale = std::max(1.0, std::abs(xfp(grid.back())));
  if (worst < -1e-12 * scale) rep.add_violation(concave_witness, worst, 0.0);

  rep.details["delta_f"] = delta;
  rep.details["alpha_f"] = alpha;
  rep.details["h_min"] = h_min;
  rep.details["h_argmin"] = h_arg;
  rep.details["h_at_e_minus_3"] = convexity_h(g, std::exp(-3.0));
  rep.details["xfp_concavity_margin"] = worst;
  rep.details["xfp_witness"] = concave_witness;
  return rep;
}

// Dual gradient dominance with the reverse chi-square partner

/// Largest delta < 1/4 with f'' >= f''(1)/2 on (1/(1+2 delta), 1/(1-2 delta)).
inline double dual_chi2_delta(const FGenerator& gen) {
  return detail::bisect_largest(
      [&](double d) { return detail::fpp_half_bound_on(gen, 1.0 / (1.0 + 2.0 * d), 1.0 / (1.0 - 2.0 * d)); },
      0.25 - 1e-6);
}

/// alpha_f = 1/2 min{1, alpha'_f, delta_f^2 f''(1) / (4 (1 + delta_f)^2)},
/// alpha'_f = f''(1) delta_f / (2 (1 + 2 delta_f)(1 + delta_f)).
inline double dual_chi2_alpha(const FGenerator& gen) {
  const double d = dual_chi2_delta(gen);
  const double c = gen.fpp(1.0);
  const double a1 = c * d / (2.0 * (1.0 + 2.0 * d) * (1.0 + d));
  const double a2 = d * d * c / (4.0 * (1.0 + d) * (1.0 + d));
  return 0.5 * std::min({1.0, a1, a2});
}

struct DualChi2Terms {
  double mu2;
  double lhs;         // mu form
  double lhs_direct;  // -sum (-rho f' + rho E f')(1 - (rho*/rho)^2)
  double d_f;
  double chi2;        // chi^2[rho* || rho] = mu^2 - 1
};

inline DualChi2Terms dual_chi2_terms(const FGenerator& gen, const DensityPair& pair) {
  DualChi2Terms t{};
  for (std::size_t i = 0; i < pair.size(); ++i) {
    t.mu2 += pair.weights[i] * pair.rho_star[i] * pair.rho_star[i] / pair.rho[i];
  }
  const double mu = std::sqrt(t.mu2);
  const double fp_mu = gen.fp(1.0 / mu);
  const auto fp = first_variation(gen, pair.rho, pair.rho_star);
  const double mean = expectation(pair.rho, fp, pair.weights);
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const double inv = pair.rho_star[i] / pair.rho[i];
    const double wr = pair.weights[i] * pair.rho[i];
    t.lhs += wr * (fp_mu - fp[i]) * (inv * inv - t.mu2);
    t.lhs_direct -= wr * (mean - fp[i]) * (1.0 - inv * inv);
  }
  t.d_f = divergence(gen, pair);
  t.chi2 = t.mu2 - 1.0;
  return t;
}

/// Checks LHS >= D_f and LHS >= 2 alpha_f chi^2[rho* || rho] on each pair.
inline InequalityReport dual_chi2_check(const FGenerator& gen, std::span<const DensityPair> pairs) {
  const FGenerator g = normalize_slope(gen);
  if (!(g.fpp(1.0) > 0.0)) throw std::invalid_argument("dual_chi2_check requires f''(1) > 0");
  InequalityReport rep;
  rep.inequality_id = "dual-chi2";
  rep.generator = gen.name();
  const double delta = dual_chi2_delta(g);
  const double alpha = dual_chi2_alpha(g);
  rep.alpha_tested = alpha;
  if (delta <= 1e-6) rep.add_violation({{"check", "delta_f-bisection"}, {"delta_f", delta}}, delta, 1e-6);
  double worst_cross = 0.0;
  for (const auto& pair : pairs) {
    ++rep.samples;
    const auto t = dual_chi2_terms(g, pair);
    const auto witness = detail::simplex_witness(pair.rho, pair.rho_star);
    const double gap = detail::rel_gap(t.lhs, t.lhs_direct);
    worst_cross = std::max(worst_cross, gap);
    if (gap > kCrossCheckTolerance) rep.add_violation({{"check", "lhs-forms"}, {"witness", witness}}, t.lhs, t.lhs_direct);
    const double rhs = std::max(t.d_f, 2.0 * alpha * t.chi2);
    if (rhs < kSkipThreshold) {
      ++rep.skipped;
      continue;
    }
    rep.observe_ratio(t.lhs / rhs, witness);
    if (detail::below(t.lhs, t.d_f)) rep.add_violation({{"check", "lhs>=D_f"}, {"witness", witness}}, t.lhs, t.d_f);
    if (detail::below(t.lhs, 2.0 * alpha * t.chi2)) {
      rep.add_violation({{"check", "lhs>=2alpha*chi2"}, {"witness", witness}}, t.lhs, 2.0 * alpha * t.chi2);
    }
  }
  rep.details["delta_f"] = delta;
  rep.details["alpha_f"] = alpha;
  rep.details["max_lhs_form_gap"] = worst_cross;
  return rep;
}

struct DualChi2PointwiseTerms {
  double lhs;
  double rhs;
};

/// (f'(1/mu) - f'(1/x))(x^2 - mu^2) >= mu (x - mu) f'(1/mu) - mu^2 x (f(1/mu) - f(1/x)).
inline DualChi2PointwiseTerms dual_chi2_pointwise_terms(const FGenerator& gen, double x, double mu) {
  return {(gen.fp(1.0 / mu) - gen.fp(1.0 / x)) * (x * x - mu * mu),
          mu * (x - mu) * gen.fp(1.0 / mu) - mu * mu * x * (gen.f(1.0 / mu) - gen.f(1.0 / x))};
}

/// Pointwise lemma on (x, mu) drawn log-uniformly from [1e-3, 1e3]^2.
inline InequalityReport dual_chi2_pointwise_check(const FGenerator& gen, std::size_t samples, std::uint64_t seed) {
  InequalityReport rep;
  rep.inequality_id = "dual-chi2-pointwise";
  rep.generator = gen.name();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (std::size_t s = 0; s < samples; ++s) {
    const double x = std::pow(10.0, u(rng));
    const double mu = std::pow(10.0, u(rng));
    ++rep.samples;
    const auto t = dual_chi2_pointwise_terms(gen, x, mu);
    const double scale = std::max({1.0, std::abs(t.lhs), std::abs(t.rhs), mu * mu * x * std::abs(gen.f(1.0 / x))});
    const nlohmann::json witness = {{"x", x}, {"mu", mu}};
    const double margin = (t.lhs - t.rhs) / scale;
    rep.observe_ratio(margin, witness);
    if (margin < -1e-12) rep.add_violation(witness, t.lhs, t.rhs);
  }
  rep.details["min_ratio_meaning"] = "scaled margin (lhs - rhs) / max(1, |lhs|, |rhs|)";
  return rep;
}

// Dual gradient dominance with the *-conjugate partner (power family)

/// 1 for p <= -2 or p >= -1, 1/2 in between.
inline double dual_conjugate_factor(double p) { return (p <= -2.0 || p >= -1.0) ? 1.0 : 0.5; }

struct DualConjugateTerms {
  double lhs;
  double d_f;
  double d_fbar;
  std::optional<double> closed_form;
  double scale;  // sum of |terms| in lhs, the round-off scale
};

inline DualConjugateTerms dual_conjugate_terms(double p, const DensityPair& pair) {
  const FGenerator gen = power_family(p);
  const FGenerator bar = conjugate(gen);
  const auto fp = first_variation(gen, pair.rho, pair.rho_star);
  const double mean = expectation(pair.rho, fp, pair.weights);
  DualConjugateTerms t{0.0, divergence(gen, pair), divergence(bar, pair), std::nullopt, 0.0};
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const double x = pair.ratio(i);
    const double term = -pair.weights[i] * pair.rho[i] * (mean - fp[i]) * bar.fp(x);
    t.lhs += term;
    t.scale += std::abs(term);
  }
  if (p != -1.0 && p != -2.0) {
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < pair.size(); ++i) {
      const double lx = std::log(pair.rho[i] / pair.rho_star[i]);
      a += pair.weights[i] * pair.rho[i] * std::exp((p + 1.0) * lx);
      b += pair.weights[i] * pair.rho_star[i] * std::exp(-(p + 1.0) * lx);
    }
    t.closed_form = (a * b - 1.0) / ((p + 1.0) * (p + 2.0));
  }
  return t;
}

/// -d/dt D_fbar >= c (D_fbar + D_f) along the power-family flow, checked pointwise.
inline InequalityReport dual_conjugate_check(double p, std::span<const DensityPair> pairs) {
  const double c = dual_conjugate_factor(p);
  InequalityReport rep;
  rep.inequality_id = "dual-conjugate";
  rep.generator = format_power_key(p);
  rep.alpha_tested = c;
  double worst_closed = 0.0;
  double worst_equality = 0.0;
  for (const auto& pair : pairs) {
    ++rep.samples;
    const auto t = dual_conjugate_terms(p, pair);
    const auto witness = detail::simplex_witness(pair.rho, pair.rho_star);
    const double sum = t.d_f + t.d_fbar;
    if (t.closed_form) {
      const double gap = std::abs(t.lhs - *t.closed_form) / std::max(1.0, t.scale);
      worst_closed = std::max(worst_closed, gap);
      if (gap > kCrossCheckTolerance) {
        rep.add_violation({{"check", "closed-form"}, {"witness", witness}}, t.lhs, *t.closed_form);
      }
    } else {
      worst_equality = std::max(worst_equality, std::abs(t.lhs - sum));
    }
    if (sum < kSkipThreshold) {
      ++rep.skipped;
      continue;
    }
    rep.observe_ratio(t.lhs / sum, witness);
    if (detail::below(t.lhs, c * sum)) rep.add_violation(witness, t.lhs, c * sum);
  }
  rep.details["p"] = p;
  rep.details["factor"] = c;
  if (p == -1.0 || p == -2.0) {
    rep.details["max_equality_gap"] = worst_equality;
  } else {
    rep.details["max_closed_form_gap"] = worst_closed;
  }
  return rep;
}

// Neighbourhood extension of the two-point condition

/// Descends delta over {0.95, 0.90, ..., 0.05} and accepts the first delta whose
/// sampled infimum of the two-point ratio over x in (1 - delta, 1 + delta), y in
/// [1e-4, 1e4] is at least 0.1 alpha_from_scan. Then alpha_delta = min(infimum, alpha_from_scan).
/// A non-positive scan constant (<= 1e-8) means the precondition fails: reported as skipped.
inline InequalityReport lemma_gdc_neighborhood_check(const FGenerator& gen, double alpha_from_scan) {
  const FGenerator g = normalize_slope(gen);
  InequalityReport rep;
  rep.inequality_id = "lemma-neighborhood";
  rep.generator = gen.name();
  rep.alpha_tested = alpha_from_scan;
  if (!(alpha_from_scan > 1e-8)) {
    rep.details["status"] = "skipped";
    rep.add_violation({{"check", "gating"}, {"status", "skipped"}, {"alpha_from_scan", alpha_from_scan}},
                      alpha_from_scan, 1e-8);
    return rep;
  }
  const auto ys = make_log_grid(1e-4, 1e4, 100);
  std::vector<double> fpy(ys.size()), fry(ys.size());
  for (std::size_t j = 0; j < ys.size(); ++j) {
    fpy[j] = g.fp(ys[j]);
    fry[j] = f_ratio(g, ys[j]);
  }
  constexpr int kXPoints = 80;
  for (int step = 19; step >= 1; --step) {
    const double delta = 0.05 * step;
    InequalityReport trial;
    for (int i = 0; i <= kXPoints; ++i) {
      const double x = (1.0 - delta) + 2.0 * delta * (static_cast<double>(i) + 0.5) / (kXPoints + 1);
      const double fpx = g.fp(x);
      const double frx = f_ratio(g, x);
      for (std::size_t j = 0; j < ys.size(); ++j) {
        ++trial.samples;
        if (ys[j] == x) continue;  // 0 >= 0
        const double d = fpy[j] - fpx;
        const double lhs = d * d;
        const double rhs = (1.0 / x - 1.0 / ys[j]) * (frx - fry[j]);
        if (rhs < kSkipThreshold) {
          ++trial.skipped;
          continue;
        }
        trial.observe_ratio(lhs / rhs, {{"x", x}, {"y", ys[j]}});
      }
    }
    rep.samples += trial.samples;
    rep.skipped += trial.skipped;
    if (trial.min_ratio >= 0.1 * alpha_from_scan) {
      rep.min_ratio = trial.min_ratio;
      rep.argmin_witness = trial.argmin_witness;
      rep.details["status"] = "found";
      rep.details["delta"] = delta;
      rep.details["alpha_delta"] = std::min(trial.min_ratio, alpha_from_scan);
      return rep;
    }
  }
  rep.details["status"] = "not-found";
  rep.add_violation({{"check", "no-delta"}}, 0.0, 0.1 * alpha_from_scan);
  return rep;
}

}  // namespace frflow
