#pragma once

/**
 * @file counterexamples.hpp
 * @brief Closed forms for the Gaussian and two-value witnesses against geodesic
 *        convexity and gradient dominance of KL, with quadrature cross-checks.
 *
 * H(rho, rho*) is the KL Hessian form in direction psi = log(rho/rho*):
 *   H = E_rho[(l - E l)^2] + 1/2 E_rho[(l - E l)^3],  l = log(rho/rho*).
 * G(rho, rho*) = E_rho[(l - E l)^2] is the squared gradient norm of KL.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "frflow/density.hpp"
#include "frflow/divergences.hpp"
#include "frflow/geometry.hpp"

namespace frflow {

inline constexpr double kCounterexampleTolerance = 1e-6;

struct CounterexampleResult {
  std::string construction;  // gaussian | two_value
  std::string quantity;      // hessian | gdc_ratio
  std::map<std::string, double> parameters;
  double closed_form_value = 0.0;
  double quadrature_value = 0.0;
  double kl_budget = 0.0;
  bool negative = false;
  std::map<std::string, bool> checks;
  nlohmann::json details = nlohmann::json::object();

  bool agreement() const {
    return std::abs(closed_form_value - quadrature_value) <= kCounterexampleTolerance * std::max(1.0, std::abs(closed_form_value));
  }

  bool passed() const {
    if (!agreement()) return false;
    for (const auto& [_, ok] : checks) {
      if (!ok) return false;
    }
    return true;
  }
};

inline void to_json(nlohmann::json& j, const CounterexampleResult& r) {
  j = nlohmann::json::object();
  j["construction"] = r.construction;
  j["quantity"] = r.quantity;
  j["parameters"] = r.parameters;
  j["closed_form_value"] = r.closed_form_value;
  j["quadrature_value"] = r.quadrature_value;
  j["kl_budget"] = r.kl_budget;
  j["negative"] = r.negative;
  j["agreement"] = r.agreement();
  j["checks"] = r.checks;
  j["passed"] = r.passed();
  j["details"] = r.details;
}

// Gaussian pair rho = N(mu, sigma2), rho* = N(0, 1)

/// (sigma2 / 2)((sigma2 - 1)^2 + 3 sigma2 mu2 - mu2).
inline double gaussian_hessian_H(double mu2, double sigma2) {
  if (!(sigma2 > 0.0) || mu2 < 0.0) throw std::invalid_argument("gaussian_hessian_H requires sigma2 > 0, mu2 >= 0");
  const double s = sigma2 - 1.0;
  return 0.5 * sigma2 * (s * s + 3.0 * sigma2 * mu2 - mu2);
}

/// H < 0 exactly when sigma2 < 1/3 and mu2 > (sigma2 - 1)^2 / (1 - 3 sigma2).
inline double gaussian_hessian_threshold(double sigma2) {
  if (!(sigma2 < 1.0 / 3.0)) return std::numeric_limits<double>::infinity();
  return (sigma2 - 1.0) * (sigma2 - 1.0) / (1.0 - 3.0 * sigma2);
}

/// Closed-form central moments of l = log(rho/rho*) under rho: orders 2 and 3.
inline double gaussian_log_ratio_moment(double mu2, double sigma2, int order) {
  const double s = sigma2 - 1.0;
  if (order == 2) return 0.5 * s * s + sigma2 * mu2;
  if (order == 3) return s * s * s + 3.0 * s * sigma2 * mu2;
  throw std::invalid_argument("gaussian_log_ratio_moment: order must be 2 or 3");
}

inline double gaussian_kl(double mu2, double sigma2) { return 0.5 * (sigma2 + mu2 - std::log(sigma2) - 1.0); }

namespace detail {

struct GaussianQuadrature {
  DensityPair pair;
  std::vector<double> log_ratio;  // analytic, so floored tails carry no error
};

inline GaussianQuadrature gaussian_quadrature(double mu2, double sigma2, std::optional<GridSpec> grid) {
  const double mu = std::sqrt(mu2);
  const GridSpec g = grid ? *grid : default_gaussian_grid(mu, sigma2);
  GaussianQuadrature q{gaussian_grid_pair(mu, sigma2, g.half_width, g.n), {}};
  q.log_ratio.resize(q.pair.size());
  for (std::size_t i = 0; i < q.pair.size(); ++i) {
    const double t = q.pair.nodes[i];
    q.log_ratio[i] = -0.5 * (t - mu) * (t - mu) / sigma2 + 0.5 * t * t - 0.5 * std::log(sigma2);
  }
  return q;
}

inline double central_moment(const DensityPair& pair, std::span<const double> l, int order) {
  const double mean = expectation(pair.rho, l, pair.weights);
  double s = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) s += pair.weights[i] * pair.rho[i] * std::pow(l[i] - mean, order);
  return s;
}

}  // namespace detail

/// Central moment of l by grid quadrature.
inline double gaussian_log_ratio_moment_quadrature(double mu2, double sigma2, int order,
                                                   std::optional<GridSpec> grid = std::nullopt) {
  const auto q = detail::gaussian_quadrature(mu2, sigma2, grid);
  return detail::central_moment(q.pair, q.log_ratio, order);
}

/// H by grid quadrature: E[(l - El)^2] + 1/2 E[(l - El)^3].
inline double gaussian_hessian_H_quadrature(double mu2, double sigma2, std::optional<GridSpec> grid = std::nullopt) {
  const auto q = detail::gaussian_quadrature(mu2, sigma2, grid);
  return detail::central_moment(q.pair, q.log_ratio, 2) + 0.5 * detail::central_moment(q.pair, q.log_ratio, 3);
}

inline CounterexampleResult gaussian_hessian_result(double mu2, double sigma2) {
  CounterexampleResult r;
  r.construction = "gaussian";
  r.quantity = "hessian";
  r.parameters = {{"mu2", mu2}, {"sigma2", sigma2}};
  r.closed_form_value = gaussian_hessian_H(mu2, sigma2);
  r.quadrature_value = gaussian_hessian_H_quadrature(mu2, sigma2);
  r.kl_budget = gaussian_kl(mu2, sigma2);
  r.negative = r.closed_form_value < 0.0;
  const double threshold = gaussian_hessian_threshold(sigma2);
  r.checks["sign_matches_threshold"] = r.negative == (sigma2 < 1.0 / 3.0 && mu2 > threshold);
  r.details["mu2_threshold"] = std::isfinite(threshold) ? nlohmann::json(threshold) : nlohmann::json(nullptr);
  return r;
}

// Two-value pair on two points with likelihood ratios x1 > 1 > x2

/// rho_r (1 - rho_r) x1 x2 L^2 (1 - (x1 + x2 - 2 x1 x2) / (2 (x1 - x2)) L),  L = log(x1/x2).
inline double twovalue_hessian(double x1, double x2) {
  if (!(x1 > 1.0 && 1.0 > x2 && x2 > 0.0)) throw std::invalid_argument("twovalue_hessian requires x1 > 1 > x2 > 0");
  const double rr = (x1 - 1.0) / (x1 - x2);
  const double L = std::log(x1 / x2);
  return rr * (1.0 - rr) * x1 * x2 * L * L * (1.0 - (x1 + x2 - 2.0 * x1 * x2) / (2.0 * (x1 - x2)) * L);
}

/// H by direct summation over the two-point pair.
inline double twovalue_hessian_sum(double x1, double x2) {
  const auto pair = make_two_point(x1, x2);
  const std::vector<double> l = {std::log(x1), std::log(x2)};
  return detail::central_moment(pair, l, 2) + 0.5 * detail::central_moment(pair, l, 3);
}

inline double twovalue_kl(double x1, double x2) {
  return (x1 - x1 * x2) / (x1 - x2) * std::log(x1) + (x1 * x2 - x2) / (x1 - x2) * std::log(x2);
}

/// G = x1 x2 (x1 - 1)(1 - x2) / (x1 - x2)^2 L^2.
inline double twovalue_G(double x1, double x2) {
  const double L = std::log(x1 / x2);
  return x1 * x2 * (x1 - 1.0) * (1.0 - x2) / ((x1 - x2) * (x1 - x2)) * L * L;
}

/// x1 = e^eps, x2 = e^-M.
inline CounterexampleResult twovalue_hessian_result(double eps, double M) {
  const double x1 = std::exp(eps);
  const double x2 = std::exp(-M);
  CounterexampleResult r;
  r.construction = "two_value";
  r.quantity = "hessian";
  r.parameters = {{"eps", eps}, {"M", M}, {"x1", x1}, {"x2", x2}};
  r.closed_form_value = twovalue_hessian(x1, x2);
  r.quadrature_value = twovalue_hessian_sum(x1, x2);
  r.kl_budget = twovalue_kl(x1, x2);
  r.negative = r.closed_form_value < 0.0;
  r.details["rho_r"] = (x1 - 1.0) / (x1 - x2);
  return r;
}

/// H on the mollified 1D two-value pair with delta = delta_fraction * r, evaluated
/// through the generic Hessian form with psi = log(rho/rho*). Tends to the sharp
/// closed form as delta -> 0 (the gap is first order in delta).
inline double mollified_twovalue_hessian(double x1, double x2, double delta_fraction, const GridSpec& grid) {
  const double r = two_point_radius(x1, x2);
  const auto pair = mollified_two_value(x1, x2, r, delta_fraction * r, grid);
  std::vector<double> l(pair.size());
  for (std::size_t i = 0; i < pair.size(); ++i) l[i] = std::log(pair.ratio(i));
  return hessian_quadratic_form(kl(), pair, l);
}

// Gradient-dominance ratio G / KL

struct GdcRatio {
  double ratio;
  double kl;
  double G;
  double bound;
};

/// sigma = 1/M, mu = M; ratio <= 3/M^2.
inline GdcRatio gdc_ratio_gaussian(double M) {
  if (!(M > 1.0)) throw std::invalid_argument("gdc_ratio_gaussian requires M > 1");
  const double s2 = 1.0 / (M * M);
  const double G = gaussian_log_ratio_moment(M * M, s2, 2);
  const double kl_value = gaussian_kl(M * M, s2);
  return {G / kl_value, kl_value, G, 3.0 / (M * M)};
}

/// Same ratio by grid quadrature through the generic gradient and divergence.
inline double gdc_ratio_gaussian_quadrature(double M, std::optional<GridSpec> grid = std::nullopt) {
  const double s2 = 1.0 / (M * M);
  const GridSpec g = grid ? *grid : default_gaussian_grid(M, s2);
  const auto pair = gaussian_grid_pair(M, s2, g.half_width, g.n);
  return grad_norm_sq(kl(), pair) / divergence(kl(), pair);
}

inline CounterexampleResult gdc_gaussian_result(double M) {
  const auto v = gdc_ratio_gaussian(M);
  CounterexampleResult r;
  r.construction = "gaussian";
  r.quantity = "gdc_ratio";
  r.parameters = {{"M", M}, {"mu", M}, {"sigma2", 1.0 / (M * M)}};
  r.closed_form_value = v.ratio;
  r.quadrature_value = gdc_ratio_gaussian_quadrature(M);
  r.kl_budget = v.kl;
  r.negative = false;
  r.checks["ratio_below_3_over_M2"] = v.ratio <= v.bound;
  r.details["G"] = v.G;
  r.details["bound"] = v.bound;
  return r;
}

struct TwoValueGdc {
  double ratio;
  double kl;
  double G;
  double bound;  // (M + eps')^2 / ((e^M - 1) eps' - (1 - e^-eps') M)
  bool kl_within_budget;
  bool bound_holds;
  std::optional<bool> in_regime;       // M > max{eps, eps', 2 log(1/(eps eps')), 20}
  std::optional<bool> ratio_below_eps;
};

/// x1 = e^eps', x2 = e^-M. With eps given, asserts ratio <= eps inside the regime.
inline TwoValueGdc gdc_ratio_twovalue(double eps_prime, double M, std::optional<double> eps = std::nullopt) {
  if (!(eps_prime > 0.0) || !(M > 0.0)) throw std::invalid_argument("gdc_ratio_twovalue requires eps_prime > 0, M > 0");
  const double x1 = std::exp(eps_prime);
  const double x2 = std::exp(-M);
  TwoValueGdc v{};
  v.G = twovalue_G(x1, x2);
  v.kl = twovalue_kl(x1, x2);
  v.ratio = v.G / v.kl;
  const double denom = std::expm1(M) * eps_prime + std::expm1(-eps_prime) * M;
  v.bound = denom > 0.0 ? (M + eps_prime) * (M + eps_prime) / denom : std::numeric_limits<double>::infinity();
  v.kl_within_budget = v.kl <= eps_prime;
  v.bound_holds = v.ratio <= v.bound;
  if (eps) {
    const double need = std::max({*eps, eps_prime, 2.0 * std::log(1.0 / (*eps * eps_prime)), 20.0});
    v.in_regime = M > need;
    v.ratio_below_eps = v.ratio <= *eps;
  }
  return v;
}

inline CounterexampleResult gdc_twovalue_result(double eps_prime, double M, std::optional<double> eps = std::nullopt) {
  const auto v = gdc_ratio_twovalue(eps_prime, M, eps);
  const auto pair = make_two_point(std::exp(eps_prime), std::exp(-M));
  CounterexampleResult r;
  r.construction = "two_value";
  r.quantity = "gdc_ratio";
  r.parameters = {{"eps_prime", eps_prime}, {"M", M}};
  if (eps) r.parameters["eps"] = *eps;
  r.closed_form_value = v.ratio;
  r.quadrature_value = grad_norm_sq(kl(), pair) / divergence(kl(), pair);
  r.kl_budget = v.kl;
  r.negative = false;
  r.checks["kl_within_budget"] = v.kl_within_budget;
  r.checks["bound_holds"] = v.bound_holds;
  if (v.in_regime && *v.in_regime) r.checks["ratio_below_eps"] = *v.ratio_below_eps;
  r.details["G"] = v.G;
  r.details["bound"] = v.bound;
  if (v.in_regime) r.details["in_regime"] = *v.in_regime;
  return r;
}

}  // namespace frflow
