#pragma once

/**
 * @file geometry.hpp
 * @brief Fisher-Rao metric, gradient, Hessian form and spherical Hellinger geodesics.
 *
 * Tangent vectors are represented either directly (sigma, zero weighted mean) or
 * through a potential psi with sigma = rho (psi - E_rho psi).
 */

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "frflow/density.hpp"
#include "frflow/divergences.hpp"
#include "frflow/errors.hpp"

namespace frflow {

struct TangentField {
  std::vector<double> psi;
};

struct GeodesicState {
  std::vector<double> rho;
  std::vector<double> psi;
  double t = 0.0;
};

inline constexpr double kPositivityFloorHard = 1e-300;
/// BC clamping beyond this amount is reported as a warning.
inline constexpr double kClampWarn = 1e-12;

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

inline void require_weights(std::span<const double> w, std::size_t n, const char* what) {
  if (!w.empty()) require_same_size(w.size(), n, what);
}

}  // namespace detail

/// E_rho[psi] = sum w rho psi.
inline double expectation(std::span<const double> rho, std::span<const double> psi, std::span<const double> w = {}) {
  detail::require_same_size(rho.size(), psi.size(), "expectation");
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) s += weight_at(w, i) * rho[i] * psi[i];
  return s;
}

/// sigma = rho (psi - E_rho psi).
inline std::vector<double> tangent_from_potential(std::span<const double> rho, std::span<const double> psi,
                                                  std::span<const double> w = {}) {
  const double mean = expectation(rho, psi, w);
  std::vector<double> sigma(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) sigma[i] = rho[i] * (psi[i] - mean);
  return sigma;
}

/// g_rho(sigma1, sigma2) = sum w sigma1 sigma2 / rho.
inline double metric(std::span<const double> rho, std::span<const double> sigma1, std::span<const double> sigma2,
                     std::span<const double> w = {}) {
  detail::require_same_size(rho.size(), sigma1.size(), "metric");
  detail::require_same_size(rho.size(), sigma2.size(), "metric");
  detail::require_weights(w, rho.size(), "metric");
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) s += weight_at(w, i) * sigma1[i] * sigma2[i] / rho[i];
  return s;
}

/// f'(x_i) for the current state.
inline std::vector<double> first_variation(const FGenerator& gen, std::span<const double> rho,
                                           std::span<const double> rho_star) {
  detail::require_same_size(rho.size(), rho_star.size(), "first_variation");
  std::vector<double> v(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) v[i] = gen.fp(rho[i] / rho_star[i]);
  return v;
}

inline std::vector<double> fr_gradient(const FGenerator& gen, std::span<const double> rho,
                                       std::span<const double> rho_star, std::span<const double> w = {}) {
  return tangent_from_potential(rho, first_variation(gen, rho, rho_star), w);
}

inline std::vector<double> fr_gradient(const FGenerator& gen, const DensityPair& pair) {
  return fr_gradient(gen, pair.rho, pair.rho_star, pair.weights);
}

/// sum w rho (f'(x) - E_rho f')^2.
inline double grad_norm_sq(const FGenerator& gen, std::span<const double> rho, std::span<const double> rho_star,
                           std::span<const double> w = {}) {
  const auto fp = first_variation(gen, rho, rho_star);
  const double mean = expectation(rho, fp, w);
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double d = fp[i] - mean;
    s += weight_at(w, i) * rho[i] * d * d;
  }
  return s;
}

inline double grad_norm_sq(const FGenerator& gen, const DensityPair& pair) {
  return grad_norm_sq(gen, pair.rho, pair.rho_star, pair.weights);
}

/// g(Hess D_f sigma, sigma) for sigma = rho (psi - E psi):
/// sum w [f''(x) x rho (psi - E psi)^2 + 1/2 rho (psi - E psi)^2 (f'(x) - E f')].
/// Equals d^2/dt^2 D_f along the geodesic leaving rho with initial potential psi.
inline double hessian_quadratic_form(const FGenerator& gen, const DensityPair& pair, std::span<const double> psi) {
  detail::require_same_size(pair.size(), psi.size(), "hessian_quadratic_form");
  const auto fp = first_variation(gen, pair.rho, pair.rho_star);
  const double fp_mean = expectation(pair.rho, fp, pair.weights);
  const double psi_mean = expectation(pair.rho, psi, pair.weights);
  double s = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const double x = pair.ratio(i);
    const double d = psi[i] - psi_mean;
    const double r = pair.rho[i];
    s += pair.weights[i] * (gen.fpp(x) * x * r * d * d + 0.5 * r * d * d * (fp[i] - fp_mean));
  }
  return s;
}

inline double hessian_quadratic_form(const FGenerator& gen, const DensityPair& pair, const TangentField& psi) {
  return hessian_quadratic_form(gen, pair, psi.psi);
}

/// Unclamped sum w sqrt(rho0 rho1).
inline double bhattacharyya_raw(std::span<const double> rho0, std::span<const double> rho1,
                                std::span<const double> w = {}) {
  detail::require_same_size(rho0.size(), rho1.size(), "bhattacharyya");
  detail::require_weights(w, rho0.size(), "bhattacharyya");
  double s = 0.0;
  for (std::size_t i = 0; i < rho0.size(); ++i) s += weight_at(w, i) * std::sqrt(rho0[i] * rho1[i]);
  return s;
}

/// Bhattacharyya coefficient clamped to [0, 1].
inline double bhattacharyya(std::span<const double> rho0, std::span<const double> rho1,
                            std::span<const double> w = {}) {
  return std::clamp(bhattacharyya_raw(rho0, rho1, w), 0.0, 1.0);
}

/// True when clamping moved BC by more than kClampWarn.
inline bool bhattacharyya_clamp_warning(std::span<const double> rho0, std::span<const double> rho1,
                                        std::span<const double> w = {}) {
  const double raw = bhattacharyya_raw(rho0, rho1, w);
  return std::abs(raw - std::clamp(raw, 0.0, 1.0)) > kClampWarn;
}

/// Squared spherical Hellinger distance 4 arccos^2(BC).
inline double fr_distance_sq(std::span<const double> rho0, std::span<const double> rho1,
                             std::span<const double> w = {}) {
  const double a = std::acos(bhattacharyya(rho0, rho1, w));
  return 4.0 * a * a;
}

/// 4 sum w (sqrt rho0 - sqrt rho1)^2, the chord length on the radius-2 sphere.
inline double hellinger_sq(std::span<const double> rho0, std::span<const double> rho1,
                           std::span<const double> w = {}) {
  detail::require_same_size(rho0.size(), rho1.size(), "hellinger_sq");
  detail::require_weights(w, rho0.size(), "hellinger_sq");
  double s = 0.0;
  for (std::size_t i = 0; i < rho0.size(); ++i) {
    const double d = std::sqrt(rho0[i]) - std::sqrt(rho1[i]);
    s += weight_at(w, i) * d * d;
  }
  return 4.0 * s;
}

namespace detail {

inline std::vector<double> normalized(std::vector<double> v, std::span<const double> w) {
  const double m = weighted_mass(v, w);
  for (auto& x : v) x /= m;
  return v;
}

}  // namespace detail

/// Constant-speed geodesic: great-circle interpolation of square roots, t = 0 at rho0.
inline std::vector<double> geodesic_point(std::span<const double> rho0, std::span<const double> rho1, double t,
                                          std::span<const double> w = {}) {
  detail::require_same_size(rho0.size(), rho1.size(), "geodesic_point");
  if (t == 0.0) return {rho0.begin(), rho0.end()};
  if (t == 1.0) return {rho1.begin(), rho1.end()};
  const double theta = std::acos(bhattacharyya(rho0, rho1, w));
  double a = 1.0 - t;
  double b = t;
  if (theta > 1e-8) {
    a = std::sin((1.0 - t) * theta) / std::sin(theta);
    b = std::sin(t * theta) / std::sin(theta);
  }
  std::vector<double> out(rho0.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = a * std::sqrt(rho0[i]) + b * std::sqrt(rho1[i]);
    out[i] = u * u;
  }
  return detail::normalized(std::move(out), w);
}

/// Normalised square of the straight chord between sqrt(rho0) and sqrt(rho1).
/// Same arc as geodesic_point, but not traversed at constant speed.
inline std::vector<double> geodesic_point_chord(std::span<const double> rho0, std::span<const double> rho1, double t,
                                                std::span<const double> w = {}) {
  detail::require_same_size(rho0.size(), rho1.size(), "geodesic_point_chord");
  std::vector<double> out(rho0.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double u = (1.0 - t) * std::sqrt(rho0[i]) + t * std::sqrt(rho1[i]);
    out[i] = u * u;
  }
  return detail::normalized(std::move(out), w);
}

/// Initial potential psi0 (zero rho0-mean) whose geodesic reaches rho1 at t = 1.
inline std::vector<double> geodesic_initial_potential(std::span<const double> rho0, std::span<const double> rho1,
                                                      std::span<const double> w = {}) {
  detail::require_same_size(rho0.size(), rho1.size(), "geodesic_initial_potential");
  const double c = bhattacharyya(rho0, rho1, w);
  const double theta = std::acos(c);
  const double scale = theta > 1e-12 ? theta / std::sin(theta) : 1.0;
  std::vector<double> psi(rho0.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double u0 = std::sqrt(rho0[i]);
    const double du = scale * (std::sqrt(rho1[i]) - c * u0);
    psi[i] = 2.0 * du / u0;
  }
  return psi;
}

/// Speed g(rho_dot, rho_dot) = Var_rho(psi).
inline double geodesic_speed(const GeodesicState& s, std::span<const double> w = {}) {
  const double mean = expectation(s.rho, s.psi, w);
  double v = 0.0;
  for (std::size_t i = 0; i < s.rho.size(); ++i) {
    const double d = s.psi[i] - mean;
    v += weight_at(w, i) * s.rho[i] * d * d;
  }
  return v;
}

namespace detail {

inline void geodesic_rhs(std::span<const double> rho, std::span<const double> psi, std::span<const double> w,
                         std::vector<double>& drho, std::vector<double>& dpsi) {
  const double mass = weighted_mass(rho, w);
  const double mean = expectation(rho, psi, w) / mass;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double d = psi[i] - mean;
    drho[i] = rho[i] * d;
    dpsi[i] = -0.5 * d * d;
  }
}

inline void check_floor(std::span<const double> rho, double floor, double t, const char* what) {
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!(rho[i] >= floor)) {
      throw BlowUpError(std::string(what) + ": component " + std::to_string(i) + " fell below the positivity floor at t = " +
                        std::to_string(t));
    }
  }
}

}  // namespace detail

/// RK4 integration of d rho = rho (psi - E psi), d psi = -1/2 (psi - E psi)^2,
/// renormalising rho each step. Returns every state including t = 0.
inline std::vector<GeodesicState> integrate_geodesic(std::span<const double> rho0, std::span<const double> psi0,
                                                     double T, double dt, std::span<const double> w = {}) {
  if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("integrate_geodesic requires T > 0 and dt > 0");
  detail::require_same_size(rho0.size(), psi0.size(), "integrate_geodesic");
  detail::require_weights(w, rho0.size(), "integrate_geodesic");
  const std::size_t n = rho0.size();
  const auto steps = static_cast<std::size_t>(std::llround(std::ceil(T / dt - 1e-9)));
  const double h = T / static_cast<double>(steps);

  std::vector<GeodesicState> out;
  out.reserve(steps + 1);
  out.push_back({{rho0.begin(), rho0.end()}, {psi0.begin(), psi0.end()}, 0.0});

  std::vector<double> r(rho0.begin(), rho0.end()), p(psi0.begin(), psi0.end());
  std::vector<double> k1r(n), k1p(n), k2r(n), k2p(n), k3r(n), k3p(n), k4r(n), k4p(n), tr(n), tp(n);
  for (std::size_t s = 1; s <= steps; ++s) {
    detail::geodesic_rhs(r, p, w, k1r, k1p);
    for (std::size_t i = 0; i < n; ++i) tr[i] = r[i] + 0.5 * h * k1r[i], tp[i] = p[i] + 0.5 * h * k1p[i];
    detail::geodesic_rhs(tr, tp, w, k2r, k2p);
    for (std::size_t i = 0; i < n; ++i) tr[i] = r[i] + 0.5 * h * k2r[i], tp[i] = p[i] + 0.5 * h * k2p[i];
    detail::geodesic_rhs(tr, tp, w, k3r, k3p);
    for (std::size_t i = 0; i < n; ++i) tr[i] = r[i] + h * k3r[i], tp[i] = p[i] + h * k3p[i];
    detail::geodesic_rhs(tr, tp, w, k4r, k4p);
    for (std::size_t i = 0; i < n; ++i) {
      r[i] += h / 6.0 * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
      p[i] += h / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
    }
    const double t = h * static_cast<double>(s);
    detail::check_floor(r, kPositivityFloorHard, t, "integrate_geodesic");
    r = detail::normalized(std::move(r), w);
    out.push_back({r, p, t});
  }
  return out;
}

inline std::vector<GeodesicState> integrate_geodesic(std::span<const double> rho0, const TangentField& psi0, double T,
                                                     double dt, std::span<const double> w = {}) {
  return integrate_geodesic(rho0, psi0.psi, T, dt, w);
}

/// CSV with columns t, rho_0..rho_{K-1}, speed.
inline void write_geodesic_csv(std::ostream& os, const std::vector<GeodesicState>& states,
                               std::span<const double> w = {}) {
  if (states.empty()) return;
  os << "t";
  for (std::size_t i = 0; i < states.front().rho.size(); ++i) os << ",rho_" << i;
  os << ",speed\n";
  os << std::setprecision(17);
  for (const auto& s : states) {
    os << s.t;
    for (double v : s.rho) os << ',' << v;
    os << ',' << geodesic_speed(s, w) << '\n';
  }
}

}  // namespace frflow
