#pragma once

/**
 * @file divergences.hpp
 * @brief f-divergence generators with analytic derivatives.
 *
 * A generator bundles f, f' and f'' for a convex f on (0, inf) with f(1) = 0.
 * D_f[rho || rho*] = sum_i w_i rho*_i f(rho_i / rho*_i).
 *
 * Registered keys: "kl", "reverse-kl", "chi2", "reverse-chi2", "power:<p>".
 * The power family is parametrised by f''(x) = x^p.
 */

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "frflow/density.hpp"

namespace frflow {

/// Thrown when a generator is evaluated outside [kDomainMin, kDomainMax].
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kDomainMin = 1e-300;
inline constexpr double kDomainMax = 1e300;

/// Half-width of the neighbourhood of x = 1 where f(x)/(1-x) switches to its
/// second-order expansion.
inline constexpr double kTaylorRadius = 1e-6;

class FGenerator {
 public:
  using Fn = std::function<double(double)>;

  FGenerator(std::string name, Fn f, Fn fp, Fn fpp, std::optional<double> power = std::nullopt)
      : name_(std::move(name)), f_(std::move(f)), fp_(std::move(fp)), fpp_(std::move(fpp)), power_(power) {}

  double f(double x) const { return f_(checked(x)); }
  double fp(double x) const { return fp_(checked(x)); }
  double fpp(double x) const { return fpp_(checked(x)); }

  const std::string& name() const { return name_; }

  /// Exponent p when f''(x) = x^p, otherwise empty.
  std::optional<double> power() const { return power_; }

  bool slope_normalized() const { return std::abs(fp_(1.0)) <= 1e-14; }

 private:
  double checked(double x) const {
    if (!(x >= kDomainMin && x <= kDomainMax)) {
      throw DomainError(name_ + ": argument " + std::to_string(x) + " outside [1e-300, 1e300]");
    }
    return x;
  }

  std::string name_;
  Fn f_;
  Fn fp_;
  Fn fpp_;
  std::optional<double> power_;
};

inline std::string format_power_key(double p) {
  std::string s = std::to_string(p);
  // trim trailing zeros of the fixed representation: "-2.000000" -> "-2"
  if (s.find('.') != std::string::npos) {
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
  }
  return "power:" + s;
}

/// Generator with f''(x) = x^p, normalised so that f(1) = 0.
inline FGenerator power_family(double p) {
  const std::string name = format_power_key(p);
  if (p == -1.0) {
    return FGenerator(
        name, [](double x) { return x * std::log(x); }, [](double x) { return std::log(x) + 1.0; },
        [](double x) { return 1.0 / x; }, p);
  }
  if (p == -2.0) {
    return FGenerator(
        name, [](double x) { return -std::log(x); }, [](double x) { return -1.0 / x; },
        [](double x) { return 1.0 / (x * x); }, p);
  }
  const double q = p + 2.0;
  const double scale = 1.0 / ((p + 2.0) * (p + 1.0));
  // expm1 keeps f relatively accurate near x = 1, which f_ratio relies on.
  return FGenerator(
      name, [q, scale](double x) { return scale * std::expm1(q * std::log(x)); },
      [p](double x) { return std::pow(x, p + 1.0) / (p + 1.0); }, [p](double x) { return std::pow(x, p); }, p);
}

inline FGenerator kl() {
  return FGenerator(
      "kl", [](double x) { return x * std::log(x); }, [](double x) { return std::log(x) + 1.0; },
      [](double x) { return 1.0 / x; }, -1.0);
}

inline FGenerator reverse_kl() {
  return FGenerator(
      "reverse-kl", [](double x) { return -std::log(x); }, [](double x) { return -1.0 / x; },
      [](double x) { return 1.0 / (x * x); }, -2.0);
}

inline FGenerator chi2() {
  return FGenerator(
      "chi2", [](double x) { return (x - 1.0) * (x - 1.0); }, [](double x) { return 2.0 * (x - 1.0); },
      [](double) { return 2.0; });
}

inline FGenerator reverse_chi2() {
  return FGenerator(
      "reverse-chi2", [](double x) { return (x - 1.0) * (x - 1.0) / x; },
      [](double x) { return 1.0 - 1.0 / (x * x); }, [](double x) { return 2.0 / (x * x * x); });
}

/// f~(x) = f(x) - f'(1)(x - 1). Same divergence on unit-mass pairs, f~'(1) = 0.
inline FGenerator normalize_slope(const FGenerator& gen) {
  const double c = gen.fp(1.0);
  if (c == 0.0) return gen;
  return FGenerator(
      gen.name() + "~", [gen, c](double x) { return gen.f(x) - c * (x - 1.0); },
      [gen, c](double x) { return gen.fp(x) - c; }, [gen](double x) { return gen.fpp(x); }, gen.power());
}

/// *-conjugate fbar(x) = x f(1/x), so that D_fbar[rho || rho*] = D_f[rho* || rho].
inline FGenerator conjugate(const FGenerator& gen) {
  std::optional<double> power;
  if (gen.power()) power = -*gen.power() - 3.0;
  return FGenerator(
      "conjugate(" + gen.name() + ")", [gen](double x) { return x * gen.f(1.0 / x); },
      [gen](double x) {
        const double y = 1.0 / x;
        return gen.f(y) - y * gen.fp(y);
      },
      [gen](double x) {
        const double y = 1.0 / x;
        return gen.fpp(y) * y * y * y;
      },
      power);
}

/// Generator by CLI key. Throws std::invalid_argument on an unknown key.
inline FGenerator make_generator(std::string_view key) {
  if (key == "kl") return kl();
  if (key == "reverse-kl") return reverse_kl();
  if (key == "chi2") return chi2();
  if (key == "reverse-chi2") return reverse_chi2();
  if (key.starts_with("power:")) {
    const std::string rest(key.substr(6));
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rest.size() || !std::isfinite(p)) {
      throw std::invalid_argument("bad power exponent in generator key '" + std::string(key) + "'");
    }
    return power_family(p);
  }
  throw std::invalid_argument("unknown generator key '" + std::string(key) + "'");
}

/// f(x) / (1 - x), continuous through x = 1 where it equals -f'(1).
inline double f_ratio(const FGenerator& gen, double x) {
  const double d = x - 1.0;
  if (std::abs(d) < kTaylorRadius) return -gen.fp(1.0) - 0.5 * gen.fpp(1.0) * d;
  return gen.f(x) / (1.0 - x);
}

inline double divergence(const FGenerator& gen, std::span<const double> rho, std::span<const double> rho_star,
                         std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    sum += weight_at(weights, i) * rho_star[i] * gen.f(rho[i] / rho_star[i]);
  }
  return sum;
}

inline double divergence(const FGenerator& gen, const DensityPair& pair) {
  return divergence(gen, pair.rho, pair.rho_star, pair.weights);
}

/// chi^2[rho* || rho] = sum w rho*^2 / rho - 1, the reverse chi-square distance.
inline double reverse_chi2_distance(const DensityPair& pair) {
  double sum = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) sum += pair.weights[i] * pair.rho_star[i] * pair.rho_star[i] / pair.rho[i];
  return sum - 1.0;
}

}  // namespace frflow
