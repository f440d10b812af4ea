#pragma once

/**
 * @file density.hpp
 * @brief Density pairs (rho, rho*) on a finite simplex or a 1D quadrature grid.
 *
 * Every quantity in the library is a weighted sum over support points,
 * sum_i w_i g(rho_i, rho*_i), with w = 1 on the simplex and trapezoid weights
 * on a grid. Constructors here always return validated pairs.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace frflow {

enum class Support { simplex, grid1d };

struct DensityPair {
  Support kind = Support::simplex;
  std::vector<double> nodes;  // grid coordinates, empty on the simplex
  std::vector<double> weights;
  std::vector<double> rho;
  std::vector<double> rho_star;

  std::size_t size() const { return rho.size(); }

  /// Likelihood ratio x_i = rho_i / rho*_i.
  double ratio(std::size_t i) const { return rho[i] / rho_star[i]; }

  std::vector<double> ratios() const {
    std::vector<double> x(size());
    for (std::size_t i = 0; i < size(); ++i) x[i] = ratio(i);
    return x;
  }
};

/// Quadrature weight i; an empty span stands for unit (simplex) weights.
inline double weight_at(std::span<const double> w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

inline double weighted_mass(std::span<const double> values, std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) sum += weight_at(weights, i) * values[i];
  return sum;
}

inline constexpr double kMassTolerance = 1e-10;
/// Constructors resample or reject densities with a component below this.
inline constexpr double kPositivityFloor = 1e-12;

/// Checks the pair invariants; throws std::invalid_argument with the first failure.
inline void validate(const DensityPair& pair) {
  const std::size_t k = pair.rho.size();
  if (k < 1) throw std::invalid_argument("density pair is empty");
  if (pair.rho_star.size() != k || pair.weights.size() != k) {
    throw std::invalid_argument("density pair: rho, rho_star and weights sizes differ");
  }
  if (pair.kind == Support::grid1d && pair.nodes.size() != k) {
    throw std::invalid_argument("density pair: grid nodes size differs from rho");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!(pair.weights[i] > 0.0) || !std::isfinite(pair.weights[i])) {
      throw std::invalid_argument("density pair: non-positive quadrature weight at " + std::to_string(i));
    }
    if (!(pair.rho[i] > 0.0) || !std::isfinite(pair.rho[i]) || !(pair.rho_star[i] > 0.0) ||
        !std::isfinite(pair.rho_star[i])) {
      throw std::invalid_argument("density pair: non-positive or non-finite density at " + std::to_string(i));
    }
    const double x = pair.rho[i] / pair.rho_star[i];
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("density pair: likelihood ratio not finite at " + std::to_string(i));
    }
  }
  const double m = weighted_mass(pair.rho, pair.weights);
  const double ms = weighted_mass(pair.rho_star, pair.weights);
  if (std::abs(m - 1.0) > kMassTolerance || std::abs(ms - 1.0) > kMassTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "density pair: mass not unit (rho " << m << ", rho_star " << ms << ")";
    throw std::invalid_argument(msg.str());
  }
}

inline DensityPair make_simplex_pair(std::vector<double> rho, std::vector<double> rho_star) {
  DensityPair pair;
  pair.kind = Support::simplex;
  pair.weights.assign(rho.size(), 1.0);
  pair.rho = std::move(rho);
  pair.rho_star = std::move(rho_star);
  validate(pair);
  return pair;
}

/// Two-point pair with likelihood ratios (x1, x2): rho*_1 = 1 - r, rho*_2 = r,
/// r = (x1 - 1) / (x1 - x2), rho_i = x_i rho*_i.
inline DensityPair make_two_point(double x1, double x2) {
  if (!(x1 > 1.0 && 1.0 > x2 && x2 > 0.0) || !std::isfinite(x1)) {
    throw std::invalid_argument("make_two_point requires x1 > 1 > x2 > 0");
  }
  const double r = (x1 - 1.0) / (x1 - x2);
  const double s = (1.0 - x2) / (x1 - x2);  // 1 - r without cancellation
  DensityPair pair;
  pair.kind = Support::simplex;
  pair.weights = {1.0, 1.0};
  pair.rho_star = {s, r};
  pair.rho = {x1 * s, x2 * r};
  validate(pair);
  return pair;
}

namespace detail {

inline std::vector<double> dirichlet(std::mt19937_64& rng, std::size_t k, double concentration) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  std::vector<double> v(k);
  for (;;) {
    double total = 0.0;
    for (auto& value : v) {
      value = gamma(rng);
      total += value;
    }
    if (!(total > 0.0) || !std::isfinite(total)) continue;
    bool ok = true;
    for (auto& value : v) {
      value /= total;
      if (value < kPositivityFloor) ok = false;
    }
    if (ok) return v;
  }
}

}  // namespace detail

/// Independent Dirichlet(concentration) draws for rho and rho*, consuming `rng`.
inline DensityPair sample_random_pair(std::size_t k, std::mt19937_64& rng, double concentration) {
  if (k < 2) throw std::invalid_argument("sample_random_pair requires K >= 2");
  if (!(concentration > 0.0)) throw std::invalid_argument("sample_random_pair requires concentration > 0");
  auto rho = detail::dirichlet(rng, k, concentration);
  auto rho_star = detail::dirichlet(rng, k, concentration);
  // renormalise in the summation order validate() uses
  const double m = weighted_mass(rho, {});
  const double ms = weighted_mass(rho_star, {});
  for (auto& v : rho) v /= m;
  for (auto& v : rho_star) v /= ms;
  return make_simplex_pair(std::move(rho), std::move(rho_star));
}

inline DensityPair sample_random_pair(std::size_t k, std::uint64_t seed, double concentration) {
  std::mt19937_64 rng(seed);
  return sample_random_pair(k, rng, concentration);
}

struct GridSpec {
  double half_width = 10.0;
  std::size_t n = 8192;
};

/// Densities on a grid are floored here before renormalisation; see gaussian_grid_pair.
inline constexpr double kGridDensityFloor = 1e-300;

namespace detail {

inline void uniform_trapezoid(const GridSpec& grid, std::vector<double>& nodes, std::vector<double>& weights) {
  const double h = 2.0 * grid.half_width / static_cast<double>(grid.n - 1);
  nodes.resize(grid.n);
  weights.assign(grid.n, h);
  for (std::size_t i = 0; i < grid.n; ++i) nodes[i] = -grid.half_width + h * static_cast<double>(i);
  weights.front() = weights.back() = 0.5 * h;
}

inline double gaussian_tail_mass(double mu, double sigma, double half_width) {
  const double s = sigma * std::numbers::sqrt2;
  return 0.5 * std::erfc((half_width - mu) / s) + 0.5 * std::erfc((half_width + mu) / s);
}

inline std::vector<double> gaussian_on_grid(std::span<const double> nodes, std::span<const double> weights,
                                            double mu, double sigma2) {
  std::vector<double> v(nodes.size());
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = nodes[i] - mu;
    v[i] = std::max(std::exp(log_norm - 0.5 * d * d / sigma2), kGridDensityFloor);
  }
  const double m = weighted_mass(v, weights);
  for (auto& value : v) value /= m;
  return v;
}

}  // namespace detail

/// rho = N(mu, sigma2), rho* = N(0, 1) on a uniform trapezoid grid over
/// [-half_width, half_width], each renormalised to unit discrete mass.
inline DensityPair gaussian_grid_pair(double mu, double sigma2, double half_width, std::size_t n) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gaussian_grid_pair requires sigma2 > 0");
  if (n < 64) throw std::invalid_argument("gaussian_grid_pair requires n >= 64");
  if (!(half_width > 0.0)) throw std::invalid_argument("gaussian_grid_pair requires half_width > 0");
  const double tail = std::max(detail::gaussian_tail_mass(mu, std::sqrt(sigma2), half_width),
                               detail::gaussian_tail_mass(0.0, 1.0, half_width));
  if (tail > 1e-10) {
    throw std::invalid_argument("gaussian_grid_pair: truncated tail mass " + std::to_string(tail) +
                                " exceeds 1e-10; widen half_width");
  }
  DensityPair pair;
  pair.kind = Support::grid1d;
  detail::uniform_trapezoid({half_width, n}, pair.nodes, pair.weights);
  pair.rho = detail::gaussian_on_grid(pair.nodes, pair.weights, mu, sigma2);
  pair.rho_star = detail::gaussian_on_grid(pair.nodes, pair.weights, 0.0, 1.0);
  validate(pair);
  return pair;
}

/// Default grid for a Gaussian pair: half_width = max(10, |mu| + 8 sigma), n = 8192.
inline GridSpec default_gaussian_grid(double mu, double sigma2) {
  return {std::max(10.0, std::abs(mu) + 8.0 * std::sqrt(sigma2)), 8192};
}

/// Radius r with standard-normal mass of [-r, r] equal to (x1 - 1) / (x1 - x2).
inline double two_point_radius(double x1, double x2) {
  if (!(x1 > 1.0 && 1.0 > x2 && x2 > 0.0)) throw std::invalid_argument("two_point_radius requires x1 > 1 > x2 > 0");
  const double target = (x1 - 1.0) / (x1 - x2);
  double lo = 0.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::erf(mid / std::numbers::sqrt2) < target) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Smoothed two-level profile on a 1D grid with rho* = N(0, 1):
/// rho = rho* (phi_delta * (x1 1{|t| >= r+delta} + x2 1{|t| < r-delta} + x3 1{band})),
/// where phi_delta is the normalised bump exp(-1/(1-(t/delta)^2)) and x3 is chosen
/// for unit mass. The ratio rho/rho* stays in [x2, x1].
inline DensityPair mollified_two_value(double x1, double x2, double r, double delta, const GridSpec& grid) {
  if (!(x1 > 1.0 && 1.0 > x2 && x2 > 0.0)) throw std::invalid_argument("mollified_two_value requires x1 > 1 > x2 > 0");
  if (!(delta > 0.0 && delta < r)) throw std::invalid_argument("mollified_two_value requires 0 < delta < r");
  if (grid.n < 64 || !(grid.half_width > r + 2.0 * delta)) {
    throw std::invalid_argument("mollified_two_value: grid must cover [-(r + 2 delta), r + 2 delta]");
  }
  DensityPair pair;
  pair.kind = Support::grid1d;
  detail::uniform_trapezoid(grid, pair.nodes, pair.weights);
  if (detail::gaussian_tail_mass(0.0, 1.0, grid.half_width) > 1e-10) {
    throw std::invalid_argument("mollified_two_value: grid half_width too small for N(0,1)");
  }
  pair.rho_star = detail::gaussian_on_grid(pair.nodes, pair.weights, 0.0, 1.0);

  const double h = pair.nodes[1] - pair.nodes[0];
  const auto half = static_cast<std::ptrdiff_t>(std::floor(delta / h));
  if (half < 2) throw std::invalid_argument("mollified_two_value: grid too coarse for delta");
  std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
  double ksum = 0.0;
  for (std::ptrdiff_t j = -half; j <= half; ++j) {
    const double u = static_cast<double>(j) * h / delta;
    const double v = std::abs(u) < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
    kernel[static_cast<std::size_t>(j + half)] = v;
    ksum += v;
  }
  for (auto& v : kernel) v /= ksum;

  const auto n = static_cast<std::ptrdiff_t>(grid.n);
  enum Level { outer, inner, band };
  auto level_at = [&](std::ptrdiff_t i) {
    if (i < 0 || i >= n) return outer;
    const double a = std::abs(pair.nodes[static_cast<std::size_t>(i)]);
    if (a >= r + delta) return outer;
    if (a < r - delta) return inner;
    return band;
  };
  std::vector<double> c_out(grid.n, 0.0), c_in(grid.n, 0.0), c_band(grid.n, 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = -half; j <= half; ++j) {
      const double kv = kernel[static_cast<std::size_t>(j + half)];
      switch (level_at(i - j)) {
        case outer: c_out[static_cast<std::size_t>(i)] += kv; break;
        case inner: c_in[static_cast<std::size_t>(i)] += kv; break;
        case band: c_band[static_cast<std::size_t>(i)] += kv; break;
      }
    }
  }
  double fixed = 0.0;
  double band_mass = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double ws = pair.weights[i] * pair.rho_star[i];
    fixed += ws * (x1 * c_out[i] + x2 * c_in[i]);
    band_mass += ws * c_band[i];
  }
  if (!(band_mass > 0.0)) throw std::invalid_argument("mollified_two_value: empty transition band on grid");
  const double x3 = (1.0 - fixed) / band_mass;
  if (!(x3 >= x2 && x3 <= x1)) {
    throw std::invalid_argument("mollified_two_value: middle level x3 = " + std::to_string(x3) +
                                " outside [x2, x1]; choose r closer to two_point_radius(x1, x2)");
  }
  pair.rho.resize(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double profile = std::clamp(x1 * c_out[i] + x2 * c_in[i] + x3 * c_band[i], x2, x1);
    pair.rho[i] = pair.rho_star[i] * profile;
  }
  validate(pair);
  return pair;
}

// JSON: {kind, nodes?, weights, rho, rho_star}

inline void to_json(nlohmann::json& j, const DensityPair& pair) {
  j = nlohmann::json::object();
  j["kind"] = pair.kind == Support::simplex ? "simplex" : "grid1d";
  if (pair.kind == Support::grid1d) j["nodes"] = pair.nodes;
  j["weights"] = pair.weights;
  j["rho"] = pair.rho;
  j["rho_star"] = pair.rho_star;
}

inline void from_json(const nlohmann::json& j, DensityPair& pair) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "simplex") {
    pair.kind = Support::simplex;
  } else if (kind == "grid1d") {
    pair.kind = Support::grid1d;
  } else {
    throw std::invalid_argument("density pair JSON: unknown kind '" + kind + "'");
  }
  pair.nodes = j.contains("nodes") ? j.at("nodes").get<std::vector<double>>() : std::vector<double>{};
  pair.rho = j.at("rho").get<std::vector<double>>();
  pair.rho_star = j.at("rho_star").get<std::vector<double>>();
  if (j.contains("weights")) {
    pair.weights = j.at("weights").get<std::vector<double>>();
  } else if (pair.kind == Support::simplex) {
    pair.weights.assign(pair.rho.size(), 1.0);
  } else {
    throw std::invalid_argument("density pair JSON: grid1d pair needs weights");
  }
  validate(pair);
}

/// Reads a real token: a plain number, "e", or "e^<exponent>".
inline double parse_real_token(std::string_view token) {
  auto as_double = [](std::string_view s) {
    const std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(str, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != str.size()) throw std::invalid_argument("cannot parse number '" + str + "'");
    return v;
  };
  if (token == "e") return std::numbers::e;
  if (token.starts_with("e^")) return std::exp(as_double(token.substr(2)));
  return as_double(token);
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::map<std::string, double, std::less<>> key_values(std::string_view s) {
  std::map<std::string, double, std::less<>> kv;
  if (s.empty()) return kv;
  for (auto item : split(s, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("expected key=value, got '" + std::string(item) + "'");
    kv[std::string(item.substr(0, eq))] = parse_real_token(item.substr(eq + 1));
  }
  return kv;
}

inline std::vector<double> number_list(std::string_view s) {
  std::vector<double> v;
  for (auto item : split(s, ',')) v.push_back(parse_real_token(item));
  return v;
}

}  // namespace detail

/// Builds a pair from a constructor spec or a JSON file path:
///   two-point:<x1>:<x2>            e.g. two-point:e:1e-2
///   gaussian:mu=..,s2=..[,hw=..,n=..]
///   random:K=..[,conc=..]          seeded by `seed`
///   simplex:<rho list>/<rho_star list>
///   mollified:x1=..,x2=..[,delta=..,hw=..,n=..]
///   anything else is read as a JSON file
inline DensityPair parse_pair_spec(std::string_view spec, std::uint64_t seed) {
  if (spec.starts_with("two-point:")) {
    const auto parts = detail::split(spec.substr(10), ':');
    if (parts.size() != 2) throw std::invalid_argument("two-point spec needs two values: two-point:<x1>:<x2>");
    return make_two_point(parse_real_token(parts[0]), parse_real_token(parts[1]));
  }
  if (spec.starts_with("gaussian:")) {
    auto kv = detail::key_values(spec.substr(9));
    const double mu = kv.contains("mu") ? kv["mu"] : 0.0;
    const double s2 = kv.contains("s2") ? kv["s2"] : 1.0;
    GridSpec grid = default_gaussian_grid(mu, s2);
    if (kv.contains("hw")) grid.half_width = kv["hw"];
    if (kv.contains("n")) grid.n = static_cast<std::size_t>(kv["n"]);
    return gaussian_grid_pair(mu, s2, grid.half_width, grid.n);
  }
  if (spec.starts_with("random:")) {
    auto kv = detail::key_values(spec.substr(7));
    if (!kv.contains("K")) throw std::invalid_argument("random spec needs K=<size>");
    const double conc = kv.contains("conc") ? kv["conc"] : 1.0;
    return sample_random_pair(static_cast<std::size_t>(kv["K"]), seed, conc);
  }
  if (spec.starts_with("simplex:")) {
    const auto parts = detail::split(spec.substr(8), '/');
    if (parts.size() != 2) throw std::invalid_argument("simplex spec needs simplex:<rho>/<rho_star>");
    return make_simplex_pair(detail::number_list(parts[0]), detail::number_list(parts[1]));
  }
  if (spec.starts_with("mollified:")) {
    auto kv = detail::key_values(spec.substr(10));
    if (!kv.contains("x1") || !kv.contains("x2")) throw std::invalid_argument("mollified spec needs x1 and x2");
    const double x1 = kv["x1"];
    const double x2 = kv["x2"];
    const double r = two_point_radius(x1, x2);
    const double delta = kv.contains("delta") ? kv["delta"] : r / 100.0;
    GridSpec grid{kv.contains("hw") ? kv["hw"] : 10.0, kv.contains("n") ? static_cast<std::size_t>(kv["n"]) : 40001};
    return mollified_two_value(x1, x2, r, delta, grid);
  }
  std::ifstream in{std::string(spec)};
  if (!in) throw std::invalid_argument("pair spec '" + std::string(spec) + "' is neither a constructor nor a readable file");
  return nlohmann::json::parse(in).get<DensityPair>();
}

}  // namespace frflow
