// Acceptance run: one [PASS]/[FAIL] line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "frflow/counterexamples.hpp"
#include "frflow/flow.hpp"
#include "frflow/inequalities.hpp"
#include "oracles.hpp"

using namespace frflow;

namespace {

constexpr std::size_t kK = 64;

struct Outcome {
  bool ok;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// 1: KL flow against the explicit solution
Outcome explicit_solution() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto pair = sample_random_pair(kK, 1ULL, 1.0);
  FlowOptions opt;
  opt.T = 3.0;
  opt.dt = 1e-3;
  opt.observe = {"D_f"};
  const auto tr = integrate_flow(kl(), pair, opt);
  double gap = 0.0;
  for (std::size_t s : {500u, 1000u, 2000u, 3000u}) {
    gap = std::max(gap, oracle::sup_gap(tr.states[s], kl_explicit_solution(pair.rho, pair.rho_star, tr.times[s])));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {gap <= 1e-6 && secs < 5.0, "max sup-norm gap " + fmt(gap) + " (tol 1e-6), runtime " + fmt(secs) + " s (< 5)"};
}

// 2: decay exponent of KL + reverse KL
Outcome decay_rate() {
  double worst = 1e300;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pair = sample_random_pair(kK, seed, 1.0);
    FlowOptions opt;
    opt.T = 5.0;
    opt.observe = {"D_f+D_fbar"};
    opt.store_states = false;
    const auto tr = integrate_flow(kl(), pair, opt);
    worst = std::min(worst, measure_decay_rate(tr, "D_f+D_fbar", 1.0, 5.0));
  }
  return {worst >= 0.99, "min fitted exponent over 10 pairs " + fmt(worst) + " (>= 0.99)"};
}

// 3: dissipation identity
Outcome dissipation() {
  double worst = 0.0;
  for (const auto& gen : {kl(), chi2(), reverse_kl()}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto pair = sample_random_pair(kK, seed, 50.0);
      FlowOptions opt;
      opt.T = 2.0;
      opt.observe = {"D_f", "grad_norm_sq"};
      opt.store_states = false;
      worst = std::max(worst, dissipation_residual(integrate_flow(gen, pair, opt)));
    }
  }
  return {worst <= 1e-5, "max |dD/dt + |grad|^2| / max(1, |grad|^2) = " + fmt(worst) + " (tol 1e-5)"};
}

// 4: every D_fbar is a Lyapunov function of every D_f flow
Outcome lyapunov() {
  const std::vector<std::string> keys = {"kl", "reverse-kl", "chi2", "reverse-chi2"};
  double worst = -1e300;
  std::string where;
  for (const auto& f : keys) {
    FlowOptions opt;
    opt.T = 2.0;
    opt.store_states = false;
    opt.observe.clear();
    for (const auto& g : keys) opt.observe.push_back("D:" + g);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto tr = integrate_flow(make_generator(f), sample_random_pair(kK, seed, 50.0), opt);
      for (const auto& g : keys) {
        const double inc = max_increase(tr.observables.at("D:" + g));
        if (inc > worst) {
          worst = inc;
          where = "D_" + g + " along the " + f + " flow";
        }
      }
    }
  }
  return {worst <= 1e-10, "largest step increase " + fmt(worst) + " (" + where + "; slack 1e-10)"};
}

// 5: Gaussian Hessian counterexample
Outcome gaussian_hessian() {
  double worst = 0.0;
  for (double m2 : {0.0, 0.5, 1.0, 3.0, 6.0}) {
    for (double s2 : {0.1, 0.25, 0.5, 1.0, 2.0}) {
      const double cf = gaussian_hessian_H(m2, s2);
      const double q = gaussian_hessian_H_quadrature(m2, s2);
      worst = std::max(worst, std::abs(q - cf) / std::max(1.0, std::abs(cf)));
    }
  }
  const double h = gaussian_hessian_H(3.0, 0.25);
  const double hq = gaussian_hessian_H_quadrature(3.0, 0.25);
  int mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    const double s2 = 0.02 + 0.98 * i / 49.0;
    for (int j = 0; j < 50; ++j) {
      const double m2 = 6.0 * j / 49.0;
      const double H = gaussian_hessian_H(m2, s2);
      const bool predicted = s2 < 1.0 / 3.0 && m2 > gaussian_hessian_threshold(s2);
      if (std::abs(H) > 1e-12 && (H < 0.0) != predicted) ++mismatches;
    }
  }
  const bool ok = worst <= 1e-6 && std::abs(h + 0.0234375) <= 1e-9 && std::abs(hq + 0.0234375) <= 1e-9 && mismatches == 0;
  return {ok, "max rel err " + fmt(worst) + " over 25 points (tol 1e-6); H(3, 0.25) = " + fmt(h) + ", quadrature " +
                  fmt(hq) + " (target -0.0234375 +- 1e-9); sign mismatches on 50x50 grid: " + std::to_string(mismatches)};
}

// 6: two-value counterexample
Outcome two_value_hessian() {
  const double x1 = std::numbers::e, x2 = std::exp(-5.0);
  const double H = twovalue_hessian(x1, x2);
  const double kl_value = twovalue_kl(x1, x2);
  bool all_negative = true;
  for (double eps : {0.1, 1.0}) {
    for (double M : {5.0, 8.0, 12.0}) all_negative = all_negative && twovalue_hessian(std::exp(eps), std::exp(-M)) < 0.0;
  }
  const bool value_ok = std::abs(H + 0.302184) <= 1e-6;
  return {value_ok && kl_value <= 1.0 && all_negative,
          "H(e, e^-5) = " + fmt(H) + " (target -0.302184 +- 1e-6, |diff| " + fmt(std::abs(H + 0.302184)) +
              "); KL = " + fmt(kl_value) + " (<= 1); H < 0 on {0.1,1}x{5,8,12}: " + (all_negative ? "yes" : "no")};
}

// 7: gradient dominance fails for KL
Outcome gdc_failure() {
  bool decreasing = true;
  double prev = 1e300;
  double at20 = 0.0;
  for (double M = 1.0; M <= 20.0; M += 1.0) {
    const double r = two_point_ratio(kl(), std::exp(-M), std::numbers::e);
    decreasing = decreasing && r < prev;
    prev = r;
    at20 = r;
  }
  const auto g = gdc_ratio_gaussian(10.0);
  const double q = gdc_ratio_gaussian_quadrature(10.0);
  const bool ok = decreasing && at20 <= 1e-6 && std::abs(g.ratio - 0.028761) <= 1e-5 && g.ratio <= 0.03 &&
                  std::abs(q - 0.028761) <= 1e-5;
  return {ok, std::string("two-point ratio decreasing in M: ") + (decreasing ? "yes" : "no") + ", value at M=20 " +
                  fmt(at20) + " (<= 1e-6); Gaussian M=10 ratio " + fmt(g.ratio) + ", quadrature " + fmt(q) +
                  " (0.028761 +- 1e-5, <= 0.03)"};
}

// 8: gradient dominance holds for p = -2
Outcome gdc_success() {
  const auto gen = power_family(-2.0);
  const auto xs = make_log_grid(1e-4, 1.0, 400, true, false);
  const auto ys = make_log_grid(1.0, 1e4, 400, false, true);
  const auto scan = scan_two_point(gen, xs, ys, 0.1);
  std::mt19937_64 rng(2024);
  const double three = optimize_three_point(gen, 10000, rng).min_ratio;
  const auto kp = kpoint_check(gen, 6, 100000, 0.9 * three, 1);
  const auto probe = support_reduction_probe(gen, 6, 10000, 1);
  const bool ok = scan.min_ratio >= 0.1 && kp.passed && probe.passed;
  return {ok, "scan infimum " + fmt(scan.min_ratio) + " (>= 0.1); kpoint K=6 1e5 samples at alpha " + fmt(0.9 * three) +
                  ": " + std::to_string(kp.violation_count) + " violations, min " + fmt(kp.min_ratio) +
                  "; support-reduction gap " + probe.details["gap"].dump() + (probe.passed ? " (holds)" : " (fails)")};
}

// 9: dual gradient dominance with the conjugate partner
Outcome dual_conjugate() {
  double eq_gap = 0.0;
  const auto small = random_pairs(100, 2, 8, 1, 1.0);
  for (double p : {-1.0, -2.0}) {
    for (const auto& pr : small) {
      const auto t = dual_conjugate_terms(p, pr);
      eq_gap = std::max(eq_gap, std::abs(t.lhs - (t.d_f + t.d_fbar)));
    }
  }
  const auto big = random_pairs(1000, 2, 8, 2, 1.0);
  std::size_t violations = 0;
  for (double p : {-3.0, -1.5, 0.0, 1.0}) violations += dual_conjugate_check(p, big).violation_count;
  return {eq_gap <= 1e-10 && violations == 0, "p in {-1,-2}: max |LHS - (D_fbar + D_f)| = " + fmt(eq_gap) +
                                                  " (tol 1e-10); p in {-3,-1.5,0,1}: " + std::to_string(violations) +
                                                  " violations on 1e3 pairs"};
}

// 10: dual gradient dominance with the reverse chi-square partner
Outcome dual_chi2() {
  const auto pairs = random_pairs(1000, 2, 8, 3, 1.0);
  std::size_t violations = 0;
  double form_gap = 0.0;
  std::size_t lemma_violations = 0;
  for (const auto& gen : {kl(), reverse_kl(), chi2()}) {
    const auto rep = dual_chi2_check(gen, pairs);
    violations += rep.violation_count;
    form_gap = std::max(form_gap, rep.details["max_lhs_form_gap"].get<double>());
    lemma_violations += dual_chi2_pointwise_check(normalize_slope(gen), 100000, 4).violation_count;
  }
  return {violations == 0 && form_gap <= 1e-10 && lemma_violations == 0,
          std::to_string(violations) + " violations of LHS >= D_f and LHS >= 2 alpha_f chi2 on 1e3 pairs; LHS form gap " +
              fmt(form_gap) + " (tol 1e-10); pointwise lemma violations on 1e5 (x, mu): " +
              std::to_string(lemma_violations)};
}

// 11: geometry
Outcome geometry() {
  const std::vector<double> a = {0.5, 0.5}, b = {0.75, 0.25};
  const double d = fr_distance_sq(a, b);
  const double target = std::numbers::pi * std::numbers::pi / 36.0;
  double endpoint = 0.0, speed = 0.0;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto p = sample_random_pair(8, rng, 1.0);
    const auto states = integrate_geodesic(p.rho, geodesic_initial_potential(p.rho, p.rho_star), 1.0, 1e-3);
    endpoint = std::max(endpoint, oracle::sup_gap(states.back().rho, p.rho_star));
    double lo = 1e300, hi = 0.0;
    for (const auto& s : states) {
      lo = std::min(lo, geodesic_speed(s));
      hi = std::max(hi, geodesic_speed(s));
    }
    speed = std::max(speed, (hi - lo) / hi);
  }
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = sample_random_pair(2 + i % 9, rng, 1.0);
    if (hellinger_sq(p.rho, p.rho_star) > fr_distance_sq(p.rho, p.rho_star)) ++bad;
  }
  const bool ok = std::abs(d - target) <= 1e-9 && endpoint <= 1e-6 && speed <= 1e-6 && bad == 0;
  return {ok, "D^2 = " + fmt(d) + " (pi^2/36 +- 1e-9); ODE endpoint gap " + fmt(endpoint) + " (<= 1e-6); speed variation " +
                  fmt(speed) + " (<= 1e-6); chord > arc on " + std::to_string(bad) + " of 1e3 pairs"};
}

// 12: Hessian form and strong convexity
Outcome hessian_form() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::vector<FGenerator> gens = {kl(), reverse_kl(), chi2(), reverse_chi2(), power_family(-2.0)};
  double eq_gap = 0.0;
  for (const auto& gen : gens) {
    for (int i = 0; i < 10; ++i) {
      const auto base = sample_random_pair(6, rng, 1.0);
      const auto eq = make_simplex_pair(base.rho, base.rho);
      std::vector<double> psi(6);
      for (auto& v : psi) v = normal(rng);
      const auto s = tangent_from_potential(eq.rho, psi);
      eq_gap = std::max(eq_gap, std::abs(hessian_quadratic_form(gen, eq, psi) - gen.fpp(1.0) * metric(eq.rho, s, s)));
    }
  }
  double fd_gap = 0.0;
  const double h = 1e-2;
  for (int i = 0; i < 20; ++i) {
    const auto& gen = gens[i % gens.size()];
    const auto pair = sample_random_pair(4, rng, 5.0);
    std::vector<double> psi(4), neg(4);
    for (std::size_t k = 0; k < 4; ++k) {
      psi[k] = 0.5 * normal(rng);
      neg[k] = -psi[k];
    }
    const double dp = divergence(gen, integrate_geodesic(pair.rho, psi, h, h / 20.0).back().rho, pair.rho_star, {});
    const double dm = divergence(gen, integrate_geodesic(pair.rho, neg, h, h / 20.0).back().rho, pair.rho_star, {});
    const double fd = (dp - 2.0 * divergence(gen, pair) + dm) / (h * h);
    const double form = hessian_quadratic_form(gen, pair, psi);
    fd_gap = std::max(fd_gap, std::abs(fd - form) / std::max(1.0, std::abs(form)));
  }
  const auto good = strong_convexity_check(power_family(-2.0), 2000, 1);
  const auto bad = strong_convexity_check(kl(), 2000, 1);
  const double h_kl = bad.details["h_at_e_minus_3"].get<double>();
  const bool ok = eq_gap <= 1e-10 && fd_gap <= 1e-4 && good.passed && !bad.passed && !bad.violations.empty() &&
                  std::abs(h_kl + 1.0) <= 1e-12;
  return {ok, "at rho = rho*: max gap " + fmt(eq_gap) + " (tol 1e-10); finite-difference rel gap " + fmt(fd_gap) +
                  " over 20 cases (tol 1e-4); p=-2 strong convexity " + (good.passed ? "passes" : "fails") +
                  " with alpha_f " + fmt(good.details["alpha_f"].get<double>()) + "; KL " +
                  (bad.passed ? "passes" : "fails") + " with h(e^-3) = " + fmt(h_kl)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"KL flow matches explicit solution", explicit_solution},
      {"KL + reverse KL decay exponent", decay_rate},
      {"dissipation identity", dissipation},
      {"Lyapunov monotonicity of D_fbar", lyapunov},
      {"Gaussian Hessian counterexample", gaussian_hessian},
      {"two-value Hessian counterexample", two_value_hessian},
      {"gradient dominance fails for KL", gdc_failure},
      {"gradient dominance holds for p=-2", gdc_success},
      {"dual conjugate inequality", dual_conjugate},
      {"dual reverse chi-square inequality", dual_chi2},
      {"Fisher-Rao geometry", geometry},
      {"Hessian form and strong convexity", hessian_form},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.ok) ++failed;
    std::printf("[%s] %zu %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
