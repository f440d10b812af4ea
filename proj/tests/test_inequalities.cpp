#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "frflow/flow.hpp"
#include "frflow/inequalities.hpp"
#include "oracles.hpp"

using namespace frflow;

TEST(TwoPoint, RatioMatchesHandFormula) {
  for (double x : {1e-3, 0.1, 0.5, 0.9}) {
    for (double y : {1.1, 2.0, 10.0, 1e3}) {
      EXPECT_NEAR(two_point_ratio(kl(), x, y), oracle::kl_two_point_ratio(x, y), 1e-10 * oracle::kl_two_point_ratio(x, y));
    }
  }
  EXPECT_NEAR(two_point_ratio(kl(), std::exp(-5.0), std::numbers::e), 0.157079889361, 1e-10);
  EXPECT_NEAR(two_point_ratio(power_family(-2.0), 0.5, 2.0), 2.16404256133, 1e-9);
  EXPECT_THROW(two_point_ratio(kl(), 1.5, 2.0), std::invalid_argument);
}

TEST(TwoPoint, RatioIndependentOfSlope) {
  // normalisation happens inside, so adding c (x - 1) changes nothing
  for (double x : {0.01, 0.4}) {
    for (double y : {1.5, 30.0}) {
      EXPECT_NEAR(two_point_ratio(kl(), x, y), two_point_ratio(normalize_slope(kl()), x, y), 1e-12);
    }
  }
}

TEST(TwoPoint, KlRatioCollapses) {
  double prev = 1e300;
  for (double M : {1.0, 5.0, 10.0, 15.0, 20.0}) {
    const double r = two_point_ratio(kl(), std::exp(-M), std::numbers::e);
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_LE(prev, 1e-6);
}

TEST(TwoPoint, TermsMatchKPointOnTwoPoints) {
  // the K-point pairwise form on a two-point pair reduces to the two-point inequality
  for (double x : {0.05, 0.5}) {
    for (double y : {2.0, 9.0}) {
      // masses with x rho*_0 + y rho*_1 = 1
      const double s0 = (y - 1.0) / (y - x);
      const std::vector<double> rs = {s0, 1.0 - s0};
      const std::vector<double> r = {x * s0, y * (1.0 - s0)};
      const auto g = normalize_slope(kl());
      const auto t = two_point_terms(g, x, y);
      const double tp = t.lhs / t.rhs;
      EXPECT_NEAR(kpoint_ratio(g, r, rs), tp, 1e-9 * tp);
    }
  }
}

TEST(LogGrid, Endpoints) {
  const auto g = make_log_grid(1e-4, 1.0, 10, true, false);
  EXPECT_EQ(g.size(), 40u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-4);
  EXPECT_LT(g.back(), 1.0);
  const auto h = make_log_grid(1.0, 1e4, 10, false, true);
  EXPECT_GT(h.front(), 1.0);
  EXPECT_DOUBLE_EQ(h.back(), 1e4);
}

TEST(Scan, PowerMinusTwoPassesAndKlFails) {
  const auto xs = make_log_grid(1e-4, 1.0, 50, true, false);
  const auto ys = make_log_grid(1.0, 1e4, 50, false, true);
  const auto good = scan_two_point(power_family(-2.0), xs, ys, 0.1);
  EXPECT_TRUE(good.passed);
  EXPECT_GE(good.min_ratio, 0.1);
  const auto bad = scan_two_point(kl(), xs, ys, 0.1);
  EXPECT_FALSE(bad.passed);
  EXPECT_GT(bad.violation_count, 0u);
  EXPECT_LE(bad.violations.size(), kMaxStoredViolations);
  EXPECT_LT(bad.min_ratio, 0.1);
}

TEST(Gdc, ReverseKlPassesKlFailsOnWitness) {
  const auto pairs = random_pairs(500, 2, 8, 1, 1.0);
  EXPECT_TRUE(gdc_check(reverse_kl(), pairs, 0.1, {}).passed);
  std::vector<DensityPair> witness = {make_two_point(std::numbers::e, std::exp(-20.0))};
  const auto rep = gdc_check(kl(), witness, 0.01, {});
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.violation_count, 1u);
  EXPECT_EQ(rep.inequality_id, "gdc");
}

TEST(Gdc, ReportJson) {
  const auto pairs = random_pairs(10, 2, 3, 4, 1.0);
  const nlohmann::json j = gdc_check(kl(), pairs, 0.0, {});
  for (const char* key : {"inequality_id", "generator", "alpha_tested", "samples", "skipped", "min_ratio",
                          "argmin_witness", "violations", "violation_count", "passed", "details"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  InequalityReport empty;
  const nlohmann::json je = empty;
  EXPECT_TRUE(je["min_ratio"].is_null());
}

TEST(KPoint, PairwiseFormAgreesAndPasses) {
  const auto rep = kpoint_check(power_family(-2.0), 6, 2000, 0.5, 7);
  EXPECT_TRUE(rep.passed);
  EXPECT_GE(rep.min_ratio, 0.5);
  const auto fail = kpoint_check(kl(), 6, 2000, 5.0, 7);
  EXPECT_FALSE(fail.passed);
}

TEST(KPoint, RatioInvariantUnderPermutation) {
  const auto pair = sample_random_pair(5, 2ULL, 1.0);
  auto r = pair.rho;
  auto rs = pair.rho_star;
  std::reverse(r.begin(), r.end());
  std::reverse(rs.begin(), rs.end());
  const auto g = normalize_slope(chi2());
  EXPECT_NEAR(kpoint_ratio(g, pair.rho, pair.rho_star), kpoint_ratio(g, r, rs), 1e-12);
}

TEST(SupportReduction, ThreePointBelowKPoint) {
  const auto rep = support_reduction_probe(power_family(-2.0), 4, 2000, 3);
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(rep.details["threepoint_min"].get<double>(), rep.details["kpoint_min"].get<double>() + 1e-6);
  EXPECT_THROW(support_reduction_probe(kl(), 3, 10, 1), std::invalid_argument);
}

TEST(SufficientAlpha, PowerMinusTwo) {
  // x^2 f''(x) = 1 for p = -2
  EXPECT_NEAR(sufficient_alpha_s(power_family(-2.0), make_log_grid(1e-4, 1.0, 20)), 1.0, 1e-12);
  EXPECT_NEAR(sufficient_alpha_s(kl(), make_log_grid(1e-4, 1.0, 20)), 1e-4, 1e-12);
  const std::vector<double> bad = {2.0};
  EXPECT_THROW(sufficient_alpha_s(kl(), bad), std::invalid_argument);
}

TEST(Convexity, HFunction) {
  EXPECT_NEAR(convexity_h(kl(), std::exp(-3.0)), -1.0, 1e-14);
  EXPECT_NEAR(convexity_h(kl(), 1.0), 2.0, 1e-14);
  EXPECT_NEAR(convexity_h(reverse_kl(), 2.0), 2.0 * 2.0 / 4.0 - 0.5 + 1.0, 1e-14);
  const auto grid = make_log_grid(1e-4, 1e4, 20);
  EXPECT_FALSE(convexity_check(kl(), grid).passed);
  EXPECT_TRUE(convexity_check(reverse_kl(), grid).passed);
  EXPECT_TRUE(convexity_check(power_family(-2.0), grid).passed);
}

TEST(StrongConvexity, PowerMinusTwoPassesKlFails) {
  const auto good = strong_convexity_check(power_family(-2.0), 500, 1);
  EXPECT_TRUE(good.passed);
  EXPECT_NEAR(good.details["alpha_f"].get<double>(),
              std::min(1.0, good.details["delta_f"].get<double>() / 2.0), 1e-12);
  const auto bad = strong_convexity_check(kl(), 500, 1);
  EXPECT_FALSE(bad.passed);
  EXPECT_NEAR(bad.details["h_at_e_minus_3"].get<double>(), -1.0, 1e-12);
  EXPECT_FALSE(bad.violations.empty());
}

TEST(DualChi2, ConstantsAndChecks) {
  for (const auto& gen : {kl(), reverse_kl(), chi2()}) {
    const double d = dual_chi2_delta(gen);
    EXPECT_GT(d, 0.0);
    EXPECT_LT(d, 0.25);
    EXPECT_GT(dual_chi2_alpha(gen), 0.0);
    const auto pairs = random_pairs(300, 2, 8, 5, 1.0);
    const auto rep = dual_chi2_check(gen, pairs);
    EXPECT_TRUE(rep.passed) << gen.name();
    EXPECT_LE(rep.details["max_lhs_form_gap"].get<double>(), 1e-10);
    EXPECT_TRUE(dual_chi2_pointwise_check(normalize_slope(gen), 5000, 9).passed) << gen.name();
  }
}

TEST(DualChi2, PointwiseEqualityAtMuEqualsX) {
  const auto g = normalize_slope(kl());
  for (double x : {0.1, 1.0, 7.0}) {
    const auto t = dual_chi2_pointwise_terms(g, x, x);
    EXPECT_NEAR(t.lhs, 0.0, 1e-14);
    EXPECT_NEAR(t.rhs, 0.0, 1e-13);
  }
}

TEST(DualConjugate, FactorAndEqualityCases) {
  EXPECT_EQ(dual_conjugate_factor(-1.5), 0.5);
  EXPECT_EQ(dual_conjugate_factor(-3.0), 1.0);
  EXPECT_EQ(dual_conjugate_factor(0.0), 1.0);
  const auto pairs = random_pairs(100, 2, 8, 2, 1.0);
  for (double p : {-1.0, -2.0}) {
    for (const auto& pr : pairs) {
      const auto t = dual_conjugate_terms(p, pr);
      EXPECT_NEAR(t.lhs, t.d_f + t.d_fbar, 1e-10 * std::max(1.0, t.scale));
    }
    EXPECT_TRUE(dual_conjugate_check(p, pairs).passed);
  }
  for (double p : {-3.0, -1.5, 0.0, 1.0}) EXPECT_TRUE(dual_conjugate_check(p, pairs).passed) << p;
}

TEST(DualConjugate, LhsIsDissipationOfPartner) {
  // LHS equals -d/dt D_fbar along the D_f flow; central difference over a forward step
  const auto pair = sample_random_pair(5, 21ULL, 5.0);
  for (double p : {-1.0, -2.0, 0.0}) {
    const auto gen = power_family(p);
    const auto fbar = conjugate(gen);
    const auto t = dual_conjugate_terms(p, pair);
    auto step = [&](double h) {
      auto r = pair.rho;
      const auto k = flow_rhs(gen, pair);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] += h * k[i];
      return divergence(fbar, r, pair.rho_star, {});
    };
    const double h = 1e-6;
    const double deriv = (step(h) - step(-h)) / (2.0 * h);
    EXPECT_NEAR(-deriv, t.lhs, 1e-6 * std::max(1.0, std::abs(t.lhs))) << p;
  }
}

TEST(Neighborhood, FoundForPowerMinusTwoSkippedForKl) {
  const auto rep = lemma_gdc_neighborhood_check(power_family(-2.0), 1.0);
  EXPECT_TRUE(rep.passed);
  EXPECT_EQ(rep.details["status"], "found");
  const auto skip = lemma_gdc_neighborhood_check(kl(), 0.0);
  EXPECT_EQ(skip.details["status"], "skipped");
}
