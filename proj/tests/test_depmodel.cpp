#include "fpot/depmodel.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace fpot;

namespace {
// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, trapezoid rule
double bessel_k_quad(double nu, double x) {
  const int n = 40000;
  const double hi = 12.0, h = hi / n;
  double s = 0.5 * std::exp(-x);
  for (int i = 1; i <= n; ++i) {
    const double t = i * h;
    s += (i == n ? 0.5 : 1.0) * std::exp(-x * std::cosh(t)) * std::cosh(nu * t);
  }
  return s * h;
}
}  // namespace

TEST(Metric, EuclideanWhenIsotropic) {
  SpaceTimeMetric m;
  EXPECT_NEAR(metric_norm(m, {3, 4}, 0), 5.0, 1e-14);
  EXPECT_NEAR(metric_norm(m, {0, 0}, 1.0), 1.0, 1e-14);
}

TEST(Metric, AnisotropyScalesSecondRow) {
  SpaceTimeMetric m;
  m.a = 2;
  EXPECT_NEAR(metric_norm(m, {0, 1}, 0), 2.0, 1e-14);
}

TEST(Metric, AdvectionCancelsMatchingDisplacement) {
  SpaceTimeMetric m;
  m.V = {10, 5};
  m.tau_t = 1e12;
  EXPECT_NEAR(metric_norm(m, {10, 5}, 1.0), 0.0, 1e-9);
}

TEST(Metric, RotationPreservesLengthWhenIsotropic) {
  SpaceTimeMetric m;
  m.eta = 0.7;
  EXPECT_NEAR(metric_norm(m, {3, 4}, 0), 5.0, 1e-12);
}

TEST(Variogram, SpotValues) {
  EXPECT_EQ(variogram_at_norm(Variogram::whittle_matern(2.85, 1), 0.0), 0.0);
  EXPECT_NEAR(variogram_at_norm(Variogram::power(30, 1.8), 30.0), 1.0, 1e-14);
  EXPECT_NEAR(variogram_at_norm(Variogram::whittle_matern(3.5, 1), 1e4), 3.5, 1e-10);
  EXPECT_NEAR(variogram_at_norm(Variogram::power_exponential(0.5, 15, 1.8), 15.0), 0.5 * (1 - std::exp(-1.0)), 1e-14);
}

TEST(Variogram, WhittleMaternAgainstBesselQuadrature) {
  const double k1 = bessel_k_quad(1.0, 1.0);
  EXPECT_NEAR(variogram_at_norm(Variogram::whittle_matern(1, 1), 1.0), 1.0 - k1, 1e-9);
  const double nu = 2.5, h = 0.8;
  const double kern = std::pow(2.0, 1 - nu) / std::tgamma(nu) * std::pow(h, nu) * bessel_k_quad(nu, h);
  EXPECT_NEAR(matern_kernel(nu, h), kern, 1e-9);
}

TEST(Variogram, SillAndValidation) {
  EXPECT_TRUE(std::isinf(Variogram::power(1, 1).sill()));
  EXPECT_DOUBLE_EQ(Variogram::power_exponential(0.5, 1, 1).sill(), 0.5);
  EXPECT_THROW(Variogram::power(1, 2.5), InvalidArgument);
  EXPECT_THROW(Variogram::whittle_matern(-1, 1), InvalidArgument);
}

TEST(Extremogram, BrownResnick) {
  EXPECT_NEAR(br_extremogram(0.0), 1.0, 1e-14);
  EXPECT_NEAR(br_extremogram(2.0), 0.31731050786291415, 1e-12);
  EXPECT_LT(br_extremogram(1e4), 1e-12);
}

TEST(Extremogram, ExtremalT) {
  EXPECT_NEAR(et_extremogram(1.0, 3.0), 1.0, 1e-14);
  // t with 2 degrees of freedom has CDF 1/2 + t / (2 sqrt(2 + t^2))
  const double t = std::sqrt(2.0);
  EXPECT_NEAR(et_extremogram(0.0, 1.0), 2 * (0.5 - t / (2 * std::sqrt(2 + t * t))), 1e-12);
}

TEST(Extremogram, BoundedVersusUnboundedRegimes) {
  const auto bounded = Variogram::power_exponential(0.5, 15, 1.8);
  const auto unbounded = Variogram::power(30, 1.8);
  const double floor = br_extremogram(bounded.sill());
  for (double h : {10.0, 100.0, 1000.0}) EXPECT_GE(br_extremogram(variogram_at_norm(bounded, h)), floor - 1e-12);
  EXPECT_LT(br_extremogram(variogram_at_norm(unbounded, 1000.0)), 1e-6);
}

TEST(GaussianCov, ZeroAtReferenceAndPsd) {
  std::vector<Site> s{{"a", 0, 0, {}}, {"b", 13, 2, {}}, {"c", -4, 9, {}}, {"d", 30, -7, {}}, {"e", 5, 5, {}}};
  const SiteSet sites(s);
  const auto cov = gaussian_cov(BrownResnick{Variogram::power(20, 1.5)}, sites, 2);
  EXPECT_EQ(cov(2, 2), 0.0);
  EXPECT_NEAR((cov - cov.transpose()).norm(), 0.0, 1e-14);
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
}

TEST(GaussianCov, RejectsNonConditionallyNegativeDefinite) {
  Mat gamma(3, 3);
  gamma << 0, 1, 10, 1, 0, 1, 10, 1, 0;  // violates the triangle-type bound
  EXPECT_THROW(gaussian_cov_from_gamma(gamma, 1), NumericalError);
}

TEST(Parameters, RoundTripThroughUnconstrainedScale) {
  DependenceModel d = BrownResnick{Variogram::whittle_matern(3.5, 1.0, {614, 23.8, -0.07, 1.41, {51.3, 14.4}})};
  for (const auto& name : parameter_names(d)) {
    const double v = get_parameter(d, name);
    EXPECT_NEAR(from_unconstrained(d, name, to_unconstrained(d, name, v)), v, 1e-9 * std::max(1.0, std::abs(v))) << name;
  }
  set_parameter(d, "kappa", 2.0);
  EXPECT_DOUBLE_EQ(get_parameter(d, "kappa"), 2.0);
  EXPECT_THROW(get_parameter(d, "df"), InvalidArgument);
}

TEST(ModelExtremogram, MatchesVariogramAtSitePair) {
  const DependenceModel d = BrownResnick{Variogram::power(30, 1.8)};
  const Site a{"a", 0, 0, {}}, b{"b", 30, 0, {}};
  EXPECT_NEAR(model_extremogram(d, a, b), br_extremogram(1.0), 1e-14);
}
