#include "fpot/gpd.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fpot;
using namespace fpot::gpd;

TEST(Gpd, SurvivalSpotValues) {
  EXPECT_NEAR(survival({1, 1, 0}, 1), 0.5, 1e-12);
  EXPECT_NEAR(survival({0, 2, 0}, 2), std::exp(-1.0), 1e-12);
  EXPECT_EQ(survival({-0.5, 1, 0}, 2), 0.0);
  EXPECT_THROW(survival({0.3, 1, 2}, 1.5), InvalidArgument);
}

TEST(Gpd, QuantileSpotValues) {
  EXPECT_NEAR(quantile({1, 1, 0}, 0.5), 1.0, 1e-12);
  EXPECT_NEAR(quantile({0, 1, 3}, 1 - std::exp(-2.0)), 5.0, 1e-12);
  EXPECT_EQ(quantile({0.4, 2, 1.5}, 0.0), 1.5);
  EXPECT_THROW(quantile({0, 1, 0}, 1.2), InvalidArgument);
}

TEST(Gpd, QuantileInvertsSurvival) {
  for (double xi : {-0.4, -1e-9, 0.0, 0.25, 1.5})
    for (double q : {0.01, 0.3, 0.77, 0.999}) {
      const GpdParams p{xi, 1.7, 0.4};
      EXPECT_NEAR(survival(p, quantile(p, q)), 1 - q, 1e-10) << xi << " " << q;
    }
}

TEST(Gpd, LogDensity) {
  EXPECT_NEAR(log_density({0, 1, 0}, 0), 0.0, 1e-12);
  EXPECT_NEAR(log_density({1, 1, 0}, 0), 0.0, 1e-12);
  EXPECT_NEAR(log_density({1, 1, 0}, 1), std::log(0.25), 1e-12);
  EXPECT_EQ(log_density({-0.5, 1, 0}, 3), -std::numeric_limits<double>::infinity());
}

TEST(Gpd, TailProb) {
  EXPECT_NEAR(tail_prob({{0, 1, 10}, 0.04}, 10), 0.04, 1e-14);
  EXPECT_NEAR(tail_prob({{1, 1, 10}, 0.04}, 11), 0.02, 1e-14);
  EXPECT_NEAR(tail_prob({{0.2, 1, 10}, 1.0}, 12), survival({0.2, 1, 10}, 12), 1e-15);
  EXPECT_THROW(tail_prob({{0, 1, 10}, 0.04}, 9), InvalidArgument);
}

TEST(Gpd, DensityIntegratesToTailMass) {
  const GpdParams p{0.2, 1.5, 0.0};
  const double hi = quantile(p, 0.9999);
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) s += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(log_density(p, hi * i / n));
  EXPECT_NEAR(s * hi / n, 0.9999, 1e-6);
}

TEST(Gpd, UpperEndpoint) {
  EXPECT_NEAR(upper_endpoint({-0.5, 1, 0}), 2.0, 1e-14);
  EXPECT_TRUE(std::isinf(upper_endpoint({0.1, 1, 0})));
}

TEST(Gpd, ThresholdStability) {
  const GpdParams p{0.3, 1.2, 1.0};
  const double v = 2.0;
  const GpdParams q{0.3, 1.2 + 0.3 * (v - 1.0), v};
  for (double x : {0.2, 1.0, 4.0}) EXPECT_NEAR(survival(p, v + x) / survival(p, v), survival(q, v + x), 1e-12);
}

TEST(Gpd, FitRecoversParameters) {
  Rng rng(11);
  std::vector<double> s(50000);
  for (auto& v : s) v = sample({0.2, 1.0, 0.0}, rng);
  const auto f = fit_ml(s);
  EXPECT_NEAR(f.params.xi, 0.2, 0.03);
  EXPECT_NEAR(f.params.sigma, 1.0, 0.03);
  EXPECT_GT(f.se_xi, 0.0);
}

TEST(Gpd, FitOnExponentialQuantiles) {
  const std::size_t n = 10000;
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = quantile({0, 1, 0}, (i + 0.5) / n);
  EXPECT_NEAR(fit_ml(s).params.xi, 0.0, 0.02);
}

TEST(Gpd, FitRejectsNegativeExcess) { EXPECT_THROW(fit_ml({1.0, -0.1, 2.0}), InvalidArgument); }

TEST(Gpd, WeightedFitMatchesReplication) {
  Rng rng(5);
  std::vector<double> s(400);
  for (auto& v : s) v = sample({0.1, 2.0, 0.0}, rng);
  std::vector<double> twice = s;
  twice.insert(twice.end(), s.begin(), s.end());
  const auto a = fit_ml(twice);
  const auto b = fit_ml(s, std::vector<double>(s.size(), 2.0), 2.0 * s.size());
  EXPECT_NEAR(a.params.xi, b.params.xi, 1e-4);
  EXPECT_NEAR(a.params.sigma, b.params.sigma, 1e-4);
}

TEST(Gpd, EmpiricalQuantileType7) {
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 1.0), 4.0);
}

TEST(Gpd, KsDistanceSmallForOwnSample) {
  Rng rng(3);
  std::vector<double> s(20000);
  for (auto& v : s) v = sample({-0.2, 1.0, 0.0}, rng);
  EXPECT_LT(ks_distance(s, {-0.2, 1.0, 0.0}), 0.015);
  EXPECT_GT(ks_distance(s, {0.5, 1.0, 0.0}), 0.05);
}
