#include "fpot/angular.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace fpot;

TEST(Angular, SingleSiteIsDegenerate) {
  Rng rng(1);
  const auto sites = SiteSet::line({0});
  EXPECT_NEAR(sample_W_br({Variogram::power(10, 1)}, sites, rng)[0], 1.0, 1e-15);
  ExtremalT et;
  et.df = 3;
  EXPECT_NEAR(sample_W_extremal_t(et, sites, rng)[0], 1.0, 1e-15);
}

TEST(Angular, PerfectCorrelationGivesUniformWeights) {
  ExtremalT et;
  et.df = 2;
  et.correlation.metric.tau_s = 1e300;
  Rng rng(2);
  const Vec w = sample_W_extremal_t(et, SiteSet::line({0, 1, 2, 3}), rng);
  for (int l = 0; l < 4; ++l) EXPECT_NEAR(w[l], 0.25, 1e-6);
}

TEST(Angular, SamplesLieOnSimplex) {
  const AngularSampler s(BrownResnick{Variogram::power(15, 1.2)}, SiteSet::grid(3, 2, 10));
  for (std::uint64_t k = 0; k < 200; ++k) {
    Rng rng(3, k);
    const Vec w = s.sample(rng);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
  }
}

// Unit margins: Lambda{y_l >= 1} = 1 = L E[W_l] for every site.
TEST(Angular, MeanWeightsMatchUnitMargins) {
  const auto sites = SiteSet::line({0, 8, 20, 41});
  ExtremalT et;
  et.df = 2.5;
  et.correlation.metric.tau_s = 25;
  for (const DependenceModel& dep : {DependenceModel(BrownResnick{Variogram::power(20, 1.5)}), DependenceModel(et)}) {
    const AngularSampler s(dep, sites);
    const std::size_t n = 100000;
    Vec mean = Vec::Zero(4);
    for (std::size_t k = 0; k < n; ++k) {
      Rng rng(4, k);
      mean += s.sample(rng);
    }
    mean /= static_cast<double>(n);
    for (int l = 0; l < 4; ++l) EXPECT_NEAR(mean[l], 0.25, 0.004);
  }
}

TEST(Angular, ExtremalTMoment) {
  EXPECT_NEAR(extremal_t_moment(1.0), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(extremal_t_moment(2.0), 0.5, 1e-14);
}

TEST(Angular, NormalizingSubset) {
  const AngularSampler s(BrownResnick{Variogram::power(15, 1)}, SiteSet::line({0, 5, 10}), {0, 2});
  EXPECT_EQ(s.norm_mass(), 2.0);
  Rng rng(5);
  const Vec w = s.sample(rng);
  EXPECT_NEAR(w[0] + w[2], 1.0, 1e-12);
}

TEST(LinearAngular, SpotValues) {
  const auto sum2 = RiskFunctional::linear_combination({1.0, 1.0});
  Vec y(2), A(2);
  y << 1, 1;
  A << 0.5, 0.5;
  Vec w = linear_angular_transform(y, 1.0, A, sum2);
  EXPECT_NEAR(w[0], 0.5, 1e-14);
  y << 1, 2;
  w = linear_angular_transform(y, 2.0, A, sum2);
  EXPECT_NEAR(w[0], 0.2, 1e-14);
  EXPECT_NEAR(w[1], 0.8, 1e-14);
  y << 3, 3;
  w = linear_angular_transform(y, 0.0, A, sum2);
  EXPECT_NEAR(w[0], 1.0, 1e-12);
  EXPECT_NEAR(w[1], 1.0, 1e-12);
}

TEST(PsdCholesky, HandlesSingularMatrices) {
  Mat m = Mat::Ones(3, 3);
  const Mat c = psd_cholesky(m);
  EXPECT_NEAR((c * c.transpose() - m).norm(), 0.0, 1e-8);
  EXPECT_EQ(psd_cholesky(Mat::Zero(2, 2)).norm(), 0.0);
}
