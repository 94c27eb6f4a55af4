#include "fpot/riskfunc.hpp"

#include <gtest/gtest.h>

using namespace fpot;

namespace {
Vec v3(double a, double b, double c) {
  Vec x(3);
  x << a, b, c;
  return x;
}
}  // namespace

TEST(RiskFunctional, UniformMean) { EXPECT_DOUBLE_EQ(evaluate(RiskFunctional::uniform_mean(3), v3(1, 2, 3)), 2.0); }

TEST(RiskFunctional, Supremum) { EXPECT_DOUBLE_EQ(evaluate(RiskFunctional::supremum(), v3(1, 2, 3)), 3.0); }

TEST(RiskFunctional, SiteEval) { EXPECT_DOUBLE_EQ(evaluate(RiskFunctional::site_eval(1), v3(1, 2, 3)), 2.0); }

TEST(RiskFunctional, LinearCombination) {
  const auto r = RiskFunctional::linear_combination({1.0, -2.0, 0.5});
  EXPECT_DOUBLE_EQ(evaluate(r, v3(1, 2, 3)), 1.0 - 4.0 + 1.5);
  EXPECT_TRUE(r.linear);
  EXPECT_FALSE(r.monotone);
}

TEST(RiskFunctional, WeightedMeanRejectsBadWeights) {
  EXPECT_THROW(RiskFunctional::weighted_mean({0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(RiskFunctional::weighted_mean({-0.5, 1.5}), InvalidArgument);
}

TEST(RiskFunctional, FourierConstantField) {
  const auto sites = SiteSet::grid(4, 3);
  const auto r = RiskFunctional::fourier_filtered_mean(4, 3, 1);
  EXPECT_NEAR(evaluate(r, Vec::Constant(12, 2.5), sites), 2.5, 1e-12);
}

TEST(RiskFunctional, FourierDampsRoughFields) {
  const auto sites = SiteSet::grid(4, 4);
  Vec x(16);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) x[4 * j + i] = 1.0 + ((i + j) % 2 ? 0.9 : -0.9);
  const auto r = RiskFunctional::fourier_filtered_mean(4, 4, 0);
  EXPECT_LT(evaluate(r, x, sites), x.mean());
}

TEST(RiskFunctional, MaxComposite) {
  const auto r = RiskFunctional::max_composite({RiskFunctional::site_eval(0), RiskFunctional::site_eval(1)}, {1.0, 1.0});
  Vec x(2);
  x << 3.0, 0.5;
  EXPECT_DOUBLE_EQ(evaluate(r, x), 2.0);
}

TEST(RiskFunctional, MinCompoundUsesBlocks) {
  const auto r = RiskFunctional::min_compound({RiskFunctional::uniform_mean(2), RiskFunctional::supremum()}, {1.0, 2.0});
  Vec x(4);
  x << 2.0, 4.0, 1.0, 5.0;  // block 1 mean 3, block 2 sup 5
  EXPECT_DOUBLE_EQ(evaluate(r, x), std::min(3.0 - 1.0, 5.0 - 2.0));
}

TEST(RiskFunctional, SizeMismatchThrows) {
  EXPECT_THROW(evaluate(RiskFunctional::uniform_mean(3), Vec::Ones(2)), InvalidArgument);
}

TEST(Validity, MeanAndSupremumArePositiveXiValid) {
  EXPECT_TRUE(check_validity(RiskFunctional::uniform_mean(3), 0.5, Vec::Ones(3)).valid());
  EXPECT_TRUE(check_validity(RiskFunctional::supremum(), 0.5, Vec::Ones(3)).valid());
}

TEST(Validity, ContrastIsInvalid) {
  const auto r = RiskFunctional::linear_combination({1.0, -1.0});
  EXPECT_EQ(check_validity(r, 0.5, Vec::Ones(2)).status, Validity::Invalid);
}

TEST(Validity, NonPositiveXiNeedsDivergence) {
  EXPECT_TRUE(check_validity(RiskFunctional::uniform_mean(3), 0.0, Vec::Ones(3)).valid());
  EXPECT_TRUE(check_validity(RiskFunctional::supremum(), -0.3, Vec::Ones(3)).valid());
}

TEST(Validity, RejectsNonPositiveScale) {
  EXPECT_THROW(check_validity(RiskFunctional::supremum(), 0.5, Vec::Zero(2)), InvalidArgument);
}
