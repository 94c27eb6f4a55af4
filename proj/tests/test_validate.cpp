#include "fpot/validate.hpp"

#include <gtest/gtest.h>

using namespace fpot;

namespace {
ProcessSpec spec3(RiskFunctional r) {
  return ProcessSpec::make(0.0, Vec::Constant(3, 1.5), Vec::Constant(3, 2.0), std::move(r),
                           BrownResnick{Variogram::power(20, 1.0)}, SiteSet::line({0, 20, 40}));
}
}  // namespace

TEST(QQ, TrueModelStaysMostlyInsideBands) {
  Rng rng(1);
  std::vector<double> v(300);
  const gpd::GpdParams p{0.1, 2.0, 0.0};
  for (auto& x : v) x = gpd::sample(p, rng);
  const auto rep = qq_gpd(v, p, 300, 0.95, std::nullopt, 4);
  EXPECT_EQ(rep.model.size(), v.size());
  EXPECT_LT(rep.outside, 60u);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LE(rep.lower[i], rep.upper[i]);
  EXPECT_THROW(qq_gpd(v, p, 50), InvalidArgument);
}

TEST(QQ, ParameterUncertaintyWidensBands) {
  Rng rng(2);
  std::vector<double> v(100);
  const gpd::GpdParams p{0.1, 1.0, 0.0};
  for (auto& x : v) x = gpd::sample(p, rng);
  Mat cov = Mat::Identity(2, 2) * 0.01;
  const auto a = qq_gpd(v, p, 400, 0.9, std::nullopt, 1);
  const auto b = qq_gpd(v, p, 400, 0.9, cov, 1);
  EXPECT_GT(b.upper.back() - b.lower.back(), a.upper.back() - a.lower.back());
}

TEST(RiskCheck, GpdForAlg2Samples) {
  const auto spec = spec3(RiskFunctional::uniform_mean(3));
  SimOptions opt;
  opt.seed = 5;
  const auto sim = simulate_alg2(spec, std::nullopt, 20000, opt);
  EXPECT_LT(risk_gpd_check(sim.samples, spec).ks, 0.02);
  const auto fixed = simulate_alg2(spec, 10.0, 50, opt);
  EXPECT_THROW(risk_gpd_check(fixed.samples, spec), InvalidArgument);
}

TEST(RiskCheck, RejectsNonlinearFunctional) {
  const auto spec = spec3(RiskFunctional::supremum());
  EXPECT_THROW(risk_gpd_check({Vec::Ones(3)}, spec), InvalidArgument);
}

TEST(MarginalCheck, SupremumSatisfiesCone) {
  const auto spec = spec3(RiskFunctional::supremum());
  SimOptions opt;
  opt.seed = 6;
  const auto sim = simulate_alg1(spec, sim_bound(spec), 20000, opt);
  EXPECT_LT(marginal_conditional_check(sim.samples, spec, 1, 2.0), 0.03);
}

TEST(MarginalCheck, MeanViolatesCone) {
  const auto spec = spec3(RiskFunctional::uniform_mean(3));
  SimOptions opt;
  opt.seed = 7;
  const auto sim = simulate_alg2(spec, std::nullopt, 200, opt);
  EXPECT_THROW(marginal_conditional_check(sim.samples, spec, 0, 2.0), InvalidArgument);
}

TEST(ExtremogramCompare, ZeroLagAndIdenticalColumns) {
  const auto sites = SiteSet::line({0, 10});
  std::vector<Vec> f;
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const double v = rng.uniform();
    Vec x(2);
    x << v, v;
    f.push_back(x);
  }
  LagGrid grid;
  grid.dist_edges = {5, 15};
  const auto rows = extremogram_compare(sites, f, Vec::Constant(2, 0.5), BrownResnick{Variogram::power(10, 1)}, grid);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].model, 1.0);
  EXPECT_DOUBLE_EQ(*rows[1].empirical, 1.0);
  EXPECT_NEAR(rows[1].model, br_extremogram(1.0), 1e-14);
}

TEST(Homogeneity, Ratio) {
  EXPECT_DOUBLE_EQ(homogeneity_ratio({1, 2, 3, 4}, 1.5, 2.0), 1.0 / 3.0);
  EXPECT_THROW(homogeneity_ratio({1}, 5, 2), InvalidArgument);
}
