#include "fpot/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fpot;

namespace {
ProcessSpec five_site(double xi, RiskFunctional r) {
  const auto sites = SiteSet::line({0, 10, 25, 45, 70});
  Vec a(5), b(5);
  a << 1.0, 1.3, 0.8, 1.6, 1.2;
  b << 2.0, 2.5, 1.5, 3.0, 2.0;
  return ProcessSpec::make(xi, a, b, std::move(r), BrownResnick{Variogram::power(30, 1.5)}, sites);
}
}  // namespace

TEST(ProcessSpec, NormalizesScale) {
  const auto spec = five_site(0.2, RiskFunctional::uniform_mean(5));
  EXPECT_NEAR(evaluate(spec.r, spec.A), 1.0, 1e-14);
  EXPECT_NEAR(spec.risk_scale(), spec.a.mean(), 1e-14);
}

TEST(ProcessSpec, RejectsNonPositiveRiskScale) {
  EXPECT_THROW(five_site(0.5, RiskFunctional::linear_combination({1, -1, 0, 0, 0})), InvalidArgument);
}

TEST(Transform, ForwardSpotAndFloor) {
  const auto sites = SiteSet::line({0, 1});
  auto s0 = ProcessSpec::make(0.0, Vec::Ones(2), Vec::Zero(2), RiskFunctional::supremum(),
                              BrownResnick{Variogram::power(1, 1)}, sites);
  EXPECT_NEAR(transform_T(s0, Vec::Zero(2))[0], 1.0, 1e-15);
  auto s5 = ProcessSpec::make(0.5, Vec::Ones(2), Vec::Zero(2), RiskFunctional::supremum(),
                              BrownResnick{Variogram::power(1, 1)}, sites);
  EXPECT_NEAR(transform_T_inverse(s5, Vec::Zero(2))[0], -2.0, 1e-15);
}

TEST(Transform, RoundTrip) {
  for (double xi : {-0.3, 0.0, 0.4}) {
    const auto spec = five_site(xi, RiskFunctional::uniform_mean(5));
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
      Vec x(5);
      for (int l = 0; l < 5; ++l) x[l] = spec.b[l] + 0.5 * rng.normal();
      EXPECT_NEAR((transform_T_inverse(spec, transform_T(spec, x)) - x).norm(), 0.0, 1e-10);
      EXPECT_NEAR((to_process_scale(spec, from_process_scale(spec, x)) - x).norm(), 0.0, 1e-10);
    }
  }
}

TEST(SimBound, SingleSite) {
  auto spec = ProcessSpec::make(0.3, Vec::Ones(1), Vec::Zero(1), RiskFunctional::site_eval(0),
                                BrownResnick{Variogram::power(1, 1)}, SiteSet::line({0}));
  EXPECT_NEAR(sim_bound(spec).u, 0.9, 1e-12);
}

TEST(SimBound, ClosedFormIsBelowEveryRayRoot) {
  for (double xi : {-0.3, 0.0, 0.5, 1.5}) {
    const auto spec = five_site(xi, RiskFunctional::uniform_mean(5));
    const auto cf = sim_bound_closed_form(spec);
    ASSERT_TRUE(cf);
    const auto num = sim_bound(spec, 4000, 1.0, 3);
    EXPECT_LE(cf->u, num.u * (1 + 1e-9)) << xi;
    EXPECT_GT(cf->u, 0.5 * num.u) << xi;
  }
}

TEST(Alg1, SingleSiteExponentialMargin) {
  auto spec = ProcessSpec::make(0.0, Vec::Ones(1), Vec::Zero(1), RiskFunctional::site_eval(0),
                                BrownResnick{Variogram::power(1, 1)}, SiteSet::line({0}));
  SimOptions opt;
  opt.seed = 7;
  const auto res = simulate_alg1(spec, sim_bound(spec), 100000, opt);
  double mean = 0;
  for (const auto& p : res.samples) mean += p[0];
  mean /= res.samples.size();
  EXPECT_NEAR(mean, 1.0, 0.01);
}

TEST(Alg1, SamplesAreExceedancesAndThreadIndependent) {
  const auto spec = five_site(0.1, RiskFunctional::supremum());
  const auto bound = sim_bound(spec, 1000, 0.9, 1);
  SimOptions o1;
  o1.seed = 42;
  o1.threads = 1;
  SimOptions o4 = o1;
  o4.threads = 4;
  const auto a = simulate_alg1(spec, bound, 300, o1);
  const auto b = simulate_alg1(spec, bound, 300, o4);
  ASSERT_EQ(a.samples.size(), 300u);
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    EXPECT_EQ((a.samples[k] - b.samples[k]).norm(), 0.0);
    EXPECT_GE(evaluate(spec.r, standardized_field(spec, from_process_scale(spec, a.samples[k]))), -1e-12);
  }
  EXPECT_GE(a.min_margin, 1.0);
}

TEST(Alg2, FixedRiskIsExact) {
  for (double xi : {-0.2, 0.0, 0.6}) {
    const auto spec = five_site(xi, RiskFunctional::uniform_mean(5));
    SimOptions opt;
    opt.seed = 9;
    const double rho = xi < 0 ? evaluate(spec.r, spec.b) + 3 * spec.risk_scale() : 100.0;
    const auto res = simulate_alg2(spec, rho, 200, opt);
    for (const auto& p : res.samples) EXPECT_NEAR(evaluate(spec.r, p), rho, 1e-10);
  }
}

TEST(Alg2, FixedRiskBeyondEndpointThrows) {
  const auto spec = five_site(-0.2, RiskFunctional::uniform_mean(5));
  EXPECT_THROW(simulate_alg2(spec, 100.0, 10), InvalidArgument);
}

TEST(Alg2, RiskAboveThreshold) {
  const auto spec = five_site(0.2, RiskFunctional::uniform_mean(5));
  SimOptions opt;
  opt.seed = 10;
  const auto res = simulate_alg2(spec, std::nullopt, 500, opt);
  const double rb = evaluate(spec.r, spec.b);
  for (const auto& p : res.samples) EXPECT_GE(evaluate(spec.r, p), rb - 1e-12);
}

TEST(Alg2, RejectsNonlinearRisk) {
  const auto spec = five_site(0.2, RiskFunctional::supremum());
  EXPECT_THROW(simulate_alg2(spec, std::nullopt, 10), InvalidArgument);
}

TEST(Storm, CentreSliceCarriesThePeak) {
  std::vector<Site> st;
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < 3; ++i) st.push_back({"s" + std::to_string(i) + "t" + std::to_string(t), 40.0 * i, 0.0, 6.0 * t});
  StormSpec s;
  s.xi = 0.1;
  s.a = Vec::Ones(9);
  s.b = Vec::Zero(9);
  s.r = RiskFunctional::uniform_mean(3);
  SpaceTimeMetric m;
  m.tau_s = 50;
  m.tau_t = 10;
  s.dep = {Variogram::power(1.0, 1.0, m)};
  s.sites = SiteSet(st);
  s.centre_time = 6.0;
  SimOptions opt;
  opt.seed = 3;
  const auto res = simulate_storm_conditional(s, 200, opt);
  ASSERT_EQ(res.samples.size(), 200u);
  for (std::size_t k = 0; k < res.samples.size(); ++k) {
    const Vec& x = res.samples[k];
    const double c = x.segment(3, 3).mean();
    EXPECT_NEAR(c, res.centre_risk[k], 1e-12);
    EXPECT_GE(c, x.segment(0, 3).mean());
    EXPECT_GE(c, x.segment(6, 3).mean());
    EXPECT_GE(c, 0.0 - 1e-12);
  }
}

TEST(MaxStable, SingleSiteFrechet) {
  auto spec = ProcessSpec::make(1.0, Vec::Ones(1), Vec::Ones(1), RiskFunctional::site_eval(0),
                                BrownResnick{Variogram::power(1, 1)}, SiteSet::line({0}));
  SimOptions opt;
  opt.seed = 5;
  const auto m = max_stable_oracle(spec, 20000, opt);
  std::size_t below = 0;
  for (const auto& v : m) below += v[0] <= 2.0;
  EXPECT_NEAR(below / 20000.0, std::exp(-0.5), 0.012);
}

TEST(MaxStable, LimitedToFiveSites) {
  auto spec = ProcessSpec::make(1.0, Vec::Ones(6), Vec::Ones(6), RiskFunctional::supremum(),
                                BrownResnick{Variogram::power(1, 1)}, SiteSet::line({0, 1, 2, 3, 4, 5}));
  EXPECT_THROW(max_stable_oracle(spec, 1), InvalidArgument);
}
