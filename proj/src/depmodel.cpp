#include "fpot/depmodel.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <limits>
#include <numbers>

namespace fpot {

namespace {
constexpr double kQuarterPi = std::numbers::pi / 4.0;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
}  // namespace

void SpaceTimeMetric::validate() const {
  if (!(tau_s > 0.0) || !(tau_t > 0.0) || !(a > 0.0))
    throw InvalidArgument("metric scales tau_s, tau_t and a must be positive");
  if (!(eta > -kQuarterPi && eta <= kQuarterPi)) throw InvalidArgument("anisotropy angle eta must lie in (-pi/4, pi/4]");
  if (!V.allFinite()) throw InvalidArgument("advection vector V must be finite");
}

double metric_norm(const SpaceTimeMetric& m, const Eigen::Vector2d& ds, double dt) {
  const double ce = std::cos(m.eta), se = std::sin(m.eta);
  const double u1 = (ce * ds[0] - se * ds[1] - m.V[0] * dt) / m.tau_s;
  const double u2 = (m.a * (se * ds[0] + ce * ds[1]) - m.V[1] * dt) / m.tau_s;
  const double ut = dt / m.tau_t;
  return std::sqrt(u1 * u1 + u2 * u2 + ut * ut);
}

std::pair<Eigen::Vector2d, double> site_lag(const Site& si, const Site& sj) {
  Eigen::Vector2d ds(sj.x_km - si.x_km, sj.y_km - si.y_km);
  const double dt = (si.t_hours && sj.t_hours) ? (*sj.t_hours - *si.t_hours) : 0.0;
  return {ds, dt};
}

Variogram Variogram::whittle_matern(double kappa, double nu, SpaceTimeMetric m) {
  Variogram g;
  g.kind = Kind::WhittleMatern;
  g.kappa = kappa;
  g.nu = nu;
  g.metric = m;
  g.validate();
  return g;
}

Variogram Variogram::power(double tau, double nu, SpaceTimeMetric m) {
  Variogram g;
  g.kind = Kind::Power;
  g.tau = tau;
  g.nu = nu;
  g.metric = m;
  g.validate();
  return g;
}

Variogram Variogram::power_exponential(double c, double tau, double nu, SpaceTimeMetric m) {
  Variogram g;
  g.kind = Kind::PowerExponential;
  g.c = c;
  g.tau = tau;
  g.nu = nu;
  g.metric = m;
  g.validate();
  return g;
}

void Variogram::validate() const {
  metric.validate();
  switch (kind) {
    case Kind::WhittleMatern:
      if (!(kappa > 0.0) || !(nu > 0.0)) throw InvalidArgument("Whittle-Matern needs kappa > 0 and nu > 0");
      break;
    case Kind::Power:
      if (!(tau > 0.0) || !(nu > 0.0 && nu <= 2.0)) throw InvalidArgument("power variogram needs tau > 0, nu in (0, 2]");
      break;
    case Kind::PowerExponential:
      if (!(c > 0.0) || !(tau > 0.0) || !(nu > 0.0 && nu <= 2.0))
        throw InvalidArgument("power-exponential variogram needs c > 0, tau > 0, nu in (0, 2]");
      break;
  }
}

double Variogram::sill() const {
  switch (kind) {
    case Kind::WhittleMatern: return kappa;
    case Kind::PowerExponential: return c;
    case Kind::Power: return std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

double matern_kernel(double nu, double h) {
  if (h < 1e-12) return 1.0;
  double k;
  try {
    k = boost::math::cyl_bessel_k(nu, h);
  } catch (const std::exception& e) {
    throw NumericalError(std::string("Bessel K evaluation failed: ") + e.what());
  }
  if (k == 0.0) return 0.0;
  const double lv = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(h) + std::log(k);
  if (!std::isfinite(lv)) throw NumericalError("Bessel K evaluation overflowed");
  return std::min(1.0, std::exp(lv));
}

double variogram_at_norm(const Variogram& g, double h) {
  switch (g.kind) {
    case Variogram::Kind::WhittleMatern:
      return g.kappa * (1.0 - matern_kernel(g.nu, h));
    case Variogram::Kind::Power:
      return std::pow(h / g.tau, g.nu);
    case Variogram::Kind::PowerExponential:
      return -g.c * std::expm1(-std::pow(h / g.tau, g.nu));
  }
  return 0.0;
}

double variogram_eval(const Variogram& g, const Eigen::Vector2d& ds, double dt) {
  return variogram_at_norm(g, metric_norm(g.metric, ds, dt));
}

double variogram_between(const Variogram& g, const Site& si, const Site& sj) {
  const auto [ds, dt] = site_lag(si, sj);
  return variogram_eval(g, ds, dt);
}

Mat variogram_matrix(const Variogram& g, const SiteSet& sites) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Mat m = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      m(i, j) = m(j, i) = variogram_between(g, sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);
  return m;
}

void Correlation::validate() const {
  metric.validate();
  if (kind == Kind::PowerExponential && !(nu > 0.0 && nu <= 2.0))
    throw InvalidArgument("power-exponential correlation needs nu in (0, 2]");
  if (kind == Kind::WhittleMatern && !(nu > 0.0)) throw InvalidArgument("Matern correlation needs nu > 0");
}

double correlation_at_norm(const Correlation& c, double h) {
  switch (c.kind) {
    case Correlation::Kind::PowerExponential: return std::exp(-std::pow(h, c.nu));
    case Correlation::Kind::WhittleMatern: return matern_kernel(c.nu, h);
  }
  return 1.0;
}

double correlation_between(const Correlation& c, const Site& si, const Site& sj) {
  const auto [ds, dt] = site_lag(si, sj);
  return correlation_at_norm(c, metric_norm(c.metric, ds, dt));
}

Mat correlation_matrix(const Correlation& c, const SiteSet& sites) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Mat m = Mat::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      m(i, j) = m(j, i) = correlation_between(c, sites[static_cast<std::size_t>(i)], sites[static_cast<std::size_t>(j)]);
  return m;
}

void validate(const DependenceModel& dep) {
  if (const auto* br = std::get_if<BrownResnick>(&dep)) {
    br->variogram.validate();
  } else {
    const auto& et = std::get<ExtremalT>(dep);
    et.correlation.validate();
    if (!(et.df > 0.0)) throw InvalidArgument("extremal-t degrees of freedom must be positive");
  }
}

double br_extremogram(double gamma_val) {
  if (!(gamma_val >= 0.0)) throw InvalidArgument("variogram value must be non-negative");
  // 2(1 - Phi(z)) = erfc(z / sqrt 2) with z = sqrt(gamma / 2)
  return std::erfc(std::sqrt(gamma_val) / 2.0);
}

double et_extremogram(double C, double nu) {
  if (!(C >= -1.0 && C <= 1.0)) throw InvalidArgument("correlation must lie in [-1, 1]");
  if (!(nu > 0.0)) throw InvalidArgument("extremal-t degrees of freedom must be positive");
  if (C <= -1.0) return 0.0;
  const double arg = std::sqrt(nu + 1.0) * std::sqrt((1.0 - C) / (1.0 + C));
  boost::math::students_t_distribution<double> t(nu + 1.0);
  return 2.0 * boost::math::cdf(boost::math::complement(t, arg));
}

double model_extremogram(const DependenceModel& dep, const Site& si, const Site& sj) {
  if (const auto* br = std::get_if<BrownResnick>(&dep)) return br_extremogram(variogram_between(br->variogram, si, sj));
  const auto& et = std::get<ExtremalT>(dep);
  return et_extremogram(correlation_between(et.correlation, si, sj), et.df);
}

void require_psd(const Mat& m, double rel_tol) {
  const auto n = m.rows();
  Mat s = m;
  const double tol = rel_tol * std::max(m.trace(), 1e-300);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Eigen::Index step = 0; step < n; ++step) {
    Eigen::Index p = -1;
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)] && s(i, i) > best) {
        best = s(i, i);
        p = i;
      }
    if (best <= tol) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (used[static_cast<std::size_t>(j)]) continue;
          if (std::abs(s(i, j)) > tol || s(i, i) < -tol)
            throw NumericalError("covariance is not positive semi-definite: residual at pivot " + std::to_string(i) +
                                 " (value " + std::to_string(s(i, j)) + ")");
        }
      }
      return;
    }
    used[static_cast<std::size_t>(p)] = true;
    const double d = std::sqrt(best);
    Vec col = s.col(p) / d;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        s(i, j) -= col[i] * col[j];
      }
    }
  }
}

Mat gaussian_cov_from_gamma(const Mat& gamma, std::size_t ref_index, bool check_psd) {
  const auto n = gamma.rows();
  const auto r = static_cast<Eigen::Index>(ref_index);
  if (r >= n) throw InvalidArgument("reference site index out of range");
  Mat s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = gamma(i, r) + gamma(j, r) - gamma(i, j);
  s.row(r).setZero();
  s.col(r).setZero();
  if (check_psd) require_psd(s);
  return s;
}

Mat gaussian_cov(const BrownResnick& dep, const SiteSet& sites, std::size_t ref_index) {
  if (ref_index >= sites.size()) throw InvalidArgument("reference site index out of range");
  return gaussian_cov_from_gamma(variogram_matrix(dep.variogram, sites), ref_index, true);
}

// -- named parameters --------------------------------------------------------

namespace {
enum class Transform { Log, Logit2, TanhQuarterPi, Identity };

struct ParamRef {
  double* value;
  Transform transform;
};

ParamRef lookup(DependenceModel& dep, const std::string& name) {
  SpaceTimeMetric* metric = nullptr;
  if (auto* br = std::get_if<BrownResnick>(&dep)) {
    auto& g = br->variogram;
    metric = &g.metric;
    using K = Variogram::Kind;
    if (name == "nu") return {&g.nu, g.kind == K::WhittleMatern ? Transform::Log : Transform::Logit2};
    if (name == "kappa" && g.kind == K::WhittleMatern) return {&g.kappa, Transform::Log};
    if (name == "tau" && g.kind != K::WhittleMatern) return {&g.tau, Transform::Log};
    if (name == "c" && g.kind == K::PowerExponential) return {&g.c, Transform::Log};
  } else {
    auto& et = std::get<ExtremalT>(dep);
    metric = &et.correlation.metric;
    if (name == "df") return {&et.df, Transform::Log};
    if (name == "nu")
      return {&et.correlation.nu,
              et.correlation.kind == Correlation::Kind::WhittleMatern ? Transform::Log : Transform::Logit2};
  }
  if (name == "tau_s") return {&metric->tau_s, Transform::Log};
  if (name == "tau_t") return {&metric->tau_t, Transform::Log};
  if (name == "a") return {&metric->a, Transform::Log};
  if (name == "eta") return {&metric->eta, Transform::TanhQuarterPi};
  if (name == "V1") return {&metric->V[0], Transform::Identity};
  if (name == "V2") return {&metric->V[1], Transform::Identity};
  throw InvalidArgument("unknown dependence parameter '" + name + "' for this model");
}
}  // namespace

std::vector<std::string> parameter_names(const DependenceModel& dep) {
  std::vector<std::string> names;
  if (const auto* br = std::get_if<BrownResnick>(&dep)) {
    switch (br->variogram.kind) {
      case Variogram::Kind::WhittleMatern: names = {"kappa", "nu"}; break;
      case Variogram::Kind::Power: names = {"tau", "nu"}; break;
      case Variogram::Kind::PowerExponential: names = {"c", "tau", "nu"}; break;
    }
  } else {
    names = {"df", "nu"};
  }
  for (const char* m : {"tau_s", "tau_t", "eta", "a", "V1", "V2"}) names.emplace_back(m);
  return names;
}

double get_parameter(const DependenceModel& dep, const std::string& name) {
  auto copy = dep;
  return *lookup(copy, name).value;
}

void set_parameter(DependenceModel& dep, const std::string& name, double value) { *lookup(dep, name).value = value; }

double to_unconstrained(const DependenceModel& dep, const std::string& name, double v) {
  auto copy = dep;
  switch (lookup(copy, name).transform) {
    case Transform::Log: return std::log(v);
    case Transform::Logit2: {
      const double p = std::clamp(v / 2.0, 1e-12, 1.0 - 1e-12);
      return std::log(p / (1.0 - p));
    }
    case Transform::TanhQuarterPi: return std::atanh(std::clamp(v / kQuarterPi, -1.0 + 1e-12, 1.0 - 1e-12));
    case Transform::Identity: return v;
  }
  return v;
}

double from_unconstrained(const DependenceModel& dep, const std::string& name, double z) {
  auto copy = dep;
  switch (lookup(copy, name).transform) {
    case Transform::Log: return std::exp(z);
    case Transform::Logit2: return 2.0 * logistic(z);
    case Transform::TanhQuarterPi: return kQuarterPi * std::tanh(z);
    case Transform::Identity: return z;
  }
  return z;
}

}  // namespace fpot
