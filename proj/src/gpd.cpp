#include "fpot/gpd.hpp"

#include "fpot/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fpot::gpd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_sigma(const GpdParams& p) {
  if (!(p.sigma > 0.0)) throw InvalidArgument("GPD scale must be positive");
}
}  // namespace

double survival(const GpdParams& p, double x) {
  check_sigma(p);
  if (x < p.u) throw InvalidArgument("GPD survival evaluated below the threshold");
  const double z = (x - p.u) / p.sigma;
  if (std::abs(p.xi) < kXiZero) return std::exp(-z);
  const double t = p.xi * z;
  if (t <= -1.0) return 0.0;
  if (std::isinf(z)) return 0.0;
  return std::exp(-std::log1p(t) / p.xi);
}

double cdf(const GpdParams& p, double x) { return x <= p.u ? 0.0 : -std::expm1(std::log(survival(p, x))); }

double quantile(const GpdParams& p, double q) {
  check_sigma(p);
  if (!(q >= 0.0 && q < 1.0)) throw InvalidArgument("GPD quantile level must lie in [0, 1)");
  if (q == 0.0) return p.u;
  const double l = std::log1p(-q);
  if (std::abs(p.xi) < kXiZero) return p.u - p.sigma * l;
  return p.u + p.sigma * std::expm1(-p.xi * l) / p.xi;
}

double log_density(const GpdParams& p, double x) {
  check_sigma(p);
  if (!(x >= p.u)) return -kInf;
  const double z = (x - p.u) / p.sigma;
  if (std::abs(p.xi) < kXiZero) return -std::log(p.sigma) - z;
  const double t = p.xi * z;
  if (t <= -1.0) return -kInf;
  return -std::log(p.sigma) - (1.0 / p.xi + 1.0) * std::log1p(t);
}

double tail_prob(const TailModel& tm, double x) {
  if (!(tm.zeta_u > 0.0 && tm.zeta_u <= 1.0)) throw InvalidArgument("exceedance rate zeta_u must lie in (0, 1]");
  if (!(x >= tm.gpd.u)) throw InvalidArgument("tail probability requires x at or above the threshold");
  return tm.zeta_u * survival(tm.gpd, x);
}

double upper_endpoint(const GpdParams& p) { return p.xi < 0.0 ? p.u - p.sigma / p.xi : kInf; }

double sample(const GpdParams& p, Rng& rng) { return quantile(p, 1.0 - rng.uniform()); }

double neg_loglik(const std::vector<double>& x, const std::vector<double>& w, double xi, double sigma) {
  if (!(sigma > 0.0)) return kInf;
  const bool exp_case = std::abs(xi) < kXiZero;
  const double log_sigma = std::log(sigma);
  double nll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = x[i] / sigma;
    double lf;
    if (exp_case) {
      lf = -log_sigma - z;
    } else {
      const double t = xi * z;
      if (t <= -1.0) return kInf;
      lf = -log_sigma - (1.0 / xi + 1.0) * std::log1p(t);
    }
    nll -= (w.empty() ? 1.0 : w[i]) * lf;
  }
  return nll;
}

FitResult fit_ml(const std::vector<double>& excesses, const std::vector<double>& weights,
                 std::optional<double> weight_total) {
  const auto n = excesses.size();
  if (n < 10) throw InvalidArgument("GPD fit needs at least 10 excesses");
  for (double v : excesses)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("GPD excesses must be finite and non-negative");
  std::vector<double> w;
  if (!weights.empty()) {
    if (weights.size() != n) throw InvalidArgument("weight count does not match excess count");
    double total = 0.0;
    for (double v : weights) {
      if (!(v > 0.0)) throw InvalidArgument("GPD fit weights must be positive");
      total += v;
    }
    const double target = weight_total.value_or(static_cast<double>(n));
    w.reserve(n);
    for (double v : weights) w.push_back(v * target / total);
  }
  const auto [mn, mx] = std::minmax_element(excesses.begin(), excesses.end());
  if (*mx - *mn <= 1e-12 * std::max(1.0, std::abs(*mx))) throw InvalidArgument("degenerate excesses: all values equal");

  double wsum = 0.0, wmean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    wsum += wi;
    wmean += wi * excesses[i];
  }
  wmean /= wsum;

  constexpr double xi_floor = -0.95;
  auto objective = [&](const Vec& th) {
    if (th[0] <= xi_floor) return kInf;
    return neg_loglik(excesses, w, th[0], std::exp(th[1]));
  };

  // screen a grid of tail indices with moment-matched scales, then polish
  Vec best(2);
  double best_val = kInf;
  for (double xi0 : {-0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8}) {
    double s0 = std::max(wmean * (1.0 - xi0), 1e-8);
    if (xi0 < 0.0) s0 = std::max(s0, -xi0 * *mx * (1.0 + 1e-6));
    Vec th(2);
    th << xi0, std::log(s0);
    const double v = objective(th);
    if (v < best_val) {
      best_val = v;
      best = th;
    }
  }
  if (!std::isfinite(best_val)) throw FitError("GPD fit: no finite starting point", {best[0], std::exp(best[1]), 0.0});

  optim::Options opt;
  opt.initial_step = 0.1;
  opt.x_tol = 1e-10;
  opt.f_tol = 1e-14;
  auto res = optim::nelder_mead(objective, best, opt);
  GpdParams est{res.x[0], std::exp(res.x[1]), 0.0};
  if (!res.converged) throw FitError("GPD fit did not converge", est);

  FitResult out;
  out.params = est;
  out.loglik = -res.value;
  out.evals = res.evals;
  auto nll_natural = [&](const Vec& th) { return neg_loglik(excesses, w, th[0], th[1]); };
  Vec at(2);
  at << est.xi, est.sigma;
  Mat h = optim::numerical_hessian(nll_natural, at, 1e-4);
  Eigen::LLT<Mat> llt(h);
  if (llt.info() == Eigen::Success) {
    out.covariance = llt.solve(Mat::Identity(2, 2));
    out.se_xi = std::sqrt(out.covariance(0, 0));
    out.se_sigma = std::sqrt(out.covariance(1, 1));
  } else {
    out.covariance = Mat::Constant(2, 2, std::numeric_limits<double>::quiet_NaN());
    out.se_xi = out.se_sigma = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double empirical_quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) throw InvalidArgument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidArgument("quantile level must lie in [0, 1]");
  const double h = (static_cast<double>(s.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double empirical_quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return empirical_quantile_sorted(values, q);
}

double ks_distance(std::vector<double> sample, const GpdParams& p) {
  if (sample.empty()) throw InvalidArgument("KS distance of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(p, std::max(sample[i], p.u));
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace fpot::gpd
