#include "fpot/infer.hpp"

#include "fpot/angular.hpp"
#include "fpot/gpd.hpp"
#include "fpot/optim.hpp"
#include "fpot/parallel.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

namespace fpot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool xi_zero(double xi) { return std::abs(xi) < gpd::kXiZero; }

template <class F>
std::pair<double, double> brent_min(F f, double lo, double hi) {
  const auto r = boost::math::tools::brent_find_minima(f, lo, hi, 40);
  return {r.first, r.second};
}
}  // namespace

// -- declustering ---------------------------------------------------------------

std::vector<ClusterPeak> decluster(const std::vector<double>& time, const std::vector<double>& risk, double u_n,
                                   double separation) {
  if (time.empty() || risk.empty()) throw InvalidArgument("declustering needs a non-empty series");
  if (time.size() != risk.size()) throw InvalidArgument("time and risk series differ in length");
  if (!(separation > 0.0)) throw InvalidArgument("separation must be positive");
  const auto n = risk.size();
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(risk[i] >= u_n)) continue;
    const bool left = i == 0 || risk[i] >= risk[i - 1];
    const bool right = i + 1 == n || risk[i] >= risk[i + 1];
    if (left && right) cand.push_back(i);
  }
  std::stable_sort(cand.begin(), cand.end(), [&](auto a, auto b) { return risk[a] > risk[b]; });
  std::vector<ClusterPeak> kept;
  for (auto i : cand) {
    const bool clear = std::all_of(kept.begin(), kept.end(),
                                   [&](const ClusterPeak& p) { return std::abs(time[i] - p.time) >= separation; });
    if (clear) kept.push_back({i, time[i], risk[i]});
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return kept;
}

// -- exceedances and margins ----------------------------------------------------

ExceedanceSet make_exceedance_set(std::vector<FieldObservation> events, const RiskFunctional& r, double u_n) {
  ExceedanceSet es;
  es.u_n = u_n;
  es.events = std::move(events);
  es.risk.reserve(es.events.size());
  for (std::size_t j = 0; j < es.events.size(); ++j) {
    es.risk.push_back(evaluate(r, es.events[j].values));
    if (es.risk.back() >= u_n) es.K.push_back(j);
  }
  if (es.K.empty()) throw InvalidArgument("no event exceeds the risk threshold");
  return es;
}

MarginalModel fit_margins(const ExceedanceSet& es, const RiskFunctional& r, bool storm_weights) {
  if (es.K.empty()) throw InvalidArgument("empty exceedance set");
  const auto L = es.events[es.K.front()].values.size();
  const auto nK = es.K.size();
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(L));
  for (auto j : es.K) {
    const Vec& x = es.events[j].values;
    if (x.size() != L) throw InvalidArgument("events differ in the number of sites");
    for (Eigen::Index l = 0; l < L; ++l) cols[static_cast<std::size_t>(l)].push_back(x[l]);
  }
  for (auto& c : cols) std::sort(c.begin(), c.end());
  auto b_at = [&](double q) {
    Vec b(L);
    for (Eigen::Index l = 0; l < L; ++l) b[l] = gpd::empirical_quantile_sorted(cols[static_cast<std::size_t>(l)], q);
    return b;
  };

  MarginalModel mm;
  mm.u_n = es.u_n;
  // calibrate q' so that r(b) = u_n
  double lo = 0.0, hi = 1.0;
  const double f_lo = evaluate(r, b_at(lo)) - es.u_n, f_hi = evaluate(r, b_at(hi)) - es.u_n;
  if (f_lo > 0.0 || f_hi < 0.0) throw NumericalError("threshold calibration failed: u_n is outside the range of r(b(q))");
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = evaluate(r, b_at(mid)) - es.u_n;
    if (f == 0.0) {
      lo = hi = mid;
      break;
    }
    (f < 0.0 ? lo : hi) = mid;
  }
  mm.q_prime = 0.5 * (lo + hi);
  mm.b = b_at(mm.q_prime);
  if (std::abs(evaluate(r, mm.b) - es.u_n) > 1e-8 * std::max(1.0, std::abs(es.u_n)))
    throw NumericalError("threshold calibration failed: r(b(q)) is not monotone in q");

  // excesses and weights per site
  std::vector<double> cluster(nK, 0.0);
  for (std::size_t k = 0; k < nK; ++k) {
    const Vec& x = es.events[es.K[k]].values;
    for (Eigen::Index l = 0; l < L; ++l)
      if (x[l] > mm.b[l]) cluster[k] += 1.0;
  }
  std::vector<std::vector<double>> exc(static_cast<std::size_t>(L)), wts(static_cast<std::size_t>(L));
  std::vector<std::size_t> used;
  for (Eigen::Index l = 0; l < L; ++l) {
    auto& e = exc[static_cast<std::size_t>(l)];
    auto& w = wts[static_cast<std::size_t>(l)];
    for (std::size_t k = 0; k < nK; ++k) {
      const double v = es.events[es.K[k]].values[l] - mm.b[l];
      if (v > 0.0) {
        e.push_back(v);
        w.push_back(1.0 / cluster[k]);
      }
    }
    const bool degenerate =
        e.size() < 10 || (*std::max_element(e.begin(), e.end()) - *std::min_element(e.begin(), e.end()) <= 1e-12);
    if (degenerate) {
      mm.excluded.push_back(static_cast<std::size_t>(l));
      mm.notes.push_back("site " + std::to_string(l) + " excluded: " +
                         (e.size() < 10 ? "fewer than 10 excesses" : "degenerate excesses"));
      continue;
    }
    if (storm_weights) {
      const double total = std::accumulate(w.begin(), w.end(), 0.0);
      for (double& v : w) v *= static_cast<double>(w.size()) / total;
    } else {
      w.clear();
    }
    used.push_back(static_cast<std::size_t>(l));
  }
  if (used.empty()) throw InvalidArgument("no site has enough non-degenerate excesses");

  mm.a = Vec::Constant(L, kNaN);
  mm.se_a = Vec::Constant(L, kNaN);
  if (used.size() == 1) {
    const auto l = used.front();
    const auto fit = gpd::fit_ml(exc[l], wts[l]);
    mm.xi = fit.params.xi;
    mm.a[static_cast<Eigen::Index>(l)] = fit.params.sigma;
    mm.se_xi = fit.se_xi;
    mm.se_a[static_cast<Eigen::Index>(l)] = fit.se_sigma;
    mm.loglik = fit.loglik;
  } else {
    auto best_sigma = [&](std::size_t l, double xi) {
      const auto& e = exc[l];
      const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
      const double mx = *std::max_element(e.begin(), e.end());
      const double s0 = std::log(std::max(mean * (1.0 - std::min(xi, 0.9)), 1e-300));
      double lo_s = s0 - 6.0;
      if (xi < 0.0) lo_s = std::max(lo_s, std::log(-xi * mx) + 1e-9);
      const double hi_s = std::max(s0 + 6.0, lo_s + 1.0);
      auto f = [&](double ls) { return gpd::neg_loglik(e, wts[l], xi, std::exp(ls)); };
      const auto [ls, v] = brent_min(f, lo_s, hi_s);
      return std::pair{std::exp(ls), v};
    };
    auto profile = [&](double xi) {
      double s = 0.0;
      for (auto l : used) s += best_sigma(l, xi).second;
      return std::isfinite(s) ? s : kInf;
    };
    double xb = 0.0, vb = kInf;
    for (double xi = -0.9; xi <= 1.5 + 1e-9; xi += 0.1) {
      const double v = profile(xi);
      if (v < vb) {
        vb = v;
        xb = xi;
      }
    }
    if (!std::isfinite(vb)) throw NumericalError("marginal likelihood is not finite at any tail index");
    const auto [xi_hat, nll] = brent_min(profile, std::max(xb - 0.1, -0.95 + 1e-6), xb + 0.1);
    mm.xi = xi_hat;
    mm.loglik = -nll;
    // arrowhead observed information over (xi, sigma_1..sigma_L)
    double h_xx = 0.0, schur = 0.0;
    std::vector<double> h_xs(used.size()), h_ss(used.size());
    for (std::size_t k = 0; k < used.size(); ++k) {
      const auto l = used[k];
      const double sig = best_sigma(l, xi_hat).first;
      mm.a[static_cast<Eigen::Index>(l)] = sig;
      auto f = [&](const Vec& th) { return gpd::neg_loglik(exc[l], wts[l], th[0], th[1]); };
      Vec at(2);
      at << xi_hat, sig;
      const Mat h = optim::numerical_hessian(f, at, 1e-4);
      h_xx += h(0, 0);
      h_xs[k] = h(0, 1);
      h_ss[k] = h(1, 1);
      schur += h(0, 1) * h(0, 1) / h(1, 1);
    }
    const double var_xi = 1.0 / (h_xx - schur);
    mm.se_xi = var_xi > 0.0 ? std::sqrt(var_xi) : kNaN;
    for (std::size_t k = 0; k < used.size(); ++k) {
      const double v = 1.0 / h_ss[k] + (h_xs[k] / h_ss[k]) * (h_xs[k] / h_ss[k]) * var_xi;
      mm.se_a[static_cast<Eigen::Index>(used[k])] = (v > 0.0 && h_ss[k] > 0.0) ? std::sqrt(v) : kNaN;
    }
  }
  if (!mm.excluded.empty()) {
    double s = 0.0;
    for (auto l : used) s += mm.a[static_cast<Eigen::Index>(l)];
    const double fill = s / static_cast<double>(used.size());
    for (auto l : mm.excluded) mm.a[static_cast<Eigen::Index>(l)] = fill;
    mm.notes.push_back("excluded sites use the mean fitted scale");
  }
  mm.a_prime = evaluate(r, mm.a);
  if (!(mm.a_prime > 0.0)) throw NumericalError("fitted scales give r(a) <= 0");
  mm.A = mm.a / mm.a_prime;
  mm.B = mm.b - mm.A * es.u_n;
  return mm;
}

// -- extremogram and least squares -----------------------------------------------

std::vector<std::optional<double>> empirical_extremogram(const ExceedanceSet& es, const Vec& b,
                                                         const std::vector<SitePair>& pairs) {
  std::vector<std::optional<double>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (static_cast<Eigen::Index>(std::max(p.given, p.target)) >= b.size())
      throw InvalidArgument("extremogram pair refers to a site outside the threshold vector");
    std::size_t den = 0, num = 0;
    for (auto j : es.K) {
      const Vec& x = es.events[j].values;
      if (x[static_cast<Eigen::Index>(p.given)] >= b[static_cast<Eigen::Index>(p.given)]) {
        ++den;
        if (x[static_cast<Eigen::Index>(p.target)] >= b[static_cast<Eigen::Index>(p.target)]) ++num;
      }
    }
    if (den == 0) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(static_cast<double>(num) / static_cast<double>(den));
    }
  }
  return out;
}

std::vector<SitePair> all_pairs(std::size_t n_sites) {
  std::vector<SitePair> p;
  for (std::size_t i = 0; i < n_sites; ++i)
    for (std::size_t j = i + 1; j < n_sites; ++j) p.push_back({i, j});
  return p;
}

namespace {
DependenceModel with_params(const DependenceModel& base, const std::vector<std::string>& names, const Vec& z) {
  DependenceModel d = base;
  for (std::size_t k = 0; k < names.size(); ++k)
    set_parameter(d, names[k], from_unconstrained(base, names[k], z[static_cast<Eigen::Index>(k)]));
  return d;
}

Vec unconstrained_of(const DependenceModel& d, const std::vector<std::string>& names) {
  Vec z(static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k)
    z[static_cast<Eigen::Index>(k)] = to_unconstrained(d, names[k], get_parameter(d, names[k]));
  return z;
}

Vec natural_of(const DependenceModel& d, const std::vector<std::string>& names) {
  Vec t(static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) t[static_cast<Eigen::Index>(k)] = get_parameter(d, names[k]);
  return t;
}

void check_names(const DependenceModel& d, const std::vector<std::string>& names) {
  if (names.empty()) throw InvalidArgument("no free dependence parameters");
  const auto all = parameter_names(d);
  for (const auto& n : names)
    if (std::find(all.begin(), all.end(), n) == all.end())
      throw InvalidArgument("unknown dependence parameter '" + n + "' for this model");
}

// Multi-start Nelder-Mead in the unconstrained space.
optim::Result minimize_multistart(const std::function<double(const Vec&)>& f, const Vec& z0, double spread) {
  std::vector<Vec> starts{z0};
  for (Eigen::Index k = 0; k < z0.size(); ++k)
    for (double s : {-spread, spread}) {
      Vec z = z0;
      z[k] += s;
      starts.push_back(z);
    }
  optim::Options opt;
  opt.initial_step = 0.3;
  opt.f_tol = 1e-14;
  opt.x_tol = 1e-10;
  opt.max_evals = 6000;
  optim::Result best;
  int evals = 0;
  for (const auto& s : starts) {
    auto r = optim::nelder_mead(f, s, opt);
    evals += r.evals;
    if (r.value < best.value) best = r;
  }
  opt.initial_step = 0.05;
  auto polish = optim::nelder_mead(f, best.x, opt);
  evals += polish.evals;
  if (polish.value <= best.value) best = polish;
  best.evals = evals;
  return best;
}
}  // namespace

DependenceFit fit_dependence_ls(const SiteSet& sites, const std::vector<SitePair>& pairs,
                                const std::vector<std::optional<double>>& pihat, const DependenceModel& init,
                                const std::vector<std::string>& free_params, std::vector<double> weights) {
  if (pairs.size() != pihat.size()) throw InvalidArgument("pair list and extremogram values differ in length");
  if (weights.empty()) weights.assign(pairs.size(), 1.0);
  if (weights.size() != pairs.size()) throw InvalidArgument("weight count does not match the pair count");
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; }))
    throw InvalidArgument("least-squares weights are all zero");
  check_names(init, free_params);
  validate(init);

  struct Obs {
    std::size_t i, j;
    double pi, w;
  };
  std::vector<Obs> obs;
  double contrast = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!pihat[k] || !(weights[k] > 0.0)) continue;
    if (std::max(pairs[k].given, pairs[k].target) >= sites.size()) throw InvalidArgument("pair refers to an unknown site");
    obs.push_back({pairs[k].given, pairs[k].target, *pihat[k], weights[k]});
    contrast = std::max(contrast, std::abs(1.0 - *pihat[k]));
  }
  if (obs.size() < free_params.size()) throw InvalidArgument("fewer informative pairs than free parameters");
  if (contrast < 1e-8) throw NumericalError("no dependence contrast: all empirical extremogram values are 1");

  auto objective = [&](const Vec& z) {
    DependenceModel d;
    try {
      d = with_params(init, free_params, z);
      validate(d);
      double s = 0.0;
      for (const auto& o : obs) {
        const double e = o.pi - model_extremogram(d, sites[o.i], sites[o.j]);
        s += o.w * e * e;
      }
      return s;
    } catch (const Error&) {
      return kInf;
    }
  };
  const auto res = minimize_multistart(objective, unconstrained_of(init, free_params), 1.0);
  DependenceFit fit;
  fit.model = with_params(init, free_params, res.x);
  fit.names = free_params;
  fit.theta = natural_of(fit.model, free_params);
  fit.se = Vec::Constant(static_cast<Eigen::Index>(free_params.size()), kNaN);
  fit.objective = res.value;
  fit.evals = res.evals;
  fit.converged = res.converged;
  return fit;
}

// -- Brown-Resnick intensity -------------------------------------------------------

BrIntensity::BrIntensity(const Variogram& g, const SiteSet& sites, std::size_t anchor)
    : gamma_(variogram_matrix(g, sites)), anchor_(anchor) {
  init();
}

BrIntensity::BrIntensity(const Mat& gamma, std::size_t anchor) : gamma_(gamma), anchor_(anchor) { init(); }

void BrIntensity::init() {
  const auto L = gamma_.rows();
  if (L < 2) throw InvalidArgument("intensity needs at least two sites");
  if (static_cast<Eigen::Index>(anchor_) >= L) throw InvalidArgument("anchor index out of range");
  const auto a = static_cast<Eigen::Index>(anchor_);
  Mat S(L - 1, L - 1);
  gamma_ref_.resize(L - 1);
  for (Eigen::Index i = 0, p = 0; i < L; ++i) {
    if (i == a) continue;
    gamma_ref_[p] = gamma_(i, a);
    for (Eigen::Index j = 0, q = 0; j < L; ++j) {
      if (j == a) continue;
      S(p, q++) = gamma_(i, a) + gamma_(j, a) - gamma_(i, j);
    }
    ++p;
  }
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("intensity covariance is singular");
  const Mat Lf = llt.matrixL();
  const double logdet = 2.0 * Lf.diagonal().array().log().sum();
  if (!std::isfinite(logdet)) throw NumericalError("intensity covariance is singular");
  P_ = llt.solve(Mat::Identity(L - 1, L - 1));
  P_ = 0.5 * (P_ + P_.transpose());
  P_row_sum_ = P_.rowwise().sum();
  P_total_ = P_row_sum_.sum();
  log_norm_ = -0.5 * static_cast<double>(L - 1) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet;
}

IntensityEval BrIntensity::operator()(const Vec& y) const {
  const auto L = gamma_.rows();
  if (y.size() != L) throw InvalidArgument("intensity point has the wrong dimension");
  if ((y.array() <= 0.0).any() || !y.allFinite()) throw InvalidArgument("intensity needs strictly positive finite y");
  const auto a = static_cast<Eigen::Index>(anchor_);
  const double ya = y[a];
  Vec yt(L - 1);
  double sum_log = 0.0;
  for (Eigen::Index i = 0, p = 0; i < L; ++i) {
    if (i == a) continue;
    yt[p] = std::log(y[i] / ya) + gamma_ref_[p];
    sum_log += std::log(y[i]);
    ++p;
  }
  const Vec m = P_ * yt;
  const double msum = m.sum();
  IntensityEval out;
  out.log_lambda = -2.0 * std::log(ya) - sum_log + log_norm_ - 0.5 * yt.dot(m);
  out.grad.resize(L);
  out.hess_diag.resize(L);
  out.grad[a] = (-2.0 + msum) / ya;
  out.hess_diag[a] = (2.0 - msum - P_total_) / (ya * ya);
  for (Eigen::Index i = 0, p = 0; i < L; ++i) {
    if (i == a) continue;
    out.grad[i] = -(1.0 + m[p]) / y[i];
    out.hess_diag[i] = (1.0 + m[p] - P_(p, p)) / (y[i] * y[i]);
    ++p;
  }
  return out;
}

IntensityEval br_intensity(const Variogram& g, const SiteSet& sites, const Vec& y, std::size_t anchor) {
  return BrIntensity(g, sites, anchor)(y);
}

// -- standardized risk ---------------------------------------------------------------

StandardizedRisk::StandardizedRisk(RiskFunctional r, Vec A, double xi) : r_(std::move(r)), A_(std::move(A)), xi_(xi) {
  if ((A_.array() <= 0.0).any()) throw InvalidArgument("scale A must be positive");
  using K = RiskFunctional::Kind;
  if (r_.kind == K::SiteEval) {
    Vec c = Vec::Zero(A_.size());
    c[static_cast<Eigen::Index>(r_.site)] = 1.0;
    coef_ = c;
  } else if (r_.kind == K::WeightedMean || r_.kind == K::LinearCombination) {
    if (static_cast<Eigen::Index>(r_.weights.size()) != A_.size()) throw InvalidArgument("risk weights do not match A");
    coef_ = Eigen::Map<const Vec>(r_.weights.data(), A_.size());
  }
}

double StandardizedRisk::value(const Vec& y) const {
  if (coef_) {
    const Vec d = coef_->cwiseProduct(A_);
    if (xi_zero(xi_)) {
      double s = 0.0;
      for (Eigen::Index l = 0; l < y.size(); ++l)
        if (d[l] != 0.0) s += d[l] * std::log(y[l]);
      return std::exp(s);
    }
    double s = 0.0;
    for (Eigen::Index l = 0; l < y.size(); ++l)
      if (d[l] != 0.0) s += d[l] * std::pow(y[l], xi_);
    if (!(s > 0.0)) return xi_ > 0.0 ? 0.0 : kInf;
    return std::pow(s, 1.0 / xi_);
  }
  const double n1 = y.sum();
  if (!(n1 > 0.0)) return 0.0;
  const Vec w = y / n1;
  auto inside = [&](double t) {
    Vec v = t * w;
    Vec z = xi_zero(xi_) ? Vec(v.array().log().matrix()) : Vec(((v.array().pow(xi_) - 1.0) / xi_).matrix());
    return evaluate(r_, Vec(A_.cwiseProduct(z))) >= 0.0;
  };
  double hi = 1.0;
  while (!inside(hi)) {
    hi *= 2.0;
    if (hi > 1e15) return 0.0;
  }
  double lo = hi;
  do {
    lo *= 0.5;
    if (lo < 1e-15) return kInf;
  } while (inside(lo));
  for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-14; ++it) {
    const double mid = std::sqrt(lo * hi);
    (inside(mid) ? hi : lo) = mid;
  }
  return n1 / hi;
}

Vec StandardizedRisk::gradient(const Vec& y) const {
  const auto L = y.size();
  Vec g(L);
  if (coef_) {
    const double v = value(y);
    for (Eigen::Index l = 0; l < L; ++l) {
      const double d = (*coef_)[l] * A_[l];
      if (d == 0.0) {
        g[l] = 0.0;
      } else if (xi_zero(xi_)) {
        g[l] = v * d / y[l];
      } else {
        g[l] = std::pow(v, 1.0 - xi_) * d * std::pow(y[l], xi_ - 1.0);
      }
    }
    return g;
  }
  for (Eigen::Index l = 0; l < L; ++l) {
    const double h = 1e-6 * y[l];
    Vec yp = y, ym = y;
    yp[l] += h;
    ym[l] -= h;
    g[l] = (value(yp) - value(ym)) / (2.0 * h);
  }
  return g;
}

// -- gradient score ---------------------------------------------------------------------

namespace {
// theta-free parts of the score: weights and their derivatives per sample
struct ScoreData {
  std::vector<Vec> y;
  std::vector<Vec> w;
  std::vector<Vec> dw;
};

ScoreData prepare_score(const std::vector<Vec>& y, const StandardizedRisk& risk, double u) {
  ScoreData sd;
  sd.y = y;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Vec& yi = y[i];
    if ((yi.array() <= 0.0).any() || !yi.allFinite())
      throw InvalidArgument("sample " + std::to_string(i) + " has non-positive or non-finite values");
    const double g = risk.value(yi);
    if (!(g >= u * (1.0 - 1e-12)))
      throw InvalidArgument("sample " + std::to_string(i) + " lies outside the exceedance region");
    const Vec gg = risk.gradient(yi);
    const double fac = 1.0 - u / g;
    sd.w.push_back(yi * fac);
    sd.dw.push_back((Vec::Constant(yi.size(), fac) + yi.cwiseProduct(gg) * (u / (g * g))));
  }
  return sd;
}

double score_sum(const Mat& gamma, const std::vector<std::vector<std::size_t>>& subsets, const ScoreData& sd,
                 unsigned threads) {
  std::vector<double> part(subsets.size(), 0.0);
  parallel_for(subsets.size(), threads, [&](std::size_t s) {
    const auto& S = subsets[s];
    const auto m = static_cast<Eigen::Index>(S.size());
    Mat gs(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) gs(a, b) = gamma(static_cast<Eigen::Index>(S[a]), static_cast<Eigen::Index>(S[b]));
    const BrIntensity lam(gs, 0);
    Vec ys(m);
    double total = 0.0;
    for (std::size_t i = 0; i < sd.y.size(); ++i) {
      for (Eigen::Index k = 0; k < m; ++k) ys[k] = sd.y[i][static_cast<Eigen::Index>(S[k])];
      const auto ev = lam(ys);
      for (Eigen::Index k = 0; k < m; ++k) {
        const auto l = static_cast<Eigen::Index>(S[k]);
        const double w = sd.w[i][l], dw = sd.dw[i][l], d1 = ev.grad[k];
        total += 2.0 * w * dw * d1 + w * w * (ev.hess_diag[k] + 0.5 * d1 * d1);
      }
    }
    part[s] = total;
  });
  double s = 0.0;
  for (double v : part) s += v;
  return s;
}

const Variogram& br_variogram(const DependenceModel& d) {
  const auto* br = std::get_if<BrownResnick>(&d);
  if (!br) throw InvalidArgument("gradient scoring is implemented for Brown-Resnick models");
  return br->variogram;
}
}  // namespace

double gradient_score_value(const Variogram& g, const SiteSet& sites, const std::vector<std::vector<std::size_t>>& subsets,
                            const std::vector<Vec>& y, const StandardizedRisk& risk, double u) {
  const ScoreData sd = prepare_score(y, risk, u);
  return score_sum(variogram_matrix(g, sites), subsets, sd, 1);
}

ScoreValue gradient_score(const DependenceModel& dep, const std::vector<std::string>& free_params, const SiteSet& sites,
                          const std::vector<std::vector<std::size_t>>& subsets, const std::vector<Vec>& y,
                          const StandardizedRisk& risk, double u) {
  check_names(dep, free_params);
  const ScoreData sd = prepare_score(y, risk, u);
  auto at = [&](const DependenceModel& d) { return score_sum(variogram_matrix(br_variogram(d), sites), subsets, sd, 1); };
  ScoreValue out;
  out.value = at(dep);
  out.grad.resize(static_cast<Eigen::Index>(free_params.size()));
  for (std::size_t k = 0; k < free_params.size(); ++k) {
    const double th = get_parameter(dep, free_params[k]);
    const double h = 1e-5 * (1.0 + std::abs(th));
    DependenceModel dp = dep, dm = dep;
    set_parameter(dp, free_params[k], th + h);
    set_parameter(dm, free_params[k], th - h);
    out.grad[static_cast<Eigen::Index>(k)] = (at(dp) - at(dm)) / (2.0 * h);
  }
  return out;
}

std::vector<std::vector<std::size_t>> draw_subsets(std::size_t n_sites, std::size_t count, std::size_t size,
                                                   std::uint64_t seed) {
  if (n_sites < 2) throw InvalidArgument("subsets need at least two sites");
  if (size < 2) throw InvalidArgument("subset size must be at least 2");
  if (count == 0) throw InvalidArgument("subset count must be positive");
  std::vector<std::size_t> all(n_sites);
  std::iota(all.begin(), all.end(), 0);
  if (size >= n_sites) return {all};
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng(seed, 0x50b5e7000ULL + k);
    std::vector<std::size_t> idx = all;
    for (std::size_t i = 0; i < size; ++i) {
      const auto j = i + std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_sites - i)), n_sites - i - 1);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    out.push_back(std::move(idx));
  }
  return out;
}

DependenceFit fit_dependence_score(const std::vector<Vec>& y, const SiteSet& sites, const StandardizedRisk& risk,
                                   const DependenceModel& init, const std::vector<std::string>& free_params,
                                   const ScoreOptions& opt) {
  br_variogram(init);
  check_names(init, free_params);
  if (y.empty()) throw InvalidArgument("gradient scoring needs at least one exceedance");
  const auto subsets = draw_subsets(sites.size(), opt.n_subsets, std::min(opt.subset_size, sites.size()), opt.seed);
  const ScoreData sd = prepare_score(y, risk, opt.u);
  auto objective = [&](const Vec& z) {
    try {
      const DependenceModel d = with_params(init, free_params, z);
      validate(d);
      return score_sum(variogram_matrix(br_variogram(d), sites), subsets, sd, opt.threads);
    } catch (const Error&) {
      return kInf;
    }
  };
  optim::Options o;
  o.initial_step = 0.3;
  o.f_tol = 1e-12;
  o.x_tol = 1e-8;
  const auto res = optim::nelder_mead(objective, unconstrained_of(init, free_params), o);
  if (!std::isfinite(res.value)) throw NumericalError("gradient score is not finite near the starting values");
  DependenceFit fit;
  fit.model = with_params(init, free_params, res.x);
  fit.names = free_params;
  fit.theta = natural_of(fit.model, free_params);
  fit.se = Vec::Constant(static_cast<Eigen::Index>(free_params.size()), kNaN);
  fit.objective = res.value;
  fit.evals = res.evals;
  fit.converged = res.converged;
  fit.subsets = subsets;
  fit.seed = opt.seed;
  return fit;
}

std::vector<Vec> standardize_events(const ExceedanceSet& es, const MarginalModel& mm) {
  std::vector<Vec> out;
  out.reserve(es.K.size());
  for (auto j : es.K) {
    const Vec& x = es.events[j].values;
    Vec y(x.size());
    for (Eigen::Index l = 0; l < x.size(); ++l) {
      const double z = (x[l] - mm.b[l]) / mm.a[l];
      double v;
      if (xi_zero(mm.xi)) {
        v = std::exp(z);
      } else {
        const double t = 1.0 + mm.xi * z;
        v = t > 0.0 ? std::pow(t, 1.0 / mm.xi) : (mm.xi > 0.0 ? 0.0 : kInf);
      }
      y[l] = std::max(v, 1e-12);
    }
    out.push_back(std::move(y));
  }
  return out;
}

// -- Poisson likelihood -------------------------------------------------------------------

LambdaEstimate exceedance_mass(const DependenceModel& dep, const SiteSet& sites, const StandardizedRisk& risk, double u,
                               std::size_t draws, std::uint64_t seed, unsigned threads) {
  if (draws < 2) throw InvalidArgument("Monte Carlo mass needs at least two draws");
  if (!(u > 0.0)) throw InvalidArgument("risk threshold must be positive");
  const AngularSampler sampler(dep, sites);
  std::vector<double> g(draws);
  parallel_for(draws, threads, [&](std::size_t i) {
    Rng rng(seed, 0x1a3b0000000ULL + i);
    g[i] = risk.value(sampler.sample(rng));
  });
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(draws);
  double ss = 0.0;
  for (double v : g) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(draws - 1));
  LambdaEstimate est;
  est.mass = sampler.norm_mass() * mean / u;
  est.se = sampler.norm_mass() * sd / std::sqrt(static_cast<double>(draws)) / u;
  if (!(est.mass > 0.0) || est.se > 0.1 * est.mass)
    throw NumericalError("Monte Carlo relative error of the exceedance mass exceeds 10%; increase the number of draws");
  return est;
}

double poisson_loglik(const BrownResnick& dep, const SiteSet& sites, const std::vector<Vec>& y, const LambdaEstimate& mass) {
  const BrIntensity lam(dep.variogram, sites, 0);
  const double n = static_cast<double>(y.size());
  const double logm = std::log(mass.mass);
  double s = n * logm - mass.mass;
  for (const auto& yi : y) s += lam(yi).log_lambda - logm;
  return s;
}

DependenceFit fit_dependence_poisson(const std::vector<Vec>& y, const SiteSet& sites, const StandardizedRisk& risk,
                                     const DependenceModel& init, const std::vector<std::string>& free_params, double u,
                                     std::size_t mc_draws, std::uint64_t seed, unsigned threads) {
  br_variogram(init);
  check_names(init, free_params);
  if (y.empty()) throw InvalidArgument("Poisson likelihood needs at least one exceedance");
  for (std::size_t i = 0; i < y.size(); ++i)
    if (risk.value(y[i]) < u * (1.0 - 1e-12))
      throw InvalidArgument("sample " + std::to_string(i) + " lies outside the exceedance region");
  auto nll_model = [&](const DependenceModel& d) {
    const auto m = exceedance_mass(d, sites, risk, u, mc_draws, seed, threads);
    return -poisson_loglik(std::get<BrownResnick>(d), sites, y, m);
  };
  auto objective = [&](const Vec& z) {
    try {
      const DependenceModel d = with_params(init, free_params, z);
      validate(d);
      return nll_model(d);
    } catch (const Error&) {
      return kInf;
    }
  };
  optim::Options o;
  o.initial_step = 0.3;
  o.f_tol = 1e-12;
  o.x_tol = 1e-8;
  const auto res = optim::nelder_mead(objective, unconstrained_of(init, free_params), o);
  if (!std::isfinite(res.value)) throw NumericalError("Poisson likelihood is not finite near the starting values");
  DependenceFit fit;
  fit.model = with_params(init, free_params, res.x);
  fit.names = free_params;
  fit.theta = natural_of(fit.model, free_params);
  fit.objective = res.value;
  fit.evals = res.evals;
  fit.converged = res.converged;
  fit.seed = seed;
  const auto m = exceedance_mass(fit.model, sites, risk, u, mc_draws, seed, threads);
  fit.lambda_mass = m.mass;
  fit.lambda_se = m.se;
  auto nll_natural = [&](const Vec& th) {
    DependenceModel d = fit.model;
    try {
      for (std::size_t k = 0; k < free_params.size(); ++k) set_parameter(d, free_params[k], th[static_cast<Eigen::Index>(k)]);
      validate(d);
      return nll_model(d);
    } catch (const Error&) {
      return kInf;
    }
  };
  const Mat h = optim::numerical_hessian(nll_natural, fit.theta, 1e-3);
  fit.se = Vec::Constant(fit.theta.size(), kNaN);
  Eigen::LLT<Mat> llt(h);
  if (llt.info() == Eigen::Success) {
    const Mat cov = llt.solve(Mat::Identity(h.rows(), h.cols()));
    fit.se = cov.diagonal().cwiseSqrt();
  }
  return fit;
}

// -- iterative refinement ---------------------------------------------------------------

RefinementResult iterative_refinement(const std::vector<FieldObservation>& events, const RiskFunctional& r,
                                      const RiskFunctional& r_refined, double u_n, bool storm_weights,
                                      std::size_t max_iter) {
  if (!r.linear) throw InvalidArgument("iterative refinement calibrates margins with a linear functional");
  RefinementResult out;
  out.exceedances = make_exceedance_set(events, r, u_n);
  const auto initial = out.exceedances.K;
  const auto n_u = initial.size();
  std::vector<std::vector<std::size_t>> history{initial};
  auto sym_diff = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::vector<std::size_t> d;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(d));
    return d.size();
  };
  auto trace_text = [&] {
    std::string s;
    for (std::size_t k = 0; k < out.trace.size(); ++k)
      s += " [" + std::to_string(k) + ": changed " + std::to_string(out.trace[k].changed_from_previous) + "]";
    return s;
  };
  for (std::size_t it = 0; it < max_iter; ++it) {
    out.margins = fit_margins(out.exceedances, r, storm_weights);
    const auto& mm = out.margins;
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t j = 0; j < events.size(); ++j) {
      const Vec& x = events[j].values;
      Vec s(x.size());
      for (Eigen::Index l = 0; l < x.size(); ++l) {
        const double z = (x[l] - mm.b[l]) / mm.a[l];
        // standardized field A (y^xi - 1)/xi with y floored at zero
        const double zz = (mm.xi > 0.0 && !xi_zero(mm.xi)) ? std::max(z, -1.0 / mm.xi) : z;
        s[l] = mm.A[l] * zz;
      }
      scored.emplace_back(evaluate(r_refined, s), j);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> next;
    for (std::size_t k = 0; k < n_u; ++k) next.push_back(scored[k].second);
    std::sort(next.begin(), next.end());
    RefinementStep step;
    step.n_exceedances = next.size();
    step.changed_from_previous = sym_diff(next, out.exceedances.K);
    step.changed_from_initial = sym_diff(next, initial);
    out.trace.push_back(step);
    if (next == out.exceedances.K) {
      out.converged = true;
      return out;
    }
    if (std::find(history.begin(), history.end(), next) != history.end())
      throw NumericalError("iterative refinement oscillates between exceedance sets:" + trace_text());
    history.push_back(next);
    out.exceedances.K = std::move(next);
  }
  throw NumericalError("iterative refinement did not converge within " + std::to_string(max_iter) +
                       " iterations:" + trace_text());
}

// -- resampling --------------------------------------------------------------------------

Vec resample_se(std::size_t n_events, const std::function<Vec(const std::vector<std::size_t>&)>& estimator,
                ResampleScheme scheme, std::size_t B, std::uint64_t seed, unsigned threads) {
  if (n_events < 2) throw InvalidArgument("resampling needs at least two events");
  const bool jack = scheme == ResampleScheme::Jackknife;
  if (!jack && B < 20) throw InvalidArgument("bootstrap needs at least 20 replicates");
  const std::size_t reps = jack ? n_events : B;
  std::vector<std::optional<Vec>> est(reps);
  parallel_for(reps, threads, [&](std::size_t k) {
    std::vector<std::size_t> idx;
    idx.reserve(n_events);
    if (jack) {
      for (std::size_t i = 0; i < n_events; ++i)
        if (i != k) idx.push_back(i);
    } else {
      Rng rng(seed, 0xb0075000000ULL + k);
      for (std::size_t i = 0; i < n_events; ++i)
        idx.push_back(std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n_events)), n_events - 1));
    }
    try {
      est[k] = estimator(idx);
    } catch (const Error&) {
      est[k].reset();
    }
  });
  std::vector<Vec> ok;
  for (auto& e : est)
    if (e) ok.push_back(*e);
  if (static_cast<double>(reps - ok.size()) > 0.1 * static_cast<double>(reps))
    throw NumericalError("more than 10% of resampling refits failed");
  const auto m = static_cast<double>(ok.size());
  Vec mean = Vec::Zero(ok.front().size());
  for (const auto& v : ok) mean += v;
  mean /= m;
  Vec ss = Vec::Zero(mean.size());
  for (const auto& v : ok) ss += (v - mean).cwiseAbs2();
  if (jack) return (ss * ((m - 1.0) / m)).cwiseSqrt();
  return (ss / (m - 1.0)).cwiseSqrt();
}

}  // namespace fpot
