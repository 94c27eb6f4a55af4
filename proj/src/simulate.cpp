#include "fpot/simulate.hpp"

#include "fpot/gpd.hpp"
#include "fpot/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fpot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kMaxProposalsPerSample = 1'000'000;

bool xi_zero(double xi) { return std::abs(xi) < gpd::kXiZero; }

// (y^xi - 1)/xi elementwise, log y for xi = 0
Vec box_cox(const Vec& y, double xi) {
  if (xi_zero(xi)) return y.array().log().matrix();
  return ((y.array().pow(xi) - 1.0) / xi).matrix();
}

// coefficients c with r(x) = c.x for linear r
std::optional<Vec> linear_coefficients(const RiskFunctional& r, Eigen::Index n) {
  using K = RiskFunctional::Kind;
  if (r.kind == K::SiteEval) {
    Vec c = Vec::Zero(n);
    c[static_cast<Eigen::Index>(r.site)] = 1.0;
    return c;
  }
  if (r.kind == K::WeightedMean || r.kind == K::LinearCombination) {
    if (static_cast<Eigen::Index>(r.weights.size()) != n) throw InvalidArgument("risk weights do not match the site count");
    return Eigen::Map<const Vec>(r.weights.data(), n);
  }
  return std::nullopt;
}
}  // namespace

ProcessSpec ProcessSpec::make(double xi, Vec a, Vec b, RiskFunctional r, DependenceModel dep, SiteSet sites) {
  ProcessSpec s;
  s.xi = xi;
  s.a = std::move(a);
  s.b = std::move(b);
  s.r = std::move(r);
  s.dep = std::move(dep);
  s.sites = std::move(sites);
  if (s.a.size() != static_cast<Eigen::Index>(s.sites.size()))
    throw InvalidArgument("scale vector a must have one entry per site");
  const double ra = evaluate(s.r, s.a);
  if (!(ra > 0.0)) throw InvalidArgument("r(a) must be positive");
  s.A = s.a / ra;
  s.validate();
  return s;
}

double ProcessSpec::risk_scale() const { return evaluate(r, a); }

void ProcessSpec::validate() const {
  const auto n = static_cast<Eigen::Index>(sites.size());
  if (n == 0) throw InvalidArgument("process needs at least one site");
  if (a.size() != n || b.size() != n || A.size() != n)
    throw InvalidArgument("a, b and A must have one entry per site");
  if ((a.array() <= 0.0).any()) throw InvalidArgument("scale a must be positive at every site");
  if (!std::isfinite(xi)) throw InvalidArgument("tail index must be finite");
  fpot::validate(dep);
  if (r.linear && std::abs(evaluate(r, A) - 1.0) > 1e-10) throw InvalidArgument("linear risk requires r(A) = 1");
  const auto rep = check_validity(r, xi, A);
  if (rep.status == Validity::Invalid) throw InvalidArgument("risk functional is not valid for this tail index: " + rep.diagnostic);
}

Vec standardized_field(const ProcessSpec& spec, const Vec& y) { return spec.A.cwiseProduct(box_cox(y, spec.xi)); }

Vec to_process_scale(const ProcessSpec& spec, const Vec& y) { return spec.a.cwiseProduct(box_cox(y, spec.xi)) + spec.b; }

Vec from_process_scale(const ProcessSpec& spec, const Vec& x) {
  Vec z = (x - spec.b).cwiseQuotient(spec.a);
  if (xi_zero(spec.xi)) return z.array().exp().matrix();
  Vec y(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double t = 1.0 + spec.xi * z[i];
    y[i] = t > 0.0 ? std::pow(t, 1.0 / spec.xi) : (spec.xi > 0.0 ? 0.0 : kInf);
  }
  return y;
}

Vec transform_T(const ProcessSpec& spec, const Vec& x) {
  const double ra = spec.risk_scale();
  Vec z = (x - spec.b) / ra;
  if (xi_zero(spec.xi)) return z.array().exp().matrix();
  Vec y(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double t = 1.0 + spec.xi * z[i];
    y[i] = t > 0.0 ? std::pow(t, 1.0 / spec.xi) : (spec.xi > 0.0 ? 0.0 : kInf);
  }
  return y;
}

Vec transform_T_inverse(const ProcessSpec& spec, const Vec& y) {
  if ((y.array() < 0.0).any()) throw InvalidArgument("transform inverse needs non-negative input");
  if (spec.xi <= 0.0 && (y.array() == 0.0).any())
    throw InvalidArgument("transform inverse needs strictly positive input for xi <= 0");
  Vec z = box_cox(y, spec.xi);
  if (spec.xi > 0.0 && !xi_zero(spec.xi)) z = z.cwiseMax(Vec(-spec.A / spec.xi));
  return spec.b + spec.risk_scale() * z;
}

std::optional<double> ray_root(const ProcessSpec& spec, const Vec& w) {
  const double xi = spec.xi;
  if (auto c = linear_coefficients(spec.r, w.size())) {
    if (xi_zero(xi)) {
      const double s = evaluate(spec.r, standardized_field(spec, w));
      if (s == -kInf || std::isnan(s)) return std::nullopt;
      return std::exp(-s);
    }
    const double s = evaluate(spec.r, Vec(spec.A.cwiseProduct(w.array().pow(xi).matrix())));
    if (std::isnan(s) || std::isinf(s)) return std::nullopt;
    if (xi > 0.0) {
      if (s <= 0.0) return std::nullopt;
      return std::pow(s, -1.0 / xi);
    }
    if (s <= 0.0) return 0.0;
    return std::pow(s, -1.0 / xi);
  }
  auto inside = [&](double t) {
    const double v = evaluate(spec.r, standardized_field(spec, Vec(t * w)));
    return v >= 0.0;
  };
  double hi = 1.0;
  while (!inside(hi)) {
    hi *= 2.0;
    if (hi > 1e15) return std::nullopt;
  }
  double lo = hi;
  do {
    lo *= 0.5;
    if (lo < 1e-15) return 0.0;
  } while (inside(lo));
  for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-13; ++it) {
    const double mid = std::sqrt(lo * hi);
    (inside(mid) ? hi : lo) = mid;
  }
  return hi;
}

SimBound sim_bound(const ProcessSpec& spec, std::size_t n_directions, double safety, std::uint64_t seed) {
  if (!(safety > 0.0 && safety <= 1.0)) throw InvalidArgument("safety factor must lie in (0, 1]");
  const auto L = static_cast<Eigen::Index>(spec.sites.size());
  double best = kInf;
  auto consider = [&](const Vec& w) {
    if (auto t = ray_root(spec, w)) best = std::min(best, *t);
  };
  for (Eigen::Index l = 0; l < L; ++l) consider(Vec::Unit(L, l));
  Rng rng(seed, 0x5b0u);
  for (std::size_t k = 0; k < n_directions; ++k) {
    Vec w(L);
    for (Eigen::Index l = 0; l < L; ++l) w[l] = rng.exponential();
    consider(w / w.sum());
  }
  if (!std::isfinite(best)) throw InvalidArgument("r-exceedance set empty: no ray enters the exceedance region");
  if (!(best > 0.0)) throw InvalidArgument("r-exceedance set is not bounded away from the origin");
  return {safety * best, SimBound::Method::NumericRay, n_directions, safety};
}

std::optional<SimBound> sim_bound_closed_form(const ProcessSpec& spec) {
  if (!spec.r.linear || !spec.r.monotone) return std::nullopt;
  const auto c = linear_coefficients(spec.r, spec.A.size());
  if (!c) return std::nullopt;
  const Vec d = c->cwiseProduct(spec.A);
  const double xi = spec.xi;
  double t;
  if (xi_zero(xi)) {
    double ent = 0.0;
    for (Eigen::Index l = 0; l < d.size(); ++l)
      if (d[l] > 0.0) ent += d[l] * std::log(d[l]);
    t = std::exp(-ent);
  } else if (xi >= 1.0) {
    t = std::pow(d.maxCoeff(), -1.0 / xi);
  } else {
    double S = 0.0;
    for (Eigen::Index l = 0; l < d.size(); ++l)
      if (d[l] > 0.0) S += std::pow(d[l], 1.0 / (1.0 - xi));
    t = std::pow(S, -(1.0 - xi) / xi);
  }
  return SimBound{t, SimBound::Method::ClosedForm, 0, 1.0};
}

namespace {
// Draws one accepted standardized sample; returns (Y, W, proposals).
struct Stage1 {
  Vec y;
  Vec w;
  std::uint64_t proposals = 0;
};

Stage1 draw_exceedance(const ProcessSpec& spec, const AngularSampler& sampler, double u, Rng& rng) {
  Stage1 s;
  while (true) {
    if (++s.proposals > kMaxProposalsPerSample)
      throw NumericalError("acceptance rate below 1e-5 after 10^6 proposals; use a larger bound u or a different functional");
    const double R = rng.unit_pareto();
    Vec w = sampler.sample(rng);
    Vec y = (u * R) * w;
    if (evaluate(spec.r, standardized_field(spec, y)) >= 0.0) {
      s.y = std::move(y);
      s.w = std::move(w);
      return s;
    }
  }
}

void finish_rate(SimResult& res, std::size_t n) {
  res.accept_rate = res.proposals ? static_cast<double>(n) / static_cast<double>(res.proposals) : 0.0;
  if (res.proposals >= kMaxProposalsPerSample && res.accept_rate < 1e-5)
    throw NumericalError("acceptance rate below 1e-5 after 10^6 proposals; use a larger bound u or a different functional");
}
}  // namespace

SimResult simulate_alg1(const ProcessSpec& spec, const SimBound& bound, std::size_t n, const SimOptions& opt) {
  spec.validate();
  if (!(bound.u > 0.0)) throw InvalidArgument("simulation bound u must be positive");
  AngularSampler sampler(spec.dep, spec.sites);
  SimResult res;
  res.samples.resize(n);
  if (opt.keep_standardized) res.standardized.resize(n);
  std::vector<std::uint64_t> props(n, 0);
  std::vector<double> margin(n, kInf);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, i);
    Stage1 s = draw_exceedance(spec, sampler, bound.u, rng);
    props[i] = s.proposals;
    if (opt.audit)
      if (auto t = ray_root(spec, s.w)) margin[i] = *t / bound.u;
    res.samples[i] = to_process_scale(spec, s.y);
    if (opt.keep_standardized) res.standardized[i] = std::move(s.y);
  });
  for (std::size_t i = 0; i < n; ++i) {
    res.proposals += props[i];
    res.min_margin = std::min(res.min_margin, margin[i]);
  }
  finish_rate(res, n);
  return res;
}

SimResult simulate_alg2(const ProcessSpec& spec, std::optional<double> risk_level, std::size_t n, const SimOptions& opt) {
  spec.validate();
  if (!spec.r.linear) throw InvalidArgument("two-stage simulation needs a linear risk functional");
  const double ra = spec.risk_scale();
  const double rb = evaluate(spec.r, spec.b);
  const double xi = spec.xi;
  double fixed = 0.0;  // R2^xi (xi != 0) or log R2 (xi = 0)
  if (risk_level) {
    const double rho = *risk_level;
    if (rho < rb) throw InvalidArgument("risk level lies below r(b)");
    if (xi_zero(xi)) {
      fixed = (rho - rb) / ra;
    } else {
      fixed = 1.0 + xi * (rho - rb) / ra;
      if (!(fixed > 0.0)) throw InvalidArgument("risk level lies above the upper endpoint r(b) - r(a)/xi");
    }
  }
  SimBound bound;
  if (auto cf = sim_bound_closed_form(spec)) {
    bound = *cf;
  } else {
    bound = sim_bound(spec, 2000, 0.9, opt.seed);
  }
  AngularSampler sampler(spec.dep, spec.sites);
  SimResult res;
  res.samples.resize(n);
  if (opt.keep_standardized) res.standardized.resize(n);
  std::vector<std::uint64_t> props(n, 0);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, i);
    Stage1 s = draw_exceedance(spec, sampler, bound.u, rng);
    props[i] = s.proposals;
    Vec p;
    if (xi_zero(xi)) {
      const Vec ly = s.y.array().log().matrix();
      const double sr = evaluate(spec.r, Vec(spec.A.cwiseProduct(ly)));
      const double log_r2 = risk_level ? fixed : rng.exponential();
      p = spec.a.cwiseProduct((ly.array() - sr + log_r2).matrix()) + spec.b;
    } else {
      Vec v = spec.A.cwiseProduct(s.y.array().pow(xi).matrix());
      const Vec w2 = v / v.sum();
      const double rw2 = evaluate(spec.r, w2);
      const double r2xi = risk_level ? fixed : std::pow(rng.unit_pareto(), xi);
      p = (ra / xi * r2xi / rw2) * w2 + spec.b - spec.a / xi;
    }
    res.samples[i] = std::move(p);
    if (opt.keep_standardized) res.standardized[i] = std::move(s.y);
  });
  for (auto v : props) res.proposals += v;
  finish_rate(res, n);
  res.min_margin = 1.0;
  return res;
}

// -- conditional storms --------------------------------------------------------

namespace {
struct SliceStep {
  std::vector<Eigen::Index> idx;   // sites of this slice (anchor excluded)
  std::vector<Eigen::Index> cond;  // previously drawn sites (anchor excluded)
  Mat K;                           // conditional mean coefficients
  Mat chol;                        // conditional covariance factor
};

struct AnchorPlan {
  Eigen::Index anchor = 0;
  std::vector<SliceStep> steps;  // centre first
};

AnchorPlan plan_anchor(const Mat& gamma, Eigen::Index anchor, const std::vector<std::vector<Eigen::Index>>& order) {
  const auto N = gamma.rows();
  Mat sigma(N, N);
  for (Eigen::Index i = 0; i < N; ++i)
    for (Eigen::Index j = 0; j < N; ++j) sigma(i, j) = gamma(i, anchor) + gamma(j, anchor) - gamma(i, j);
  AnchorPlan plan;
  plan.anchor = anchor;
  std::vector<Eigen::Index> drawn;
  for (const auto& slice : order) {
    SliceStep st;
    for (auto i : slice)
      if (i != anchor) st.idx.push_back(i);
    st.cond = drawn;
    const auto m = static_cast<Eigen::Index>(st.idx.size());
    const auto d = static_cast<Eigen::Index>(st.cond.size());
    Mat s_kk(m, m), s_kd(m, d);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) s_kk(a, b) = sigma(st.idx[a], st.idx[b]);
      for (Eigen::Index b = 0; b < d; ++b) s_kd(a, b) = sigma(st.idx[a], st.cond[b]);
    }
    Mat cov = s_kk;
    if (d > 0) {
      Mat s_dd(d, d);
      for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) s_dd(a, b) = sigma(st.cond[a], st.cond[b]);
      const Mat l = psd_cholesky(s_dd);
      // K = s_kd s_dd^{-1}
      Mat tmp = l.triangularView<Eigen::Lower>().solve(s_kd.transpose());
      Mat kt = l.transpose().triangularView<Eigen::Upper>().solve(tmp);
      st.K = kt.transpose();
      cov -= st.K * s_kd.transpose();
      cov = 0.5 * (cov + cov.transpose());
    }
    st.chol = psd_cholesky(cov);
    for (auto i : st.idx) drawn.push_back(i);
    plan.steps.push_back(std::move(st));
  }
  return plan;
}
}  // namespace

StormResult simulate_storm_conditional(const StormSpec& spec, std::size_t n, const SimOptions& opt) {
  if (!spec.sites.has_time()) throw InvalidArgument("storm simulation needs sites with a time coordinate");
  if (!spec.r.linear) throw InvalidArgument("storm simulation needs a linear spatial risk functional");
  const auto N = static_cast<Eigen::Index>(spec.sites.size());
  if (spec.a.size() != N || spec.b.size() != N) throw InvalidArgument("a and b must have one entry per space-time site");
  if ((spec.a.array() <= 0.0).any()) throw InvalidArgument("scale a must be positive at every site");
  spec.dep.variogram.validate();

  const auto times = spec.sites.times();
  std::vector<std::vector<Eigen::Index>> slices;
  std::size_t centre_pos = times.size();
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<Eigen::Index> idx;
    for (auto i : spec.sites.slice(times[k])) idx.push_back(static_cast<Eigen::Index>(i));
    slices.push_back(std::move(idx));
    if (std::abs(times[k] - spec.centre_time) < 1e-9) centre_pos = k;
  }
  if (centre_pos == times.size()) throw InvalidArgument("centre time is not one of the design's time slices");
  const auto Ls = slices[centre_pos].size();
  for (const auto& s : slices)
    if (s.size() != Ls) throw InvalidArgument("every time slice must contain the same number of sites");

  // conditioning order: centre, then backwards in time, then forwards
  std::vector<std::size_t> order_pos{centre_pos};
  for (std::size_t k = centre_pos; k-- > 0;) order_pos.push_back(k);
  for (std::size_t k = centre_pos + 1; k < times.size(); ++k) order_pos.push_back(k);
  std::vector<std::vector<Eigen::Index>> order;
  for (auto k : order_pos) order.push_back(slices[k]);

  auto gather = [](const Vec& v, const std::vector<Eigen::Index>& idx) {
    Vec out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[idx[i]];
    return out;
  };

  const auto& centre = slices[centre_pos];
  std::vector<Site> csites;
  for (auto i : centre) csites.push_back(spec.sites[static_cast<std::size_t>(i)]);
  const ProcessSpec cspec =
      ProcessSpec::make(spec.xi, gather(spec.a, centre), gather(spec.b, centre), spec.r, spec.dep, SiteSet(csites));
  const double ra = cspec.risk_scale();
  SimBound bound = sim_bound_closed_form(cspec).value_or(SimBound{});
  if (bound.method != SimBound::Method::ClosedForm) bound = sim_bound(cspec, 2000, 0.9, opt.seed);

  const Mat gamma = variogram_matrix(spec.dep.variogram, spec.sites);
  std::vector<AnchorPlan> plans(centre.size());
  parallel_for(centre.size(), opt.threads, [&](std::size_t j) { plans[j] = plan_anchor(gamma, centre[j], order); });

  StormResult res;
  res.samples.resize(n);
  res.centre_risk.resize(n);
  std::vector<std::uint64_t> props(n, 0), rejects(n, 0);
  const double xi = spec.xi;
  parallel_for(n, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, i);
    Vec g(N), y(N), p(N);
    while (true) {
      if (props[i] + rejects[i] > kMaxProposalsPerSample)
        throw NumericalError("storm rejection rate above 0.9999; the centre slice rarely carries the peak");
      ++props[i];
      const auto pick = std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(centre.size())),
                                 centre.size() - 1);
      const AnchorPlan& plan = plans[pick];
      const Eigen::Index j = plan.anchor;
      const double R = rng.unit_pareto();
      g[j] = 0.0;
      const auto& c0 = plan.steps.front();
      {
        Vec z(static_cast<Eigen::Index>(c0.idx.size()));
        for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
        Vec gc = c0.chol.triangularView<Eigen::Lower>() * z;
        for (std::size_t k = 0; k < c0.idx.size(); ++k) g[c0.idx[k]] = gc[static_cast<Eigen::Index>(k)];
      }
      double qsum = 0.0;
      for (auto l : centre) qsum += std::exp(g[l] - gamma(l, j));
      const double scale = bound.u * R / qsum;
      auto fill_slice = [&](const std::vector<Eigen::Index>& idx) {
        Vec pk(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const auto l = idx[k];
          y[l] = scale * std::exp(g[l] - gamma(l, j));
          const double z = xi_zero(xi) ? std::log(y[l]) : (std::pow(y[l], xi) - 1.0) / xi;
          p[l] = spec.a[l] * z + spec.b[l];
          pk[static_cast<Eigen::Index>(k)] = p[l];
        }
        return pk;
      };
      Vec pc = fill_slice(centre);
      const double rc = evaluate(spec.r, pc);
      // exceedance test on the standardized scale: r((P - b)/r(a)) >= 0
      if (evaluate(spec.r, Vec((pc - cspec.b) / ra)) < 0.0) continue;
      bool ok = true;
      for (std::size_t s = 1; s < plan.steps.size() && ok; ++s) {
        const auto& st = plan.steps[s];
        Vec z(static_cast<Eigen::Index>(st.idx.size()));
        for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
        Vec gk = st.chol.triangularView<Eigen::Lower>() * z;
        if (!st.cond.empty()) gk += st.K * gather(g, st.cond);
        for (std::size_t k = 0; k < st.idx.size(); ++k) g[st.idx[k]] = gk[static_cast<Eigen::Index>(k)];
        const auto& full = order[s];
        if (evaluate(spec.r, fill_slice(full)) > rc) ok = false;
      }
      if (!ok) {
        ++rejects[i];
        continue;
      }
      res.samples[i] = p;
      res.centre_risk[i] = rc;
      return;
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    res.proposals += props[i];
    res.storm_rejections += rejects[i];
  }
  res.accept_rate = res.proposals ? static_cast<double>(n) / static_cast<double>(res.proposals) : 0.0;
  const double stage2 = static_cast<double>(res.storm_rejections) / static_cast<double>(res.storm_rejections + n);
  if (n > 0 && stage2 > 0.9999) throw NumericalError("storm rejection rate above 0.9999");
  return res;
}

// -- max-stable oracle ---------------------------------------------------------

Vec max_stable_oracle(const ProcessSpec& spec, const AngularSampler& sampler, Rng& rng) {
  const auto L = static_cast<Eigen::Index>(spec.sites.size());
  if (L > 5) throw InvalidArgument("max-stable oracle is limited to at most 5 sites");
  const double mass = sampler.norm_mass();
  Vec m = Vec::Zero(L);
  double gam = 0.0;
  for (std::size_t k = 0; k < 1'000'000; ++k) {
    gam += rng.exponential();
    const double R = mass / gam;
    if (R <= m.minCoeff()) return to_process_scale(spec, m);
    m = m.cwiseMax(Vec(R * sampler.sample(rng)));
  }
  throw NumericalError("max-stable oracle did not terminate within 10^6 Poisson points");
}

std::vector<Vec> max_stable_oracle(const ProcessSpec& spec, std::size_t n_replicates, const SimOptions& opt) {
  spec.validate();
  AngularSampler sampler(spec.dep, spec.sites);
  std::vector<Vec> out(n_replicates);
  parallel_for(n_replicates, opt.threads, [&](std::size_t i) {
    Rng rng(opt.seed, i);
    out[i] = max_stable_oracle(spec, sampler, rng);
  });
  return out;
}

}  // namespace fpot
