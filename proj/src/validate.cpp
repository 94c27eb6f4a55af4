#include "fpot/validate.hpp"

#include "fpot/angular.hpp"
#include "fpot/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fpot {

QQReport qq_gpd(const std::vector<double>& values, const gpd::GpdParams& p, std::size_t m, double level,
                const std::optional<Mat>& param_cov, std::uint64_t seed, unsigned threads) {
  if (values.size() < 5) throw InvalidArgument("QQ report needs at least 5 values");
  if (m < 200) throw InvalidArgument("QQ bands need at least 200 replicates");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("band level must lie in (0, 1)");
  Mat chol;
  if (param_cov) {
    if (param_cov->rows() != 2 || param_cov->cols() != 2) throw InvalidArgument("parameter covariance must be 2x2");
    chol = psd_cholesky(*param_cov);
  }
  const auto n = values.size();
  QQReport rep;
  rep.level = level;
  rep.empirical = values;
  std::sort(rep.empirical.begin(), rep.empirical.end());
  for (std::size_t i = 0; i < n; ++i)
    rep.model.push_back(gpd::quantile(p, static_cast<double>(i + 1) / static_cast<double>(n + 1)));

  std::vector<std::vector<double>> sims(m);
  parallel_for(m, threads, [&](std::size_t k) {
    Rng rng(seed, k);
    gpd::GpdParams q = p;
    if (param_cov) {
      Vec z(2);
      z << rng.normal(), rng.normal();
      const Vec d = chol * z;
      q.xi = p.xi + d[0];
      q.sigma = p.sigma * std::exp(d[1]);
    }
    std::vector<double> s(n);
    for (auto& v : s) v = gpd::sample(q, rng);
    std::sort(s.begin(), s.end());
    sims[k] = std::move(s);
  });
  const double lo_q = 0.5 * (1.0 - level), hi_q = 0.5 * (1.0 + level);
  std::vector<double> col(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) col[k] = sims[k][i];
    std::sort(col.begin(), col.end());
    rep.lower.push_back(gpd::empirical_quantile_sorted(col, lo_q));
    rep.upper.push_back(gpd::empirical_quantile_sorted(col, hi_q));
    if (rep.empirical[i] < rep.lower.back() || rep.empirical[i] > rep.upper.back()) ++rep.outside;
  }
  return rep;
}

RiskCheck risk_gpd_check(const std::vector<Vec>& samples, const ProcessSpec& spec, std::size_t qq_reps,
                         std::uint64_t seed) {
  if (!spec.r.linear)
    throw InvalidArgument("risk distribution is generalized Pareto only for linear r; use a Monte Carlo estimate instead");
  if (samples.empty()) throw InvalidArgument("no samples to check");
  const double rb = evaluate(spec.r, spec.b);
  std::vector<double> ex;
  ex.reserve(samples.size());
  for (const auto& s : samples) ex.push_back(evaluate(spec.r, s) - rb);
  const auto [mn, mx] = std::minmax_element(ex.begin(), ex.end());
  if (*mx - *mn <= 1e-9 * std::max(1.0, std::abs(*mx)))
    throw InvalidArgument("risk values are degenerate (fixed-risk samples cannot be checked against a GPD)");
  const gpd::GpdParams g{spec.xi, spec.risk_scale(), 0.0};
  RiskCheck out;
  out.ks = gpd::ks_distance(ex, g);
  if (qq_reps > 0) out.qq = qq_gpd(ex, g, qq_reps, 0.95, std::nullopt, seed);
  return out;
}

double marginal_conditional_check(const std::vector<Vec>& samples, const ProcessSpec& spec, std::size_t s0, double u0,
                                  std::size_t probe_rays, std::uint64_t seed) {
  const auto L = spec.sites.size();
  if (s0 >= L) throw InvalidArgument("site index out of range");
  const auto l = static_cast<Eigen::Index>(s0);
  const double xi = spec.xi;
  const double sigma0 = spec.a[l] + xi * (u0 - spec.b[l]);
  if (!(sigma0 > 0.0)) throw InvalidArgument("threshold u0 lies outside the marginal support");
  // standardized level of u0 at s0
  const double z0 = (u0 - spec.b[l]) / spec.a[l];
  const double y0 = std::abs(xi) < gpd::kXiZero ? std::exp(z0) : std::pow(1.0 + xi * z0, 1.0 / xi);
  const AngularSampler sampler(spec.dep, spec.sites);
  for (std::size_t k = 0; k < probe_rays; ++k) {
    Rng rng(seed, 0xc0e0000000ULL + k);
    const Vec w = sampler.sample(rng);
    if (!(w[l] > 0.0)) continue;
    const Vec y = (y0 / w[l]) * w;
    for (double t : {1.0, 2.0, 5.0})
      if (evaluate(spec.r, standardized_field(spec, Vec(t * y))) < -1e-9)
        throw InvalidArgument("cone condition fails: {P(s0) >= u0} is not contained in the r-exceedance set");
  }
  std::vector<double> ex;
  for (const auto& s : samples)
    if (s[l] > u0) ex.push_back(s[l] - u0);
  if (ex.size() < 2) throw InvalidArgument("too few exceedances of u0 at the chosen site");
  return gpd::ks_distance(ex, {xi, sigma0, 0.0});
}

std::vector<ExtremogramRow> extremogram_compare(const SiteSet& sites, const std::vector<Vec>& fields,
                                                const Vec& thresholds, const DependenceModel& dep,
                                                const LagGrid& grid) {
  const auto L = sites.size();
  if (static_cast<std::size_t>(thresholds.size()) != L) throw InvalidArgument("one threshold per site is required");
  if (grid.dist_edges.size() < 2 || grid.n_orientations == 0) throw InvalidArgument("lag grid needs at least one bin");
  for (const auto& f : fields)
    if (static_cast<std::size_t>(f.size()) != L) throw InvalidArgument("field has the wrong number of sites");
  const auto nd = grid.dist_edges.size() - 1;
  const auto no = grid.n_orientations;
  const double sector = 180.0 / static_cast<double>(no);

  // exceedance indicators per site
  std::vector<std::vector<char>> exc(L, std::vector<char>(fields.size()));
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t k = 0; k < fields.size(); ++k)
      exc[i][k] = fields[k][static_cast<Eigen::Index>(i)] >= thresholds[static_cast<Eigen::Index>(i)];

  std::vector<ExtremogramRow> rows;
  {
    ExtremogramRow zero;
    zero.model = 1.0;
    std::size_t den = 0;
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t k = 0; k < fields.size(); ++k) den += exc[i][k];
    zero.n_pairs = L;
    if (den > 0) zero.empirical = 1.0;
    rows.push_back(zero);
  }
  for (double lag : grid.time_lags) {
    struct Acc {
      std::size_t n = 0, num = 0, den = 0;
      double dist = 0.0, model = 0.0;
    };
    std::vector<Acc> acc(nd * no);
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < L; ++j) {
        if (i == j) continue;
        const auto [ds, dt] = site_lag(sites[i], sites[j]);
        if (std::abs(dt - lag) > 1e-9) continue;
        const double d = ds.norm();
        if (lag == 0.0 && (d == 0.0 || i > j)) continue;
        auto it = std::upper_bound(grid.dist_edges.begin(), grid.dist_edges.end(), d);
        if (it == grid.dist_edges.begin() || it == grid.dist_edges.end()) continue;
        const auto db = static_cast<std::size_t>(it - grid.dist_edges.begin()) - 1;
        double ang = std::atan2(ds[1], ds[0]) * 180.0 / std::numbers::pi;
        if (ang < 0.0) ang += 180.0;
        if (ang >= 180.0) ang -= 180.0;
        const auto ob = std::min(static_cast<std::size_t>(ang / sector), no - 1);
        Acc& a = acc[db * no + ob];
        ++a.n;
        a.dist += d;
        a.model += model_extremogram(dep, sites[i], sites[j]);
        for (std::size_t k = 0; k < fields.size(); ++k) {
          if (exc[i][k]) {
            ++a.den;
            if (exc[j][k]) ++a.num;
          }
        }
      }
    }
    for (std::size_t db = 0; db < nd; ++db)
      for (std::size_t ob = 0; ob < no; ++ob) {
        const Acc& a = acc[db * no + ob];
        if (a.n == 0) continue;
        ExtremogramRow row;
        row.lag_h = lag;
        row.lag_km = a.dist / static_cast<double>(a.n);
        row.angle_deg = (static_cast<double>(ob) + 0.5) * sector;
        row.n_pairs = a.n;
        row.model = a.model / static_cast<double>(a.n);
        if (a.den > 0) row.empirical = static_cast<double>(a.num) / static_cast<double>(a.den);
        rows.push_back(row);
      }
  }
  return rows;
}

double homogeneity_ratio(const std::vector<double>& norms, double c, double t) {
  if (!(c > 0.0) || !(t >= 1.0)) throw InvalidArgument("homogeneity ratio needs c > 0 and t >= 1");
  std::size_t above_c = 0, above_tc = 0;
  for (double v : norms) {
    if (v > c) ++above_c;
    if (v > t * c) ++above_tc;
  }
  if (above_c == 0) throw InvalidArgument("no sample norm exceeds c");
  return static_cast<double>(above_tc) / static_cast<double>(above_c);
}

}  // namespace fpot
