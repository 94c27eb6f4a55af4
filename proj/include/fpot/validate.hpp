#pragma once

#include "fpot/common.hpp"
#include "fpot/depmodel.hpp"
#include "fpot/gpd.hpp"
#include "fpot/simulate.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fpot {

struct QQReport {
  std::vector<double> empirical;  // sorted data
  std::vector<double> model;      // model quantiles at i/(n+1)
  std::vector<double> lower;      // pointwise band per order statistic
  std::vector<double> upper;
  double level = 0.95;
  std::size_t outside = 0;        // order statistics outside their band
};

/// QQ data for values above p.u against a GPD, with pointwise Monte Carlo
/// bands from m simulated samples of the same size. With `param_cov`
/// (covariance of (xi, log sigma)) each replicate draws its parameters from
/// the corresponding normal law.
QQReport qq_gpd(const std::vector<double>& values, const gpd::GpdParams& p, std::size_t m = 200, double level = 0.95,
                const std::optional<Mat>& param_cov = std::nullopt, std::uint64_t seed = 0, unsigned threads = 1);

struct RiskCheck {
  double ks = 0.0;
  std::optional<QQReport> qq;
};

/// Compares r(P) - r(b) with GPD(xi, r(a)). Linear r only; degenerate
/// (fixed-risk) samples are rejected. `qq_reps` > 0 adds a QQ report.
RiskCheck risk_gpd_check(const std::vector<Vec>& samples, const ProcessSpec& spec, std::size_t qq_reps = 0,
                         std::uint64_t seed = 0);

/// KS distance between exceedances of P(s0) over u0 and GPD(xi, sigma0) with
/// sigma0 = a(s0) + xi (u0 - b(s0)). The event {P(s0) >= u0} must lie inside
/// the r-exceedance set; this is probed along sigma_0 rays scaled by 1, 2, 5.
double marginal_conditional_check(const std::vector<Vec>& samples, const ProcessSpec& spec, std::size_t s0, double u0,
                                  std::size_t probe_rays = 2000, std::uint64_t seed = 0);

struct LagGrid {
  std::vector<double> dist_edges{0.0, 1e300};  // spatial distance bins, km
  std::size_t n_orientations = 1;              // sectors over [0, 180) degrees
  std::vector<double> time_lags{0.0};          // hours
};

struct ExtremogramRow {
  double lag_h = 0.0;
  double lag_km = 0.0;      // mean distance of the pairs in the bin
  double angle_deg = 0.0;   // sector centre
  std::size_t n_pairs = 0;
  std::optional<double> empirical;
  double model = 0.0;       // mean model value over the pairs in the bin
};

/// Empirical extremogram of fields (pooled counts of joint exceedances of the
/// per-site thresholds) against the model, binned by time lag, distance and
/// orientation. The first row is the zero lag, equal to 1 for both.
std::vector<ExtremogramRow> extremogram_compare(const SiteSet& sites, const std::vector<Vec>& fields,
                                                const Vec& thresholds, const DependenceModel& dep,
                                                const LagGrid& grid);

/// Pr(|Y|_1 > t c) / Pr(|Y|_1 > c) from sample norms.
double homogeneity_ratio(const std::vector<double>& norms, double c, double t);

}  // namespace fpot
