#pragma once

#include "fpot/angular.hpp"
#include "fpot/common.hpp"
#include "fpot/depmodel.hpp"
#include "fpot/riskfunc.hpp"
#include "fpot/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fpot {

/// Generalized r-Pareto process P = a (Y^xi - 1)/xi + b with Y a standard
/// r-Pareto process built from the dependence model.
struct ProcessSpec {
  double xi = 0.0;
  Vec a;  // per-site scale, positive
  Vec b;  // per-site location
  Vec A;  // a / r(a)
  RiskFunctional r;
  DependenceModel dep;
  SiteSet sites;

  /// Builds the spec and sets A = a / r(a); throws if r(a) <= 0 or the
  /// functional is not valid for (xi, A).
  static ProcessSpec make(double xi, Vec a, Vec b, RiskFunctional r, DependenceModel dep, SiteSet sites);
  void validate() const;
  /// r(a)
  double risk_scale() const;
};

/// Standardized field A (y^xi - 1)/xi (A log y for xi = 0); the process is an
/// r-exceedance iff r of this field is >= 0.
Vec standardized_field(const ProcessSpec& spec, const Vec& y);
/// P = a (y^xi - 1)/xi + b.
Vec to_process_scale(const ProcessSpec& spec, const Vec& y);
/// Inverse of to_process_scale: y = (1 + xi (x - b)/a)_+^(1/xi).
Vec from_process_scale(const ProcessSpec& spec, const Vec& x);

/// y = {1 + xi (x - b)/r(a)}_+^(1/xi), or exp{(x - b)/r(a)} for xi = 0.
Vec transform_T(const ProcessSpec& spec, const Vec& x);
/// Inverse of transform_T followed by the floor max(., -A/xi) on the
/// standardized scale (xi > 0). Requires y > 0 except where the floor applies.
Vec transform_T_inverse(const ProcessSpec& spec, const Vec& y);

struct SimBound {
  enum class Method { UserSupplied, NumericRay, ClosedForm };
  double u = 1.0;
  Method method = Method::UserSupplied;
  std::size_t n_directions = 0;
  double safety = 1.0;
};

/// Smallest t > 0 with r(A ((t w)^xi - 1)/xi) >= 0 along the ray t*w, or
/// nullopt when the ray never enters the exceedance set. Closed form for
/// linear r, bisection otherwise.
std::optional<double> ray_root(const ProcessSpec& spec, const Vec& w);

/// Lower bound u on |y|_1 over the rescaled exceedance set from ray roots
/// along Dirichlet(1) directions plus the vertices, times `safety`.
SimBound sim_bound(const ProcessSpec& spec, std::size_t n_directions = 2000, double safety = 0.9,
                   std::uint64_t seed = 0);

/// Exact infimum of |y|_1 over the exceedance set for linear r with
/// non-negative coefficients.
std::optional<SimBound> sim_bound_closed_form(const ProcessSpec& spec);

struct SimOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool keep_standardized = false;  // also return Y
  bool audit = true;               // ray-root audit of accepted samples
};

struct SimResult {
  std::vector<Vec> samples;        // process scale P
  std::vector<Vec> standardized;   // Y, when requested
  std::uint64_t proposals = 0;
  double accept_rate = 0.0;
  /// Smallest ray root over accepted samples divided by u; below 1 means the
  /// bound cut into the exceedance set.
  double min_margin = std::numeric_limits<double>::infinity();
};

/// Accept-reject simulation for any valid r: Y = u R W with R unit Pareto and
/// W ~ sigma_0, kept when r(A (Y^xi - 1)/xi) >= 0.
SimResult simulate_alg1(const ProcessSpec& spec, const SimBound& bound, std::size_t n, const SimOptions& opt = {});

/// Two-stage simulation for linear r. The angular part comes from accepted
/// stage-one draws; the risk from an independent unit Pareto R2, or is fixed
/// at `risk_level` so that r(P) equals it exactly.
SimResult simulate_alg2(const ProcessSpec& spec, std::optional<double> risk_level, std::size_t n,
                        const SimOptions& opt = {});

/// Space-time design for storm simulation: every time slice lists the same
/// spatial sites in the same order.
struct StormSpec {
  double xi = 0.0;
  Vec a;  // per space-time site
  Vec b;
  RiskFunctional r;  // linear functional on one time slice
  BrownResnick dep;
  SiteSet sites;     // with time coordinates
  double centre_time = 0.0;
};

struct StormResult {
  std::vector<Vec> samples;           // full space-time fields
  std::vector<double> centre_risk;    // r at the centre slice
  std::uint64_t proposals = 0;        // stage-one proposals
  std::uint64_t storm_rejections = 0; // storms redrawn because another slice peaked
  double accept_rate = 0.0;
};

/// Simulates the centre slice as an r-exceedance, then the other slices by
/// Gaussian conditioning of the log-field, working outwards from the centre.
/// A storm whose spatial risk at another time exceeds the centre value is
/// discarded and redrawn in full.
StormResult simulate_storm_conditional(const StormSpec& spec, std::size_t n, const SimOptions& opt = {});

/// Pointwise maximum over the Poisson points of the exponent measure, mapped
/// to GEV margins a (M^xi - 1)/xi + b. Points are generated in decreasing
/// order, which makes the truncation exact. Test use, L <= 5.
Vec max_stable_oracle(const ProcessSpec& spec, const AngularSampler& sampler, Rng& rng);
std::vector<Vec> max_stable_oracle(const ProcessSpec& spec, std::size_t n_replicates, const SimOptions& opt = {});

}  // namespace fpot
