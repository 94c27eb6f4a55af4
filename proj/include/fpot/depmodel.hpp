#pragma once

#include "fpot/common.hpp"

#include <string>
#include <variant>
#include <vector>

namespace fpot {

/// Space-time anisotropic distance
///   ||h|| = { ||(Omega ds - V dt) / tau_s||^2 + (dt / tau_t)^2 }^(1/2),
///   Omega = [cos eta, -sin eta; a sin eta, a cos eta].
/// Space in km, time in hours, V in km per hour.
struct SpaceTimeMetric {
  double tau_s = 1.0;
  double tau_t = 1.0;
  double eta = 0.0;
  double a = 1.0;
  Eigen::Vector2d V = Eigen::Vector2d::Zero();

  void validate() const;
};

double metric_norm(const SpaceTimeMetric& m, const Eigen::Vector2d& ds, double dt);

/// Lag between two sites (ds = s_j - s_i, dt = t_j - t_i; dt = 0 without time).
std::pair<Eigen::Vector2d, double> site_lag(const Site& si, const Site& sj);

struct Variogram {
  enum class Kind { WhittleMatern, Power, PowerExponential };
  Kind kind = Kind::Power;
  double kappa = 1.0;  // Whittle-Matern sill
  double c = 1.0;      // power-exponential sill
  double tau = 1.0;    // power / power-exponential range
  double nu = 1.0;     // smoothness or exponent
  SpaceTimeMetric metric;

  static Variogram whittle_matern(double kappa, double nu, SpaceTimeMetric m = {});
  static Variogram power(double tau, double nu, SpaceTimeMetric m = {});
  static Variogram power_exponential(double c, double tau, double nu, SpaceTimeMetric m = {});

  void validate() const;
  /// Sill (infinity for the power model).
  double sill() const;
};

/// gamma as a function of the metric norm ||h||.
double variogram_at_norm(const Variogram& g, double h);
double variogram_eval(const Variogram& g, const Eigen::Vector2d& ds, double dt);
double variogram_between(const Variogram& g, const Site& si, const Site& sj);
/// Matrix of gamma(s_i, s_j).
Mat variogram_matrix(const Variogram& g, const SiteSet& sites);

/// Correlation function for the Gaussian layer of the extremal-t model.
struct Correlation {
  enum class Kind { PowerExponential, WhittleMatern };
  Kind kind = Kind::PowerExponential;
  double nu = 1.0;
  SpaceTimeMetric metric;

  void validate() const;
};

double correlation_at_norm(const Correlation& c, double h);
double correlation_between(const Correlation& c, const Site& si, const Site& sj);
Mat correlation_matrix(const Correlation& c, const SiteSet& sites);

struct BrownResnick {
  Variogram variogram;
};

struct ExtremalT {
  Correlation correlation;
  double df = 1.0;
};

using DependenceModel = std::variant<BrownResnick, ExtremalT>;

void validate(const DependenceModel& dep);

/// Normalized Matern kernel 2^(1-nu)/Gamma(nu) h^nu K_nu(h), equal to 1 at h = 0.
double matern_kernel(double nu, double h);

/// Pairwise extremogram 2(1 - Phi(sqrt(gamma/2))).
double br_extremogram(double gamma_val);
/// Pairwise extremogram 2(1 - t_{nu+1}[sqrt(nu+1) sqrt((1-C)/(1+C))]).
double et_extremogram(double C, double nu);
/// Model extremogram between two sites.
double model_extremogram(const DependenceModel& dep, const Site& si, const Site& sj);

/// Covariance of the Gaussian layer pinned to zero at ref_index:
/// Sigma_ij = gamma(s_i, s_ref) + gamma(s_j, s_ref) - gamma(s_i, s_j).
/// Throws NumericalError naming the pivot if the matrix is not PSD
/// (tolerance 1e-8 * trace).
Mat gaussian_cov(const BrownResnick& dep, const SiteSet& sites, std::size_t ref_index);
/// Same construction from a precomputed variogram matrix.
Mat gaussian_cov_from_gamma(const Mat& gamma, std::size_t ref_index, bool check_psd = true);

/// Pivoted Cholesky PSD check; throws NumericalError naming the failing pivot.
void require_psd(const Mat& m, double rel_tol = 1e-8);

// -- named parameters for fitting --------------------------------------------

/// Parameter names the model exposes, in canonical order.
std::vector<std::string> parameter_names(const DependenceModel& dep);
double get_parameter(const DependenceModel& dep, const std::string& name);
void set_parameter(DependenceModel& dep, const std::string& name, double value);
/// Map to and from an unconstrained real line (log for positive parameters,
/// scaled logit for exponents in (0, 2], scaled tanh for eta).
double to_unconstrained(const DependenceModel& dep, const std::string& name, double value);
double from_unconstrained(const DependenceModel& dep, const std::string& name, double z);

}  // namespace fpot
