#pragma once

#include "fpot/common.hpp"
#include "fpot/rng.hpp"

#include <optional>
#include <vector>

namespace fpot::gpd {

/// Generalized Pareto law of X given X > u: survival (1 + xi (x-u)/sigma)_+^(-1/xi).
struct GpdParams {
  double xi = 0.0;
  double sigma = 1.0;
  double u = 0.0;
};

/// Tail approximation 1 - F(x) ~ zeta_u * H(x - u) above u.
struct TailModel {
  GpdParams gpd;
  double zeta_u = 1.0;
};

/// |xi| below this is treated as the exponential case.
inline constexpr double kXiZero = 1e-8;

double survival(const GpdParams& p, double x);
double cdf(const GpdParams& p, double x);
double quantile(const GpdParams& p, double q);
/// Log density; -inf outside the support.
double log_density(const GpdParams& p, double x);
/// zeta_u * survival(x) for x >= u.
double tail_prob(const TailModel& tm, double x);

/// Upper end of the support (+inf when xi >= 0).
double upper_endpoint(const GpdParams& p);

/// Inverse-transform draw.
double sample(const GpdParams& p, Rng& rng);

struct FitResult {
  GpdParams params;
  double se_xi = 0.0;
  double se_sigma = 0.0;
  Mat covariance;  // over (xi, sigma)
  double loglik = 0.0;
  int evals = 0;
};

/// Raised when the optimizer does not converge; carries the best iterate.
class FitError : public NumericalError {
 public:
  FitError(const std::string& what, GpdParams best) : NumericalError(what), best_(best) {}
  const GpdParams& best() const { return best_; }

 private:
  GpdParams best_;
};

/// Weighted negative log-likelihood of excesses (threshold 0) at (xi, sigma).
double neg_loglik(const std::vector<double>& excesses, const std::vector<double>& weights, double xi,
                  double sigma);

/// Maximum-likelihood fit to excesses over zero (returned u = 0). Optional
/// positive weights are rescaled to sum to `weight_total` (default: number of
/// excesses). xi is restricted to (-0.95, inf).
FitResult fit_ml(const std::vector<double>& excesses, const std::vector<double>& weights = {},
                 std::optional<double> weight_total = std::nullopt);

/// Empirical type-7 quantile of a sample (linear interpolation between order statistics).
double empirical_quantile(std::vector<double> values, double q);
double empirical_quantile_sorted(const std::vector<double>& sorted, double q);

/// Kolmogorov-Smirnov distance between a sample and a GPD.
double ks_distance(std::vector<double> sample, const GpdParams& p);

}  // namespace fpot::gpd
