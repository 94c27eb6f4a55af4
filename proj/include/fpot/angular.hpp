#pragma once

#include "fpot/common.hpp"
#include "fpot/depmodel.hpp"
#include "fpot/riskfunc.hpp"
#include "fpot/rng.hpp"

#include <memory>
#include <mutex>
#include <vector>

namespace fpot {

/// Draws the angular process W = Q / sum_{j in N} Q_j by the extremal-function
/// mixture: anchor j uniform on the normalizing set N, Q the extremal function
/// at s_j. With N = all sites this is the law sigma_0 on the 1-norm simplex and
/// Lambda{ sum_N y >= 1 } = |N| for unit margins.
///
/// Per-anchor Gaussian factors are computed on first use and cached; the
/// sampler is safe to share between threads.
class AngularSampler {
 public:
  AngularSampler(DependenceModel dep, SiteSet sites, std::vector<std::size_t> norm_sites = {});

  std::size_t dim() const { return sites_.size(); }
  const std::vector<std::size_t>& norm_sites() const { return norm_; }
  /// Lambda mass of { sum_N y >= 1 }.
  double norm_mass() const { return static_cast<double>(norm_.size()); }
  const DependenceModel& model() const { return dep_; }
  const SiteSet& sites() const { return sites_; }

  /// One draw of W (sum over the normalizing set equals 1).
  Vec sample(Rng& rng) const;

  /// Extremal function at anchor j, unnormalized. Brown-Resnick:
  /// Q = exp(G - gamma(., s_j)) with G(s_j) = 0. Extremal-t: max(G, 0)^nu
  /// with G_j chi-distributed on nu+1 degrees of freedom.
  Vec extremal_function(std::size_t j, Rng& rng) const;

 private:
  struct Factor {
    Mat chol;       // (L-1)x(L-1) lower factor over the sites other than j
    Vec mean_coef;  // extremal-t: regression of G_{-j} on G_j
  };
  const Factor& factor(std::size_t j) const;

  DependenceModel dep_;
  SiteSet sites_;
  std::vector<std::size_t> norm_;
  Mat gamma_;  // variogram (Brown-Resnick) or correlation (extremal-t) matrix
  mutable std::unique_ptr<std::once_flag[]> once_;
  mutable std::vector<Factor> factors_;
};

/// Lower Cholesky factor of a PSD matrix; adds 1e-10 * trace to the diagonal
/// and retries once if the plain factorization fails.
Mat psd_cholesky(const Mat& m);

/// One sigma_0 draw for a Brown-Resnick model (builds a fresh sampler).
Vec sample_W_br(const BrownResnick& dep, const SiteSet& sites, Rng& rng);
/// One sigma_0 draw for an extremal-t model; all-zero draws are redrawn,
/// with an error after 10^6 attempts.
Vec sample_W_extremal_t(const ExtremalT& dep, const SiteSet& sites, Rng& rng);

/// E[max(G, 0)^nu] for standard normal G: 2^(nu/2) Gamma((nu+1)/2) / (2 sqrt(pi)).
double extremal_t_moment(double nu);

/// Angular part for linear r: xi != 0 gives A y^xi / |A y^xi|_1;
/// xi = 0 gives y exp(-r(A log y)), so that r(A log w) = 0.
Vec linear_angular_transform(const Vec& y, double xi, const Vec& A, const RiskFunctional& r);

}  // namespace fpot
