#pragma once

#include "fpot/common.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace fpot {

/// Scalar summary r(x) of a discretized field x; an r-exceedance is the event
/// r(x) >= u. Construct through the named factories, which set the linearity
/// and monotonicity flags.
struct RiskFunctional {
  enum class Kind {
    SiteEval,             // x(s0)
    WeightedMean,         // sum_l w_l x_l, w >= 0, sum w = 1
    LinearCombination,    // sum_l c_l x_l, arbitrary real coefficients
    Supremum,             // max_l x_l
    FourierFilteredMean,  // mean(x) * |low-pass DFT| / |DFT| on a grid
    MaxComposite,         // max_m { r_m(x) - u_m }
    MinCompound,          // min_m { r_m(x^m) - u_m } on stacked blocks x^m
  };

  Kind kind = Kind::Supremum;
  std::size_t site = 0;
  std::vector<double> weights;
  std::size_t nx = 0, ny = 0;
  std::size_t cutoff = 0;  // highest retained wrapped frequency index; 0 keeps DC only
  std::vector<RiskFunctional> members;
  std::vector<double> thresholds;
  bool linear = false;
  bool monotone = true;

  static RiskFunctional site_eval(std::size_t s0);
  static RiskFunctional weighted_mean(std::vector<double> w);
  static RiskFunctional uniform_mean(std::size_t n_sites);
  /// Quadrature mean using the site set's cell weights.
  static RiskFunctional spatial_mean(const SiteSet& sites);
  static RiskFunctional linear_combination(std::vector<double> coef);
  static RiskFunctional supremum();
  static RiskFunctional fourier_filtered_mean(std::size_t nx, std::size_t ny, std::size_t cutoff = 0);
  static RiskFunctional max_composite(std::vector<RiskFunctional> r, std::vector<double> u);
  static RiskFunctional min_compound(std::vector<RiskFunctional> r, std::vector<double> u);

  std::string name() const;
};

/// r(x). `sites` is consulted for grid checks; MinCompound expects x to be the
/// concatenation of one block of sites.size() values per member.
double evaluate(const RiskFunctional& r, const Vec& x, const SiteSet& sites);
/// Evaluation without a site set (no grid verification beyond nx*ny).
double evaluate(const RiskFunctional& r, const Vec& x);

enum class Validity { Valid, Invalid, Unknown };

struct ValidityReport {
  Validity status = Validity::Unknown;
  std::string diagnostic;
  bool valid() const { return status == Validity::Valid; }
};

/// Checks whether r applied to rescaled fields has r-exceedance sets of
/// positive finite limit measure for tail index xi and scale A:
/// xi > 0 requires r(-A/xi) < 0; xi <= 0 requires r(-c) -> -inf.
ValidityReport check_validity(const RiskFunctional& r, double xi, const Vec& A);

}  // namespace fpot
