#pragma once

#include "fpot/common.hpp"
#include "fpot/depmodel.hpp"
#include "fpot/riskfunc.hpp"
#include "fpot/rng.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fpot {

// -- declustering ---------------------------------------------------------------

struct ClusterPeak {
  std::size_t index = 0;  // position in the input series
  double time = 0.0;
  double risk = 0.0;
};

/// Greedy declustering: local maxima of the risk series at or above u_n are
/// taken in decreasing order of risk, dropping any candidate closer than
/// `separation` to a peak already kept. Returned in time order.
std::vector<ClusterPeak> decluster(const std::vector<double>& time, const std::vector<double>& risk, double u_n,
                                   double separation);

// -- exceedances and margins ----------------------------------------------------

struct ExceedanceSet {
  std::vector<FieldObservation> events;
  std::vector<double> risk;     // r(x_j) for every event
  double u_n = 0.0;
  std::vector<std::size_t> K;   // indices with r(x_j) >= u_n
};

/// Evaluates r on every event and keeps the indices with r >= u_n.
/// Throws when no event exceeds.
ExceedanceSet make_exceedance_set(std::vector<FieldObservation> events, const RiskFunctional& r, double u_n);

struct MarginalModel {
  double xi = 0.0;
  Vec a;               // per-site scale
  Vec b;               // per-site threshold
  double a_prime = 0.0;  // r(a)
  double q_prime = 0.0;  // quantile level giving r(b) = u_n
  double u_n = 0.0;
  Vec A;               // a / r(a)
  Vec B;               // b - A u_n
  double se_xi = 0.0;
  Vec se_a;
  double loglik = 0.0;
  std::vector<std::size_t> excluded;  // sites with degenerate or too few excesses
  std::vector<std::string> notes;
};

/// Two conditions define the margins: b_l is the empirical q'-quantile of the
/// exceedance events at site l with q' found by bisection so that r(b) = u_n,
/// then a common xi and per-site scales a_l maximize the GPD independence
/// likelihood of the excesses over b. With storm weights each contribution
/// of event j is weighted by 1 / (number of sites exceeding in event j).
MarginalModel fit_margins(const ExceedanceSet& es, const RiskFunctional& r, bool storm_weights = false);

// -- extremogram and least squares -----------------------------------------------

/// Ordered site pair: probability that `target` is extreme given `given` is.
struct SitePair {
  std::size_t given = 0;
  std::size_t target = 0;
};

/// Empirical extremogram over the exceedance events; nullopt when no
/// exceedance event exceeds b at the conditioning site.
std::vector<std::optional<double>> empirical_extremogram(const ExceedanceSet& es, const Vec& b,
                                                         const std::vector<SitePair>& pairs);

/// All ordered pairs (i, j), i < j, as given = i, target = j.
std::vector<SitePair> all_pairs(std::size_t n_sites);

struct DependenceFit {
  DependenceModel model;
  std::vector<std::string> names;  // free parameters
  Vec theta;                       // natural scale
  Vec se;                          // NaN when not computed
  double objective = 0.0;
  int evals = 0;
  bool converged = false;
  std::vector<std::vector<std::size_t>> subsets;
  std::uint64_t seed = 0;
  std::optional<double> lambda_mass;
  std::optional<double> lambda_se;
};

/// Weighted least-squares fit of the model extremogram to empirical values.
/// Missing pairs are skipped; weights default to one.
DependenceFit fit_dependence_ls(const SiteSet& sites, const std::vector<SitePair>& pairs,
                                const std::vector<std::optional<double>>& pihat, const DependenceModel& init,
                                const std::vector<std::string>& free_params, std::vector<double> weights = {});

// -- Brown-Resnick intensity and gradient scoring ---------------------------------

struct IntensityEval {
  double log_lambda = 0.0;
  Vec grad;       // d log lambda / dy_l
  Vec hess_diag;  // d^2 log lambda / dy_l^2
};

/// Log-intensity of the Brown-Resnick exponent measure (unit margins) on a
/// fixed set of sites, anchored at `anchor`. Precomputes the inverse
/// covariance so that evaluation is O(L^2) per point.
class BrIntensity {
 public:
  BrIntensity(const Variogram& g, const SiteSet& sites, std::size_t anchor = 0);
  BrIntensity(const Mat& gamma, std::size_t anchor = 0);
  IntensityEval operator()(const Vec& y) const;
  std::size_t dim() const { return static_cast<std::size_t>(gamma_.rows()); }

 private:
  void init();
  Mat gamma_;
  std::size_t anchor_;
  Mat P_;            // inverse covariance over the non-anchor sites
  Vec gamma_ref_;    // gamma(s_l, s_anchor), l != anchor
  Vec P_row_sum_;
  double P_total_ = 0.0;
  double log_norm_ = 0.0;  // -(L-1)/2 log 2 pi - 1/2 log det
};

IntensityEval br_intensity(const Variogram& g, const SiteSet& sites, const Vec& y, std::size_t anchor = 0);

/// 1-homogeneous standardized risk g with exceedance region {g(y) >= 1}:
/// r(A y^xi)^(1/xi), exp(r(A log y)) for xi = 0, or |y|_1 / t(y/|y|_1) from
/// the ray root for non-linear r.
class StandardizedRisk {
 public:
  StandardizedRisk(RiskFunctional r, Vec A, double xi);
  double value(const Vec& y) const;
  Vec gradient(const Vec& y) const;

 private:
  RiskFunctional r_;
  Vec A_;
  double xi_;
  std::optional<Vec> coef_;
};

struct ScoreValue {
  double value = 0.0;
  Vec grad;  // with respect to the free parameters (natural scale)
};

/// Weighted gradient score summed over samples and subsets with weight
/// w_l = y_l (1 - u / g(y)). Samples must satisfy g(y) >= u.
double gradient_score_value(const Variogram& g, const SiteSet& sites, const std::vector<std::vector<std::size_t>>& subsets,
                            const std::vector<Vec>& y, const StandardizedRisk& risk, double u);

/// Value and central-difference gradient over the named free parameters.
ScoreValue gradient_score(const DependenceModel& dep, const std::vector<std::string>& free_params, const SiteSet& sites,
                          const std::vector<std::vector<std::size_t>>& subsets, const std::vector<Vec>& y,
                          const StandardizedRisk& risk, double u);

struct ScoreOptions {
  std::size_t n_subsets = 100;
  std::size_t subset_size = 50;  // capped at L
  std::uint64_t seed = 0;
  double u = 1.0;
  unsigned threads = 1;
};

/// Random site subsets (sorted, without replacement); a single full subset
/// when size >= L.
std::vector<std::vector<std::size_t>> draw_subsets(std::size_t n_sites, std::size_t count, std::size_t size,
                                                   std::uint64_t seed);

/// Minimizes the composite gradient score over the free Brown-Resnick
/// parameters given standardized exceedances y.
DependenceFit fit_dependence_score(const std::vector<Vec>& y, const SiteSet& sites, const StandardizedRisk& risk,
                                   const DependenceModel& init, const std::vector<std::string>& free_params,
                                   const ScoreOptions& opt = {});

/// Standardizes raw exceedance events with the marginal model:
/// y = (1 + xi (x - b)/a)^(1/xi), clipped below at 1e-12.
std::vector<Vec> standardize_events(const ExceedanceSet& es, const MarginalModel& mm);

// -- Poisson likelihood -----------------------------------------------------------

struct LambdaEstimate {
  double mass = 0.0;
  double se = 0.0;
};

/// Lambda{g(y) >= u} = |sites| E_{sigma_0}[g(W)] / u by Monte Carlo with the
/// given draws and seed. Throws when the relative standard error exceeds 10%.
LambdaEstimate exceedance_mass(const DependenceModel& dep, const SiteSet& sites, const StandardizedRisk& risk, double u,
                               std::size_t draws, std::uint64_t seed, unsigned threads = 1);

/// Poisson process log-likelihood of standardized exceedances:
/// n log Lambda - Lambda + sum_j log{lambda(y_j)/Lambda}.
double poisson_loglik(const BrownResnick& dep, const SiteSet& sites, const std::vector<Vec>& y,
                      const LambdaEstimate& mass);

/// Maximizes the Poisson likelihood; Lambda uses common random numbers across
/// parameter values.
DependenceFit fit_dependence_poisson(const std::vector<Vec>& y, const SiteSet& sites, const StandardizedRisk& risk,
                                     const DependenceModel& init, const std::vector<std::string>& free_params,
                                     double u = 1.0, std::size_t mc_draws = 20000, std::uint64_t seed = 0,
                                     unsigned threads = 1);

// -- iterative refinement ---------------------------------------------------------

struct RefinementStep {
  std::size_t n_exceedances = 0;
  std::size_t changed_from_previous = 0;  // symmetric difference with the previous set
  std::size_t changed_from_initial = 0;   // symmetric difference with the initial r-set
};

struct RefinementResult {
  MarginalModel margins;
  ExceedanceSet exceedances;
  std::vector<RefinementStep> trace;
  bool converged = false;
};

/// Alternates marginal fitting (with the linear functional r and r(b) = u_n)
/// and reselection of the events by a refined functional r' applied to the
/// standardized fields, keeping the number of exceedances fixed, until the set
/// repeats (at most 20 rounds).
RefinementResult iterative_refinement(const std::vector<FieldObservation>& events, const RiskFunctional& r,
                                      const RiskFunctional& r_refined, double u_n, bool storm_weights = false,
                                      std::size_t max_iter = 20);

// -- resampling --------------------------------------------------------------------

enum class ResampleScheme { Jackknife, Bootstrap };

/// Standard errors of `estimator` (evaluated on event index sets) by
/// leave-one-event-out jackknife or event bootstrap with B replicates.
/// Replicates that throw are skipped; more than 10% failures is an error.
Vec resample_se(std::size_t n_events, const std::function<Vec(const std::vector<std::size_t>&)>& estimator,
                ResampleScheme scheme, std::size_t B = 0, std::uint64_t seed = 0, unsigned threads = 1);

}  // namespace fpot
