#include "fpot/angular.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace fpot {

Mat psd_cholesky(const Mat& m) {
  if (m.rows() == 0) return m;
  const double tr = m.trace();
  if (tr <= 0.0) return Mat::Zero(m.rows(), m.cols());
  Eigen::LLT<Mat> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Mat jittered = m;
  jittered.diagonal().array() += 1e-10 * tr;
  Eigen::LLT<Mat> retry(jittered);
  if (retry.info() != Eigen::Success) throw NumericalError("covariance factorization failed after jitter");
  return retry.matrixL();
}

AngularSampler::AngularSampler(DependenceModel dep, SiteSet sites, std::vector<std::size_t> norm_sites)
    : dep_(std::move(dep)), sites_(std::move(sites)), norm_(std::move(norm_sites)) {
  if (sites_.empty()) throw InvalidArgument("angular sampler needs at least one site");
  validate(dep_);
  if (norm_.empty()) {
    norm_.resize(sites_.size());
    for (std::size_t i = 0; i < norm_.size(); ++i) norm_[i] = i;
  }
  for (auto j : norm_)
    if (j >= sites_.size()) throw InvalidArgument("normalizing site index out of range");
  if (const auto* br = std::get_if<BrownResnick>(&dep_)) {
    gamma_ = variogram_matrix(br->variogram, sites_);
  } else {
    gamma_ = correlation_matrix(std::get<ExtremalT>(dep_).correlation, sites_);
  }
  once_ = std::make_unique<std::once_flag[]>(sites_.size());
  factors_.resize(sites_.size());
}

const AngularSampler::Factor& AngularSampler::factor(std::size_t j) const {
  std::call_once(once_[j], [&] {
    const auto n = static_cast<Eigen::Index>(sites_.size());
    const auto jj = static_cast<Eigen::Index>(j);
    std::vector<Eigen::Index> rest;
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != jj) rest.push_back(i);
    const auto m = static_cast<Eigen::Index>(rest.size());
    Mat cov(m, m);
    Factor f;
    if (std::holds_alternative<BrownResnick>(dep_)) {
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
          cov(a, b) = gamma_(rest[a], jj) + gamma_(rest[b], jj) - gamma_(rest[a], rest[b]);
    } else {
      f.mean_coef.resize(m);
      for (Eigen::Index a = 0; a < m; ++a) f.mean_coef[a] = gamma_(rest[a], jj);
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
          cov(a, b) = gamma_(rest[a], rest[b]) - f.mean_coef[a] * f.mean_coef[b];
    }
    f.chol = psd_cholesky(cov);
    factors_[j] = std::move(f);
  });
  return factors_[j];
}

Vec AngularSampler::extremal_function(std::size_t j, Rng& rng) const {
  const auto n = static_cast<Eigen::Index>(sites_.size());
  const auto jj = static_cast<Eigen::Index>(j);
  Vec q(n);
  if (n == 1) {
    q[0] = 1.0;
    return q;
  }
  const Factor& f = factor(j);
  Vec z(n - 1);
  for (Eigen::Index i = 0; i < n - 1; ++i) z[i] = rng.normal();
  Vec g = f.chol.triangularView<Eigen::Lower>() * z;
  if (const auto* et = std::get_if<ExtremalT>(&dep_)) {
    std::gamma_distribution<double> chi2((et->df + 1.0) / 2.0, 2.0);
    const double gj = std::sqrt(chi2(rng));
    g += f.mean_coef * gj;
    for (Eigen::Index i = 0, k = 0; i < n; ++i) {
      const double v = (i == jj) ? gj : g[k++];
      q[i] = v > 0.0 ? std::pow(v, et->df) : 0.0;
    }
  } else {
    for (Eigen::Index i = 0, k = 0; i < n; ++i) {
      if (i == jj) {
        q[i] = 1.0;
      } else {
        q[i] = std::exp(g[k++] - gamma_(i, jj));
      }
    }
  }
  return q;
}

Vec AngularSampler::sample(Rng& rng) const {
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(norm_.size()));
    const std::size_t j = norm_[std::min(pick, norm_.size() - 1)];
    Vec q = extremal_function(j, rng);
    double s = 0.0;
    for (auto l : norm_) s += q[static_cast<Eigen::Index>(l)];
    if (s > 0.0 && std::isfinite(s)) return q / s;
  }
  throw NumericalError("angular sampler produced only all-zero draws after 10^6 attempts");
}

Vec sample_W_br(const BrownResnick& dep, const SiteSet& sites, Rng& rng) {
  return AngularSampler(dep, sites).sample(rng);
}

Vec sample_W_extremal_t(const ExtremalT& dep, const SiteSet& sites, Rng& rng) {
  return AngularSampler(dep, sites).sample(rng);
}

double extremal_t_moment(double nu) {
  if (!(nu > 0.0)) throw InvalidArgument("extremal-t moment needs nu > 0");
  return std::exp(0.5 * nu * std::numbers::ln2 + std::lgamma((nu + 1.0) / 2.0)) / (2.0 * std::sqrt(std::numbers::pi));
}

Vec linear_angular_transform(const Vec& y, double xi, const Vec& A, const RiskFunctional& r) {
  if (!r.linear) throw InvalidArgument("linear angular transform needs a linear risk functional");
  if (y.size() != A.size()) throw InvalidArgument("dimension mismatch between y and A");
  if ((y.array() <= 0.0).any()) throw InvalidArgument("linear angular transform needs strictly positive y");
  if (std::abs(evaluate(r, A) - 1.0) > 1e-10) throw InvalidArgument("scale A must satisfy r(A) = 1");
  if (xi == 0.0) {
    const Vec ly = y.array().log().matrix();
    const double s = evaluate(r, Vec(A.cwiseProduct(ly)));
    return (ly.array() - s).exp().matrix();
  }
  Vec v = A.cwiseProduct(y.array().pow(xi).matrix());
  return v / v.sum();
}

}  // namespace fpot
