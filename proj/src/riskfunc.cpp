#include "fpot/riskfunc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace fpot {

RiskFunctional RiskFunctional::site_eval(std::size_t s0) {
  RiskFunctional r;
  r.kind = Kind::SiteEval;
  r.site = s0;
  r.linear = true;
  return r;
}

RiskFunctional RiskFunctional::weighted_mean(std::vector<double> w) {
  if (w.empty()) throw InvalidArgument("weighted mean needs at least one weight");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw InvalidArgument("weighted mean weights must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("weighted mean weights must sum to 1");
  RiskFunctional r;
  r.kind = Kind::WeightedMean;
  r.weights = std::move(w);
  r.linear = true;
  return r;
}

RiskFunctional RiskFunctional::uniform_mean(std::size_t n_sites) {
  if (n_sites == 0) throw InvalidArgument("uniform mean over zero sites");
  return weighted_mean(std::vector<double>(n_sites, 1.0 / static_cast<double>(n_sites)));
}

RiskFunctional RiskFunctional::spatial_mean(const SiteSet& sites) {
  const Vec& q = sites.quadrature_weights();
  std::vector<double> w(q.data(), q.data() + q.size());
  // renormalize exactly; cell areas already sum to one up to rounding
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  RiskFunctional r;
  r.kind = Kind::WeightedMean;
  r.weights = std::move(w);
  r.linear = true;
  return r;
}

RiskFunctional RiskFunctional::linear_combination(std::vector<double> coef) {
  if (coef.empty()) throw InvalidArgument("linear combination needs coefficients");
  RiskFunctional r;
  r.kind = Kind::LinearCombination;
  r.monotone = std::all_of(coef.begin(), coef.end(), [](double c) { return c >= 0.0; });
  r.weights = std::move(coef);
  r.linear = true;
  return r;
}

RiskFunctional RiskFunctional::supremum() {
  RiskFunctional r;
  r.kind = Kind::Supremum;
  return r;
}

RiskFunctional RiskFunctional::fourier_filtered_mean(std::size_t nx, std::size_t ny, std::size_t cutoff) {
  if (nx == 0 || ny == 0) throw InvalidArgument("Fourier filter needs non-empty grid dimensions");
  RiskFunctional r;
  r.kind = Kind::FourierFilteredMean;
  r.nx = nx;
  r.ny = ny;
  r.cutoff = cutoff;
  r.monotone = false;
  return r;
}

namespace {
RiskFunctional composite(RiskFunctional::Kind kind, std::vector<RiskFunctional> r, std::vector<double> u) {
  if (r.empty() || r.size() != u.size())
    throw InvalidArgument("composite risk needs matching member and threshold lists");
  RiskFunctional out;
  out.kind = kind;
  out.monotone = std::all_of(r.begin(), r.end(), [](const RiskFunctional& m) { return m.monotone; });
  out.members = std::move(r);
  out.thresholds = std::move(u);
  return out;
}

void require_size(const Vec& x, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(x.size()) != n)
    throw InvalidArgument(std::string("dimension mismatch in ") + what + ": expected " + std::to_string(n) +
                          " values, got " + std::to_string(x.size()));
}

double dot_skip_zero(const std::vector<double>& w, const Vec& x) {
  double s = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l)
    if (w[l] != 0.0) s += w[l] * x[static_cast<Eigen::Index>(l)];
  return s;
}

// Unnormalized separable 2-D DFT energy split: returns (low-pass norm, total norm).
std::pair<double, double> dft_energy(const Vec& x, std::size_t nx, std::size_t ny, std::size_t cutoff) {
  using cd = std::complex<double>;
  const double two_pi = 2.0 * std::numbers::pi;
  auto wrapped = [](std::size_t k, std::size_t n) { return std::min(k, n - k); };
  std::vector<std::size_t> kx, ky;
  for (std::size_t k = 0; k < nx; ++k)
    if (wrapped(k, nx) <= cutoff) kx.push_back(k);
  for (std::size_t k = 0; k < ny; ++k)
    if (wrapped(k, ny) <= cutoff) ky.push_back(k);
  // transform along x for retained kx only, then along y for retained ky
  std::vector<cd> rows(ny * kx.size());
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t a = 0; a < kx.size(); ++a) {
      cd s = 0.0;
      for (std::size_t i = 0; i < nx; ++i)
        s += x[static_cast<Eigen::Index>(j * nx + i)] *
             std::polar(1.0, -two_pi * static_cast<double>(kx[a] * i % nx) / static_cast<double>(nx));
      rows[j * kx.size() + a] = s;
    }
  double low = 0.0;
  for (std::size_t b = 0; b < ky.size(); ++b)
    for (std::size_t a = 0; a < kx.size(); ++a) {
      cd s = 0.0;
      for (std::size_t j = 0; j < ny; ++j)
        s += rows[j * kx.size() + a] *
             std::polar(1.0, -two_pi * static_cast<double>(ky[b] * j % ny) / static_cast<double>(ny));
      low += std::norm(s);
    }
  // Parseval: sum |X_k|^2 = N sum |x|^2
  const double total = static_cast<double>(nx * ny) * x.squaredNorm();
  return {std::sqrt(low), std::sqrt(total)};
}
}  // namespace

RiskFunctional RiskFunctional::max_composite(std::vector<RiskFunctional> r, std::vector<double> u) {
  return composite(Kind::MaxComposite, std::move(r), std::move(u));
}

RiskFunctional RiskFunctional::min_compound(std::vector<RiskFunctional> r, std::vector<double> u) {
  return composite(Kind::MinCompound, std::move(r), std::move(u));
}

std::string RiskFunctional::name() const {
  switch (kind) {
    case Kind::SiteEval: return "site_eval";
    case Kind::WeightedMean: return "weighted_mean";
    case Kind::LinearCombination: return "linear_combination";
    case Kind::Supremum: return "supremum";
    case Kind::FourierFilteredMean: return "fourier_filtered_mean";
    case Kind::MaxComposite: return "max_composite";
    case Kind::MinCompound: return "min_compound";
  }
  return "unknown";
}

double evaluate(const RiskFunctional& r, const Vec& x) {
  using K = RiskFunctional::Kind;
  switch (r.kind) {
    case K::SiteEval:
      if (r.site >= static_cast<std::size_t>(x.size())) throw InvalidArgument("site index outside the field");
      return x[static_cast<Eigen::Index>(r.site)];
    case K::WeightedMean:
    case K::LinearCombination:
      require_size(x, r.weights.size(), r.name().c_str());
      return dot_skip_zero(r.weights, x);
    case K::Supremum:
      if (x.size() == 0) throw InvalidArgument("supremum of an empty field");
      return x.maxCoeff();
    case K::FourierFilteredMean: {
      require_size(x, r.nx * r.ny, "fourier_filtered_mean");
      const double mean = x.mean();
      const auto [low, total] = dft_energy(x, r.nx, r.ny, r.cutoff);
      if (total == 0.0) return 0.0;
      return mean * low / total;
    }
    case K::MaxComposite: {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < r.members.size(); ++m)
        best = std::max(best, evaluate(r.members[m], x) - r.thresholds[m]);
      return best;
    }
    case K::MinCompound: {
      const auto nm = r.members.size();
      if (x.size() % static_cast<Eigen::Index>(nm) != 0)
        throw InvalidArgument("min_compound expects one equal-length block per member");
      const auto block = x.size() / static_cast<Eigen::Index>(nm);
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < nm; ++m) {
        Vec part = x.segment(static_cast<Eigen::Index>(m) * block, block);
        worst = std::min(worst, evaluate(r.members[m], part) - r.thresholds[m]);
      }
      return worst;
    }
  }
  throw InvalidArgument("unknown risk functional kind");
}

double evaluate(const RiskFunctional& r, const Vec& x, const SiteSet& sites) {
  using K = RiskFunctional::Kind;
  if (r.kind == K::MinCompound) {
    require_size(x, sites.size() * r.members.size(), "min_compound");
  } else {
    require_size(x, sites.size(), r.name().c_str());
  }
  if (r.kind == K::FourierFilteredMean) {
    auto shape = sites.grid_shape();
    if (!shape || shape->first != r.nx || shape->second != r.ny)
      throw InvalidArgument("fourier_filtered_mean requires the sites to form the declared rectangular grid");
  }
  return evaluate(r, x);
}

ValidityReport check_validity(const RiskFunctional& r, double xi, const Vec& A) {
  if (A.size() == 0 || (A.array() <= 0.0).any()) throw InvalidArgument("scale A must be positive at every site");
  ValidityReport rep;
  auto field_for = [&](const Vec& base) -> Vec {
    if (r.kind == RiskFunctional::Kind::MinCompound) return base.replicate(static_cast<Eigen::Index>(r.members.size()), 1);
    return base;
  };
  if (xi > 0.0) {
    const double v = evaluate(r, field_for(Vec(-A / xi)));
    rep.status = v < 0.0 ? Validity::Valid : Validity::Invalid;
    rep.diagnostic = "r(-A/xi) = " + std::to_string(v);
    return rep;
  }
  if (!r.monotone) {
    rep.status = Validity::Unknown;
    rep.diagnostic = "warning: divergence of a non-monotone functional along constant rays does not establish validity";
    return rep;
  }
  double prev = std::numeric_limits<double>::infinity();
  bool decreasing = true;
  double last = 0.0;
  for (int k = 1; k <= 8; ++k) {
    const double c = std::pow(10.0, k);
    last = evaluate(r, field_for(Vec::Constant(A.size(), -c)));
    if (!(last < prev)) decreasing = false;
    prev = last;
  }
  rep.status = (decreasing && last < -1e6) ? Validity::Valid : Validity::Invalid;
  rep.diagnostic = "r(-1e8) = " + std::to_string(last) + (decreasing ? "" : " (not strictly decreasing)");
  return rep;
}

}  // namespace fpot
