#pragma once

#include "fpot/common.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace fpot::optim {

struct Options {
  int max_evals = 4000;
  double f_tol = 1e-12;   // spread of simplex values
  double x_tol = 1e-10;   // simplex diameter
  double initial_step = 0.1;
};

struct Result {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
  int evals = 0;
  bool converged = false;
};

/// Derivative-free Nelder-Mead minimization with restarts on premature
/// collapse. Non-finite objective values are treated as +inf.
inline Result nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                          const Options& opt = {}) {
  const auto n = x0.size();
  Result res;
  auto eval = [&](const Vec& x) {
    ++res.evals;
    double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  // adaptive coefficients (Gao & Han) help in higher dimension
  const double dn = static_cast<double>(std::max<Eigen::Index>(n, 1));
  const double alpha = 1.0, beta = 1.0 + 2.0 / dn, gamma = 0.75 - 0.5 / dn, delta = 1.0 - 1.0 / dn;

  Vec start = x0;
  double step = opt.initial_step;
  for (int restart = 0; restart < 3; ++restart) {
    std::vector<Vec> simplex(static_cast<std::size_t>(n + 1), start);
    std::vector<double> fv(static_cast<std::size_t>(n + 1));
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& v = simplex[static_cast<std::size_t>(i + 1)];
      v[i] += (std::abs(v[i]) > 1e-8 ? step * std::max(1.0, std::abs(v[i])) : step);
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) fv[i] = eval(simplex[i]);
    std::vector<std::size_t> order(simplex.size());

    bool done = false;
    while (res.evals < opt.max_evals) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
      const auto best = order.front(), worst = order.back(), second = order[order.size() - 2];
      double diam = 0.0;
      for (auto i : order) diam = std::max(diam, (simplex[i] - simplex[best]).lpNorm<Eigen::Infinity>());
      const bool flat = std::isfinite(fv[worst]) && std::abs(fv[worst] - fv[best]) <=
                                                       opt.f_tol * (1.0 + std::abs(fv[best]));
      if ((flat && diam <= std::sqrt(opt.x_tol)) || diam <= opt.x_tol) {
        done = true;
        break;
      }
      Vec centroid = Vec::Zero(n);
      for (auto i : order)
        if (i != worst) centroid += simplex[i];
      centroid /= dn;
      Vec xr = centroid + alpha * (centroid - simplex[worst]);
      double fr = eval(xr);
      if (fr < fv[best]) {
        Vec xe = centroid + beta * (xr - centroid);
        double fe = eval(xe);
        if (fe < fr) {
          simplex[worst] = xe;
          fv[worst] = fe;
        } else {
          simplex[worst] = xr;
          fv[worst] = fr;
        }
      } else if (fr < fv[second]) {
        simplex[worst] = xr;
        fv[worst] = fr;
      } else {
        const bool outside = fr < fv[worst];
        Vec xc = outside ? Vec(centroid + gamma * (xr - centroid)) : Vec(centroid - gamma * (centroid - simplex[worst]));
        double fc = eval(xc);
        if (fc < (outside ? fr : fv[worst])) {
          simplex[worst] = xc;
          fv[worst] = fc;
        } else {
          for (auto i : order) {
            if (i == best) continue;
            simplex[i] = simplex[best] + delta * (simplex[i] - simplex[best]);
            fv[i] = eval(simplex[i]);
          }
        }
      }
    }
    const auto bi = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    const bool improved = fv[bi] < res.value - 1e-14 * (1.0 + std::abs(res.value));
    if (fv[bi] < res.value) {
      res.value = fv[bi];
      res.x = simplex[bi];
    }
    res.converged = done && std::isfinite(res.value);
    if (!done || !improved) break;
    // restart from the optimum with a smaller simplex to guard against collapse
    start = res.x;
    step *= 0.1;
  }
  if (res.x.size() == 0) res.x = x0;
  return res;
}

/// Central-difference Hessian of f at x.
inline Mat numerical_hessian(const std::function<double(const Vec&)>& f, const Vec& x, double rel_step = 1e-4) {
  const auto n = x.size();
  Mat h(n, n);
  Vec hs(n);
  for (Eigen::Index i = 0; i < n; ++i) hs[i] = rel_step * std::max(1.0, std::abs(x[i]));
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      Vec xpp = x, xpm = x, xmp = x, xmm = x;
      if (i == j) {
        xpp[i] += hs[i];
        xmm[i] -= hs[i];
        h(i, i) = (f(xpp) - 2.0 * f0 + f(xmm)) / (hs[i] * hs[i]);
      } else {
        xpp[i] += hs[i]; xpp[j] += hs[j];
        xpm[i] += hs[i]; xpm[j] -= hs[j];
        xmp[i] -= hs[i]; xmp[j] += hs[j];
        xmm[i] -= hs[i]; xmm[j] -= hs[j];
        h(i, j) = h(j, i) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * hs[i] * hs[j]);
      }
    }
  }
  return h;
}

}  // namespace fpot::optim
