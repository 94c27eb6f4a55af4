#include "fpot/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace fpot {

SiteSet::SiteSet(std::vector<Site> sites, std::vector<double> cell_areas)
    : sites_(std::move(sites)) {
  const auto n = sites_.size();
  weights_ = Vec::Constant(static_cast<Eigen::Index>(n), n ? 1.0 / static_cast<double>(n) : 0.0);
  if (!cell_areas.empty()) {
    if (cell_areas.size() != n) throw InvalidArgument("cell area count does not match site count");
    double total = 0.0;
    for (double a : cell_areas) {
      if (!(a > 0.0)) throw InvalidArgument("cell areas must be positive");
      total += a;
    }
    for (std::size_t i = 0; i < n; ++i) weights_[static_cast<Eigen::Index>(i)] = cell_areas[i] / total;
  }
}

SiteSet SiteSet::grid(std::size_t nx, std::size_t ny, double spacing_km) {
  std::vector<Site> s;
  s.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      s.push_back({"s" + std::to_string(j * nx + i), static_cast<double>(i) * spacing_km,
                   static_cast<double>(j) * spacing_km, std::nullopt});
  return SiteSet(std::move(s));
}

SiteSet SiteSet::line(const std::vector<double>& x_km) {
  std::vector<Site> s;
  for (std::size_t i = 0; i < x_km.size(); ++i) s.push_back({"s" + std::to_string(i), x_km[i], 0.0, std::nullopt});
  return SiteSet(std::move(s));
}

bool SiteSet::has_time() const {
  return !sites_.empty() &&
         std::all_of(sites_.begin(), sites_.end(), [](const Site& s) { return s.t_hours.has_value(); });
}

std::optional<std::pair<std::size_t, std::size_t>> SiteSet::grid_shape() const {
  if (sites_.empty() || has_time()) return std::nullopt;
  std::set<double> xs, ys;
  for (const auto& s : sites_) {
    xs.insert(s.x_km);
    ys.insert(s.y_km);
  }
  const std::size_t nx = xs.size(), ny = ys.size();
  if (nx * ny != sites_.size()) return std::nullopt;
  std::vector<double> xv(xs.begin(), xs.end()), yv(ys.begin(), ys.end());
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    if (sites_[k].x_km != xv[k % nx] || sites_[k].y_km != yv[k / nx]) return std::nullopt;
  }
  return std::make_pair(nx, ny);
}

std::vector<std::size_t> SiteSet::slice(double t_hours) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sites_.size(); ++i)
    if (!sites_[i].t_hours || *sites_[i].t_hours == t_hours) idx.push_back(i);
  return idx;
}

std::vector<double> SiteSet::times() const {
  std::set<double> ts;
  for (const auto& s : sites_)
    if (s.t_hours) ts.insert(*s.t_hours);
  return {ts.begin(), ts.end()};
}

SiteSet SiteSet::subset(const std::vector<std::size_t>& idx) const {
  std::vector<Site> s;
  std::vector<double> w;
  s.reserve(idx.size());
  for (auto i : idx) {
    if (i >= sites_.size()) throw InvalidArgument("site index out of range");
    s.push_back(sites_[i]);
    w.push_back(weights_[static_cast<Eigen::Index>(i)]);
  }
  return SiteSet(std::move(s), std::move(w));
}

std::pair<double, double> project_equirectangular(double lon_deg, double lat_deg, double ref_lat_deg) {
  constexpr double earth_radius_km = 6371.0;
  constexpr double deg = std::numbers::pi / 180.0;
  return {earth_radius_km * lon_deg * deg * std::cos(ref_lat_deg * deg), earth_radius_km * lat_deg * deg};
}

}  // namespace fpot
