#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fpot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition or malformed input. The CLI maps this to exit code 2.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (non-convergence, singular matrix, starved sampler).
/// The CLI maps this to exit code 1.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// One sampling location. Coordinates are planar kilometres; `t_hours` is set
/// for space-time designs.
struct Site {
  std::string id;
  double x_km = 0.0;
  double y_km = 0.0;
  std::optional<double> t_hours;
};

/// The sampling design: L sites with optional time coordinate and quadrature
/// weights used when a spatial integral is replaced by a sum.
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(std::vector<Site> sites, std::vector<double> cell_areas = {});

  /// Regular nx-by-ny grid with x varying fastest, spacing in km.
  static SiteSet grid(std::size_t nx, std::size_t ny, double spacing_km = 1.0);
  /// Sites on the x axis at the given abscissae.
  static SiteSet line(const std::vector<double>& x_km);

  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  const Site& operator[](std::size_t i) const { return sites_[i]; }
  const std::vector<Site>& sites() const { return sites_; }

  /// True when every site carries a time coordinate.
  bool has_time() const;

  /// Detected (nx, ny) if the sites form a full rectangular grid listed in
  /// row-major order with x varying fastest.
  std::optional<std::pair<std::size_t, std::size_t>> grid_shape() const;

  /// Quadrature weights normalized to sum to one (cell areas when given,
  /// uniform otherwise).
  const Vec& quadrature_weights() const { return weights_; }

  /// Indices of sites sharing the given time coordinate (all sites when the
  /// design has no time axis).
  std::vector<std::size_t> slice(double t_hours) const;
  /// Sorted distinct time coordinates.
  std::vector<double> times() const;

  /// Sub-design restricted to the given indices (order preserved).
  SiteSet subset(const std::vector<std::size_t>& idx) const;

 private:
  std::vector<Site> sites_;
  Vec weights_;
};

/// Equirectangular projection of (lon, lat) degrees to planar km around a
/// reference latitude.
std::pair<double, double> project_equirectangular(double lon_deg, double lat_deg,
                                                  double ref_lat_deg);

/// One event: values at the L sites plus an identifier and time stamp.
struct FieldObservation {
  Vec values;
  std::string id;
  double time = 0.0;
};

}  // namespace fpot
