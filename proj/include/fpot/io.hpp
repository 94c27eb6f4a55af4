#pragma once

#include "fpot/common.hpp"
#include "fpot/depmodel.hpp"
#include "fpot/riskfunc.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fpot::io {

using json = nlohmann::json;

/// Sites CSV with header `site_id,x_km,y_km[,t_index]`; the time coordinate
/// is t_index * time_step_hours.
SiteSet read_sites_csv(const std::filesystem::path& path, double time_step_hours = 1.0);

struct Observations {
  std::vector<double> time;
  std::vector<FieldObservation> rows;  // values reordered to the site order
};

/// Observations CSV with header `time,<site ids>`; columns may come in any
/// order but every site must be present.
Observations read_observations_csv(const std::filesystem::path& path, const SiteSet& sites);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

/// Round-trip decimal form ("%.17g").
std::string fmt(double v);

/// 64-bit FNV-1a hash, hex encoded.
std::string fnv1a_hex(std::string_view data);

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = FPOT_VERSION;
};

/// "# fpot <version> config=<hash> seed=<seed>\n"
std::string provenance_line(const Provenance& p);
json provenance_json(const Provenance& p);

RiskFunctional risk_from_json(const json& j, const SiteSet& sites);
json risk_to_json(const RiskFunctional& r);

SpaceTimeMetric metric_from_json(const json& j);
json metric_to_json(const SpaceTimeMetric& m);
/// {"family": "brown_resnick", "variogram": {...}, "metric": {...}} or
/// {"family": "extremal_t", "df": .., "correlation": {...}, "metric": {...}}.
/// Angles are given in degrees under "eta_deg" or radians under "eta".
DependenceModel model_from_json(const json& j);
json model_to_json(const DependenceModel& d);

/// Scalar or per-site array.
Vec vector_from_json(const json& j, std::size_t n, const char* what);
json vector_to_json(const Vec& v);

}  // namespace fpot::io
