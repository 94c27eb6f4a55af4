#include "fpot/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace fpot::io {

namespace {
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

std::vector<std::pair<std::size_t, std::vector<std::string>>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open file: " + path.string());
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.emplace_back(no, split_csv(line));
  }
  if (rows.empty()) throw InvalidArgument("empty CSV file: " + path.string());
  return rows;
}

double num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw InvalidArgument(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

double req(const json& j, const char* key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("missing field '") + key + "'");
  return num(j, key, 0.0);
}
}  // namespace

SiteSet read_sites_csv(const std::filesystem::path& path, double time_step_hours) {
  const auto rows = read_csv(path);
  const auto& head = rows.front().second;
  if (head.size() < 3 || head[0] != "site_id" || head[1] != "x_km" || head[2] != "y_km")
    throw InvalidArgument(path.string() + ": header must be site_id,x_km,y_km[,t_index]");
  const bool timed = head.size() >= 4 && head[3] == "t_index";
  std::vector<Site> sites;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [no, f] = rows[r];
    if (f.size() != head.size()) throw InvalidArgument(path.string() + ":" + std::to_string(no) + ": wrong field count");
    Site s;
    s.id = f[0];
    s.x_km = to_double(f[1], path, no);
    s.y_km = to_double(f[2], path, no);
    if (timed) s.t_hours = to_double(f[3], path, no) * time_step_hours;
    sites.push_back(std::move(s));
  }
  if (sites.empty()) throw InvalidArgument(path.string() + ": no sites");
  return SiteSet(std::move(sites));
}

Observations read_observations_csv(const std::filesystem::path& path, const SiteSet& sites) {
  const auto rows = read_csv(path);
  const auto& head = rows.front().second;
  if (head.empty() || head[0] != "time") throw InvalidArgument(path.string() + ": first column must be 'time'");
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 1; c < head.size(); ++c) col[head[c]] = c;
  std::vector<std::size_t> pick;
  for (const auto& s : sites.sites()) {
    auto it = col.find(s.id);
    if (it == col.end()) throw InvalidArgument(path.string() + ": no column for site '" + s.id + "'");
    pick.push_back(it->second);
  }
  Observations obs;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [no, f] = rows[r];
    if (f.size() != head.size()) throw InvalidArgument(path.string() + ":" + std::to_string(no) + ": wrong field count");
    FieldObservation o;
    o.time = to_double(f[0], path, no);
    o.id = f[0];
    o.values.resize(static_cast<Eigen::Index>(pick.size()));
    for (std::size_t k = 0; k < pick.size(); ++k) o.values[static_cast<Eigen::Index>(k)] = to_double(f[pick[k]], path, no);
    obs.time.push_back(o.time);
    obs.rows.push_back(std::move(o));
  }
  if (obs.rows.empty()) throw InvalidArgument(path.string() + ": no observations");
  return obs;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write file: " + path.string());
  out << content;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string provenance_line(const Provenance& p) {
  return "# fpot " + p.version + " config=" + p.config_hash + " seed=" + std::to_string(p.seed) + "\n";
}

json provenance_json(const Provenance& p) {
  return {{"version", p.version}, {"config_hash", p.config_hash}, {"seed", p.seed}};
}

RiskFunctional risk_from_json(const json& j, const SiteSet& sites) {
  if (!j.is_object() || !j.contains("kind")) throw InvalidArgument("risk specification needs a 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  const auto n = sites.size();
  if (kind == "site_eval") {
    const auto s = j.at("site").get<std::size_t>();
    if (s >= n) throw InvalidArgument("risk site index out of range");
    return RiskFunctional::site_eval(s);
  }
  if (kind == "weighted_mean") {
    if (!j.contains("weights") || j.at("weights") == "uniform") return RiskFunctional::uniform_mean(n);
    if (j.at("weights") == "area") return RiskFunctional::spatial_mean(sites);
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != n) throw InvalidArgument("risk weights must have one entry per site");
    return RiskFunctional::weighted_mean(std::move(w));
  }
  if (kind == "sum") return RiskFunctional::linear_combination(std::vector<double>(n, 1.0));
  if (kind == "linear_combination") {
    auto c = j.at("coefficients").get<std::vector<double>>();
    if (c.size() != n) throw InvalidArgument("risk coefficients must have one entry per site");
    return RiskFunctional::linear_combination(std::move(c));
  }
  if (kind == "supremum") return RiskFunctional::supremum();
  if (kind == "fourier_filtered_mean") {
    auto shape = sites.grid_shape();
    const auto nx = j.contains("nx") ? j.at("nx").get<std::size_t>() : (shape ? shape->first : 0);
    const auto ny = j.contains("ny") ? j.at("ny").get<std::size_t>() : (shape ? shape->second : 0);
    if (nx * ny != n) throw InvalidArgument("Fourier filter grid does not match the sites");
    return RiskFunctional::fourier_filtered_mean(nx, ny, j.value("cutoff", std::size_t{0}));
  }
  if (kind == "max_composite" || kind == "min_compound") {
    std::vector<RiskFunctional> members;
    for (const auto& m : j.at("members")) members.push_back(risk_from_json(m, sites));
    auto u = j.at("thresholds").get<std::vector<double>>();
    return kind == "max_composite" ? RiskFunctional::max_composite(std::move(members), std::move(u))
                                   : RiskFunctional::min_compound(std::move(members), std::move(u));
  }
  throw InvalidArgument("unknown risk kind '" + kind + "'");
}

json risk_to_json(const RiskFunctional& r) {
  using K = RiskFunctional::Kind;
  switch (r.kind) {
    case K::SiteEval: return {{"kind", "site_eval"}, {"site", r.site}};
    case K::WeightedMean: return {{"kind", "weighted_mean"}, {"weights", r.weights}};
    case K::LinearCombination: return {{"kind", "linear_combination"}, {"coefficients", r.weights}};
    case K::Supremum: return {{"kind", "supremum"}};
    case K::FourierFilteredMean: return {{"kind", "fourier_filtered_mean"}, {"nx", r.nx}, {"ny", r.ny}, {"cutoff", r.cutoff}};
    case K::MaxComposite:
    case K::MinCompound: {
      json m = json::array();
      for (const auto& x : r.members) m.push_back(risk_to_json(x));
      return {{"kind", r.kind == K::MaxComposite ? "max_composite" : "min_compound"}, {"members", m}, {"thresholds", r.thresholds}};
    }
  }
  return {};
}

SpaceTimeMetric metric_from_json(const json& j) {
  SpaceTimeMetric m;
  if (j.is_null()) return m;
  m.tau_s = num(j, "tau_s", 1.0);
  m.tau_t = num(j, "tau_t", 1.0);
  m.a = num(j, "a", 1.0);
  m.eta = j.contains("eta_deg") ? num(j, "eta_deg", 0.0) * std::numbers::pi / 180.0 : num(j, "eta", 0.0);
  if (j.contains("V")) {
    const auto v = j.at("V").get<std::vector<double>>();
    if (v.size() != 2) throw InvalidArgument("advection V must have two components");
    m.V = Eigen::Vector2d(v[0], v[1]);
  }
  m.validate();
  return m;
}

json metric_to_json(const SpaceTimeMetric& m) {
  return {{"tau_s", m.tau_s}, {"tau_t", m.tau_t}, {"eta", m.eta}, {"a", m.a}, {"V", {m.V[0], m.V[1]}}};
}

DependenceModel model_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("dependence model must be a JSON object");
  const auto family = j.value("family", std::string("brown_resnick"));
  const auto metric = metric_from_json(j.contains("metric") ? j.at("metric") : json());
  if (family == "brown_resnick") {
    if (!j.contains("variogram")) throw InvalidArgument("Brown-Resnick model needs a 'variogram'");
    const auto& v = j.at("variogram");
    const auto kind = v.value("kind", std::string());
    Variogram g;
    if (kind == "whittle_matern") {
      g = Variogram::whittle_matern(req(v, "kappa"), num(v, "nu", 1.0), metric);
    } else if (kind == "power") {
      g = Variogram::power(req(v, "tau"), req(v, "nu"), metric);
    } else if (kind == "power_exponential") {
      g = Variogram::power_exponential(req(v, "c"), req(v, "tau"), req(v, "nu"), metric);
    } else {
      throw InvalidArgument("unknown variogram kind '" + kind + "'");
    }
    return BrownResnick{g};
  }
  if (family == "extremal_t") {
    ExtremalT et;
    et.df = req(j, "df");
    const auto& c = j.contains("correlation") ? j.at("correlation") : json::object();
    const auto kind = c.value("kind", std::string("power_exponential"));
    if (kind == "power_exponential") {
      et.correlation.kind = Correlation::Kind::PowerExponential;
    } else if (kind == "whittle_matern") {
      et.correlation.kind = Correlation::Kind::WhittleMatern;
    } else {
      throw InvalidArgument("unknown correlation kind '" + kind + "'");
    }
    et.correlation.nu = num(c, "nu", 1.0);
    et.correlation.metric = metric;
    DependenceModel d = et;
    validate(d);
    return d;
  }
  throw InvalidArgument("unknown dependence family '" + family + "'");
}

json model_to_json(const DependenceModel& d) {
  if (const auto* br = std::get_if<BrownResnick>(&d)) {
    const auto& g = br->variogram;
    json v;
    switch (g.kind) {
      case Variogram::Kind::WhittleMatern: v = {{"kind", "whittle_matern"}, {"kappa", g.kappa}, {"nu", g.nu}}; break;
      case Variogram::Kind::Power: v = {{"kind", "power"}, {"tau", g.tau}, {"nu", g.nu}}; break;
      case Variogram::Kind::PowerExponential:
        v = {{"kind", "power_exponential"}, {"c", g.c}, {"tau", g.tau}, {"nu", g.nu}};
        break;
    }
    return {{"family", "brown_resnick"}, {"variogram", v}, {"metric", metric_to_json(g.metric)}};
  }
  const auto& et = std::get<ExtremalT>(d);
  return {{"family", "extremal_t"},
          {"df", et.df},
          {"correlation",
           {{"kind", et.correlation.kind == Correlation::Kind::PowerExponential ? "power_exponential" : "whittle_matern"},
            {"nu", et.correlation.nu}}},
          {"metric", metric_to_json(et.correlation.metric)}};
}

Vec vector_from_json(const json& j, std::size_t n, const char* what) {
  if (j.is_number()) return Vec::Constant(static_cast<Eigen::Index>(n), j.get<double>());
  if (!j.is_array()) throw InvalidArgument(std::string(what) + " must be a number or an array");
  const auto v = j.get<std::vector<double>>();
  if (v.size() != n) throw InvalidArgument(std::string(what) + " must have one entry per site");
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(n));
}

json vector_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace fpot::io
