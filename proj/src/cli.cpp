#include "fpot/cli.hpp"

#include "fpot/gpd.hpp"
#include "fpot/infer.hpp"
#include "fpot/io.hpp"
#include "fpot/parallel.hpp"
#include "fpot/simulate.hpp"
#include "fpot/validate.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fpot {

namespace fs = std::filesystem;
using io::fmt;
using io::json;

namespace {

struct Context {
  json cfg;
  fs::path base;
  std::string hash;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
  std::string model_path;

  std::uint64_t need_seed() const {
    if (!seed) throw InvalidArgument("a seed is required for this command (--seed or \"seed\" in the config)");
    return *seed;
  }
  io::Provenance prov() const { return {hash, seed.value_or(0)}; }
  fs::path path(const std::string& p) const {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
  }
};

const json& section(const json& cfg, const char* key) {
  static const json empty = json::object();
  if (!cfg.contains(key)) return empty;
  if (!cfg.at(key).is_object()) throw InvalidArgument(std::string("config field '") + key + "' must be an object");
  return cfg.at(key);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument(std::string("config field '") + key + "' has the wrong type");
  }
}

Context load_context(const std::string& config, std::optional<std::uint64_t> seed, std::optional<unsigned> threads,
                     std::string out, std::string model_path) {
  if (config.empty()) throw InvalidArgument("--config is required");
  const fs::path p(config);
  if (!fs::exists(p)) throw InvalidArgument("config file not found: " + config);
  Context c;
  const auto text = io::read_text(p);
  try {
    c.cfg = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("malformed JSON config " + config + ": " + e.what());
  }
  if (!c.cfg.is_object()) throw InvalidArgument("config must be a JSON object");
  c.base = p.parent_path();
  c.hash = io::fnv1a_hex(text);
  c.seed = seed;
  if (!c.seed && c.cfg.contains("seed")) c.seed = get_or<std::uint64_t>(c.cfg, "seed", 0);
  c.threads = threads ? std::max(1u, *threads) : default_threads();
  c.out = std::move(out);
  c.model_path = std::move(model_path);
  if (c.model_path.empty() && c.cfg.contains("model_file")) c.model_path = c.path(c.cfg.at("model_file").get<std::string>()).string();
  return c;
}

void emit(const Context& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
  } else {
    io::write_text(c.out, text);
  }
}

void emit_json(const Context& c, json j) {
  j["provenance"] = io::provenance_json(c.prov());
  emit(c, j.dump(2) + "\n");
}

SiteSet load_sites(const Context& c) {
  if (!c.cfg.contains("sites")) throw InvalidArgument("config needs 'sites'");
  const auto& s = c.cfg.at("sites");
  if (s.is_string()) return io::read_sites_csv(c.path(s.get<std::string>()), get_or(c.cfg, "time_step_hours", 1.0));
  if (s.is_object() && s.contains("grid")) {
    const auto& g = s.at("grid");
    return SiteSet::grid(g.at("nx").get<std::size_t>(), g.at("ny").get<std::size_t>(), get_or(g, "spacing_km", 1.0));
  }
  if (s.is_object() && s.contains("line")) return SiteSet::line(s.at("line").get<std::vector<double>>());
  throw InvalidArgument("'sites' must be a CSV path or {\"grid\": ...} / {\"line\": [...]}");
}

RiskFunctional load_risk(const json& cfg, const SiteSet& sites) {
  if (!cfg.contains("risk")) throw InvalidArgument("config needs 'risk'");
  return io::risk_from_json(cfg.at("risk"), sites);
}

DependenceModel load_model(const json& cfg) {
  if (!cfg.contains("model")) throw InvalidArgument("config needs 'model'");
  return io::model_from_json(cfg.at("model"));
}

struct EventData {
  SiteSet sites;
  RiskFunctional r;
  std::vector<FieldObservation> rows;
  std::vector<double> series;  // r per row
  std::vector<ClusterPeak> peaks;
  double u_n = 0.0;
};

EventData load_events(const Context& c) {
  EventData d;
  d.sites = load_sites(c);
  d.r = load_risk(c.cfg, d.sites);
  if (!c.cfg.contains("observations")) throw InvalidArgument("config needs 'observations'");
  auto obs = io::read_observations_csv(c.path(c.cfg.at("observations").get<std::string>()), d.sites);
  d.rows = std::move(obs.rows);
  for (const auto& row : d.rows) d.series.push_back(evaluate(d.r, row.values, d.sites));

  const auto& th = section(c.cfg, "threshold");
  if (th.contains("u_n")) {
    d.u_n = get_or(th, "u_n", 0.0);
  } else if (th.contains("quantile")) {
    const double q = get_or(th, "quantile", 0.0);
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("threshold quantile must lie in (0, 1)");
    d.u_n = gpd::empirical_quantile(d.series, q);
  } else {
    throw InvalidArgument("config needs threshold.u_n or threshold.quantile");
  }

  if (c.cfg.contains("decluster")) {
    const auto& dc = section(c.cfg, "decluster");
    if (!dc.contains("separation_hours")) throw InvalidArgument("decluster needs 'separation_hours'");
    const double sep = get_or(dc, "separation_hours", 0.0);
    if (!(sep > 0.0)) throw InvalidArgument("decluster separation must be positive");
    d.peaks = decluster(obs.time, d.series, d.u_n, sep);
  } else {
    for (std::size_t i = 0; i < d.rows.size(); ++i)
      if (d.series[i] >= d.u_n) d.peaks.push_back({i, d.rows[i].time, d.series[i]});
  }
  if (d.peaks.empty()) throw InvalidArgument("no event exceeds the threshold");
  return d;
}

ExceedanceSet exceedances(const EventData& d) {
  std::vector<FieldObservation> ev;
  for (const auto& p : d.peaks) ev.push_back(d.rows[p.index]);
  return make_exceedance_set(std::move(ev), d.r, d.u_n);
}

json margins_json(const MarginalModel& m) {
  json j;
  j["xi"] = m.xi;
  j["se_xi"] = m.se_xi;
  j["a"] = io::vector_to_json(m.a);
  j["se_a"] = io::vector_to_json(m.se_a);
  j["b"] = io::vector_to_json(m.b);
  j["A"] = io::vector_to_json(m.A);
  j["B"] = io::vector_to_json(m.B);
  j["a_prime"] = m.a_prime;
  j["q_prime"] = m.q_prime;
  j["u_n"] = m.u_n;
  j["loglik"] = m.loglik;
  j["excluded"] = m.excluded;
  j["notes"] = m.notes;
  return j;
}

/// Per-site empirical q-quantiles over the exceedance events.
Vec site_quantiles(const ExceedanceSet& es, double q) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("extremogram quantile must lie in (0, 1)");
  const auto L = es.events[es.K.front()].values.size();
  Vec out(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    std::vector<double> col;
    for (auto k : es.K) col.push_back(es.events[k].values[l]);
    out[l] = gpd::empirical_quantile(std::move(col), q);
  }
  return out;
}

double extremogram_level(const json& cfg) {
  return get_or(section(cfg, "inference"), "extremogram_quantile", 0.9);
}

std::vector<std::string> free_params(const json& cfg, const DependenceModel& init) {
  if (!cfg.contains("free_parameters")) return parameter_names(init);
  return cfg.at("free_parameters").get<std::vector<std::string>>();
}

DependenceFit run_dependence(const Context& c, const std::string& method, const EventData& d, const ExceedanceSet& es,
                             const MarginalModel& mm) {
  const auto init = load_model(c.cfg);
  const auto names = free_params(c.cfg, init);
  const auto& inf = section(c.cfg, "inference");
  if (method == "ls") {
    const auto pairs = all_pairs(d.sites.size());
    const auto pihat = empirical_extremogram(es, site_quantiles(es, extremogram_level(c.cfg)), pairs);
    return fit_dependence_ls(d.sites, pairs, pihat, init, names);
  }
  if (method == "score" || method == "poisson") {
    if (!std::holds_alternative<BrownResnick>(init))
      throw InvalidArgument("--method " + method + " is implemented for the Brown-Resnick family only");
    const StandardizedRisk risk(d.r, mm.A, mm.xi);
    const auto y = standardize_events(es, mm);
    if (method == "score") {
      ScoreOptions opt;
      opt.n_subsets = get_or<std::size_t>(inf, "subsets", 100);
      opt.subset_size = get_or<std::size_t>(inf, "subset_size", 50);
      opt.seed = c.need_seed();
      opt.threads = c.threads;
      return fit_dependence_score(y, d.sites, risk, init, names, opt);
    }
    return fit_dependence_poisson(y, d.sites, risk, init, names, 1.0, get_or<std::size_t>(inf, "mc_draws", 20000),
                                  c.need_seed(), c.threads);
  }
  throw InvalidArgument("unknown inference method '" + method + "' (expected ls, score or poisson)");
}

json dependence_json(const DependenceFit& f, const std::string& method) {
  json j;
  j["method"] = method;
  j["model"] = io::model_to_json(f.model);
  j["names"] = f.names;
  j["theta"] = io::vector_to_json(f.theta);
  j["se"] = io::vector_to_json(f.se);
  j["objective"] = f.objective;
  j["evals"] = f.evals;
  j["converged"] = f.converged;
  j["seed"] = f.seed;
  j["subsets"] = f.subsets;
  if (f.lambda_mass) j["lambda_mass"] = *f.lambda_mass;
  if (f.lambda_se) j["lambda_se"] = *f.lambda_se;
  return j;
}

// -- commands -------------------------------------------------------------------

int cmd_decluster(const Context& c) {
  const auto d = load_events(c);
  std::ostringstream os;
  os << io::provenance_line(c.prov());
  os << "# u_n=" << fmt(d.u_n) << "\n";
  os << "index,time,risk\n";
  for (const auto& p : d.peaks) os << p.index << "," << fmt(p.time) << "," << fmt(p.risk) << "\n";
  emit(c, os.str());
  return 0;
}

int cmd_fit_margins(const Context& c) {
  const auto d = load_events(c);
  const auto es = exceedances(d);
  const auto mm = fit_margins(es, d.r, get_or(section(c.cfg, "inference"), "storm_weights", false));
  json j = margins_json(mm);
  j["n_events"] = d.peaks.size();
  j["n_exceedances"] = es.K.size();
  emit_json(c, j);
  return 0;
}

std::string method_of(const Context& c, const std::string& flag) {
  if (!flag.empty()) return flag;
  return get_or<std::string>(section(c.cfg, "inference"), "method", "ls");
}

int cmd_fit_dependence(const Context& c, const std::string& method_flag) {
  const auto method = method_of(c, method_flag);
  const auto d = load_events(c);
  const auto es = exceedances(d);
  const auto mm = fit_margins(es, d.r, get_or(section(c.cfg, "inference"), "storm_weights", false));
  emit_json(c, dependence_json(run_dependence(c, method, d, es, mm), method));
  return 0;
}

int cmd_fit(const Context& c, const std::string& method_flag) {
  const auto method = method_of(c, method_flag);
  const auto d = load_events(c);
  const auto es = exceedances(d);
  const auto mm = fit_margins(es, d.r, get_or(section(c.cfg, "inference"), "storm_weights", false));
  const auto dep = run_dependence(c, method, d, es, mm);
  json j;
  j["risk"] = io::risk_to_json(d.r);
  j["margins"] = margins_json(mm);
  j["xi"] = mm.xi;
  j["a"] = io::vector_to_json(mm.a);
  j["b"] = io::vector_to_json(mm.b);
  j["dependence"] = dependence_json(dep, method);
  j["model"] = j["dependence"]["model"];
  j["n_exceedances"] = es.K.size();
  j["provenance"] = io::provenance_json(c.prov());
  const auto text = j.dump(2) + "\n";
  if (c.out.empty()) {
    const fs::path dir = c.path(get_or<std::string>(c.cfg, "output_dir", "."));
    io::write_text(dir / "model.json", text);
  } else {
    io::write_text(c.out, text);
  }
  return 0;
}

/// Simulation parameters: the model file first, then the config's
/// simulation section, then its top-level model and risk.
struct SimSetup {
  double xi = 0.0;
  Vec a, b;
  RiskFunctional r;
  DependenceModel dep;
  SiteSet sites;
  json sim;
};

SimSetup load_sim_setup(const Context& c) {
  SimSetup s;
  s.sites = load_sites(c);
  s.sim = section(c.cfg, "simulation");
  json model_file = json::object();
  if (!c.model_path.empty()) {
    try {
      model_file = json::parse(io::read_text(c.model_path));
    } catch (const json::parse_error& e) {
      throw InvalidArgument("malformed model file " + c.model_path + ": " + e.what());
    }
  }
  auto pick = [&](const char* key) -> const json* {
    if (s.sim.contains(key)) return &s.sim.at(key);
    if (model_file.contains(key)) return &model_file.at(key);
    if (c.cfg.contains(key)) return &c.cfg.at(key);
    return nullptr;
  };
  const auto L = s.sites.size();
  const json* xi = pick("xi");
  const json* a = pick("a");
  const json* b = pick("b");
  if (!xi || !a || !b) throw InvalidArgument("simulation needs xi, a and b (config simulation section or model file)");
  s.xi = xi->get<double>();
  s.a = io::vector_from_json(*a, L, "a");
  s.b = io::vector_from_json(*b, L, "b");
  const json* model = pick("model");
  if (!model) throw InvalidArgument("simulation needs a dependence model");
  s.dep = io::model_from_json(*model);
  s.sim["__risk"] = pick("risk") ? *pick("risk") : json();
  return s;
}

struct Simulated {
  std::vector<Vec> samples;
  std::vector<double> risk;
  json meta;
  std::optional<ProcessSpec> spec;
};

Simulated run_simulation(const Context& c, std::optional<double> fixed_risk, bool conditional_peak) {
  auto s = load_sim_setup(c);
  const auto n = get_or<std::size_t>(s.sim, "n", 1000);
  if (n == 0) throw InvalidArgument("simulation.n must be positive");
  SimOptions opt;
  opt.seed = c.need_seed();
  opt.threads = c.threads;
  const json risk_cfg = s.sim["__risk"];
  if (risk_cfg.is_null()) throw InvalidArgument("simulation needs a risk functional");
  if (!fixed_risk && s.sim.contains("fixed_risk") && !s.sim.at("fixed_risk").is_null())
    fixed_risk = s.sim.at("fixed_risk").get<double>();
  conditional_peak = conditional_peak || get_or(s.sim, "conditional_peak", false);

  Simulated out;
  if (conditional_peak) {
    if (fixed_risk) throw InvalidArgument("--fixed-risk and --conditional-peak cannot be combined");
    const auto* br = std::get_if<BrownResnick>(&s.dep);
    if (!br) throw InvalidArgument("conditional storm simulation needs a Brown-Resnick model");
    if (!s.sites.has_time()) throw InvalidArgument("conditional storm simulation needs sites with t_index");
    const auto times = s.sites.times();
    StormSpec st;
    st.xi = s.xi;
    st.a = s.a;
    st.b = s.b;
    st.dep = *br;
    st.sites = s.sites;
    st.centre_time = get_or(s.sim, "centre_time", times[times.size() / 2]);
    st.r = io::risk_from_json(risk_cfg, s.sites.subset(s.sites.slice(st.centre_time)));
    auto res = simulate_storm_conditional(st, n, opt);
    out.samples = std::move(res.samples);
    out.risk = std::move(res.centre_risk);
    out.meta = {{"algorithm", "storm"},
                {"centre_time", st.centre_time},
                {"proposals", res.proposals},
                {"storm_rejections", res.storm_rejections},
                {"accept_rate", res.accept_rate}};
    return out;
  }

  const auto r = io::risk_from_json(risk_cfg, s.sites);
  auto spec = ProcessSpec::make(s.xi, s.a, s.b, r, s.dep, s.sites);
  std::string alg = get_or<std::string>(s.sim, "algorithm", r.linear ? "alg2" : "alg1");
  if (fixed_risk) alg = "alg2";
  SimResult res;
  if (alg == "alg2") {
    if (!r.linear) throw InvalidArgument("algorithm alg2 needs a linear risk functional");
    res = simulate_alg2(spec, fixed_risk, n, opt);
  } else if (alg == "alg1") {
    SimBound bound;
    if (s.sim.contains("bound_u")) {
      bound.u = get_or(s.sim, "bound_u", 1.0);
    } else if (auto cf = sim_bound_closed_form(spec)) {
      bound = *cf;
    } else {
      bound = sim_bound(spec, get_or<std::size_t>(s.sim, "bound_directions", 2000), get_or(s.sim, "bound_safety", 0.9),
                        opt.seed);
    }
    res = simulate_alg1(spec, bound, n, opt);
    out.meta["bound_u"] = bound.u;
    if (std::isfinite(res.min_margin)) out.meta["min_margin"] = res.min_margin;
  } else {
    throw InvalidArgument("unknown simulation algorithm '" + alg + "'");
  }
  out.samples = std::move(res.samples);
  for (const auto& x : out.samples) out.risk.push_back(fixed_risk ? *fixed_risk : evaluate(r, x, s.sites));
  out.meta["algorithm"] = alg;
  out.meta["proposals"] = res.proposals;
  out.meta["accept_rate"] = res.accept_rate;
  out.spec = std::move(spec);
  return out;
}

int cmd_simulate(const Context& c, std::optional<double> fixed_risk, bool conditional_peak) {
  const auto sim = run_simulation(c, fixed_risk, conditional_peak);
  const auto sites = load_sites(c);
  std::ostringstream os;
  os << io::provenance_line(c.prov());
  for (const auto& s : sites.sites()) os << s.id << ",";
  os << "risk\n";
  for (std::size_t k = 0; k < sim.samples.size(); ++k) {
    for (Eigen::Index l = 0; l < sim.samples[k].size(); ++l) os << fmt(sim.samples[k][l]) << ",";
    os << fmt(sim.risk[k]) << "\n";
  }
  emit(c, os.str());
  json meta = sim.meta;
  meta["n"] = sim.samples.size();
  meta["provenance"] = io::provenance_json(c.prov());
  const auto meta_text = meta.dump(2) + "\n";
  if (c.out.empty()) {
    std::cerr << meta_text;
  } else {
    io::write_text(c.out + ".meta.json", meta_text);
  }
  return 0;
}

LagGrid lag_grid(const json& cfg, const SiteSet& sites) {
  const auto& g = section(cfg, "lag_grid");
  LagGrid grid;
  if (g.contains("dist_edges")) {
    grid.dist_edges = g.at("dist_edges").get<std::vector<double>>();
  } else {
    double dmax = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i)
      for (std::size_t j = i + 1; j < sites.size(); ++j)
        dmax = std::max(dmax, site_lag(sites[i], sites[j]).first.norm());
    const auto nb = get_or<std::size_t>(g, "bins", 10);
    grid.dist_edges.clear();
    for (std::size_t k = 0; k <= nb; ++k)
      grid.dist_edges.push_back(dmax * (1.0 + 1e-9) * static_cast<double>(k) / static_cast<double>(nb));
    grid.dist_edges.front() = 1e-12;
  }
  grid.n_orientations = get_or<std::size_t>(g, "orientations", 1);
  if (g.contains("time_lags")) grid.time_lags = g.at("time_lags").get<std::vector<double>>();
  return grid;
}

std::string extremogram_csv(const Context& c, const std::vector<ExtremogramRow>& rows) {
  std::ostringstream os;
  os << io::provenance_line(c.prov());
  os << "lag_h,lag_km,angle_deg,n_pairs,empirical,model\n";
  for (const auto& r : rows)
    os << fmt(r.lag_h) << "," << fmt(r.lag_km) << "," << fmt(r.angle_deg) << "," << r.n_pairs << ","
       << (r.empirical ? fmt(*r.empirical) : std::string("NA")) << "," << fmt(r.model) << "\n";
  return os.str();
}

int cmd_extremogram(const Context& c) {
  const auto d = load_events(c);
  const auto es = exceedances(d);
  const auto mm = fit_margins(es, d.r, get_or(section(c.cfg, "inference"), "storm_weights", false));
  DependenceModel dep;
  if (!c.model_path.empty()) {
    dep = io::model_from_json(json::parse(io::read_text(c.model_path)).at("model"));
  } else {
    dep = load_model(c.cfg);
  }
  std::vector<Vec> fields;
  for (auto k : es.K) fields.push_back(es.events[k].values);
  const Vec thr = site_quantiles(es, extremogram_level(c.cfg));
  emit(c, extremogram_csv(c, extremogram_compare(d.sites, fields, thr, dep, lag_grid(c.cfg, d.sites))));
  return 0;
}

int cmd_validate(const Context& c, const std::string& what, const std::string& site_arg, std::optional<double> u0_arg) {
  const auto& val = section(c.cfg, "validation");
  if (what == "qq") {
    const auto d = load_events(c);
    const auto es = exceedances(d);
    const auto mm = fit_margins(es, d.r, get_or(section(c.cfg, "inference"), "storm_weights", false));
    std::vector<double> ex;
    for (auto k : es.K) ex.push_back(es.risk[k] - es.u_n);
    const auto rep = qq_gpd(ex, {mm.xi, mm.a_prime, 0.0}, get_or<std::size_t>(val, "replicates", 200),
                            get_or(val, "level", 0.95), std::nullopt, c.need_seed(), c.threads);
    std::ostringstream os;
    os << io::provenance_line(c.prov());
    os << "# outside=" << rep.outside << " level=" << fmt(rep.level) << "\n";
    os << "empirical,model,lower,upper\n";
    for (std::size_t i = 0; i < rep.empirical.size(); ++i)
      os << fmt(rep.empirical[i]) << "," << fmt(rep.model[i]) << "," << fmt(rep.lower[i]) << "," << fmt(rep.upper[i])
         << "\n";
    emit(c, os.str());
    return 0;
  }
  if (what == "risk" || what == "marginal") {
    const auto sim = run_simulation(c, std::nullopt, false);
    const auto& spec = *sim.spec;
    json j;
    j["check"] = what;
    j["n"] = sim.samples.size();
    if (what == "risk") {
      j["ks"] = risk_gpd_check(sim.samples, spec).ks;
    } else {
      std::size_t s0 = 0;
      if (!site_arg.empty()) {
        const auto& ss = spec.sites.sites();
        auto it = std::find_if(ss.begin(), ss.end(), [&](const Site& s) { return s.id == site_arg; });
        if (it != ss.end()) {
          s0 = static_cast<std::size_t>(it - ss.begin());
        } else {
          try {
            s0 = std::stoul(site_arg);
          } catch (const std::exception&) {
            throw InvalidArgument("unknown site '" + site_arg + "'");
          }
        }
      }
      if (s0 >= spec.sites.size()) throw InvalidArgument("site index out of range");
      const double u0 = u0_arg.value_or(spec.b[static_cast<Eigen::Index>(s0)]);
      j["site"] = s0;
      j["u0"] = u0;
      j["ks"] = marginal_conditional_check(sim.samples, spec, s0, u0, 2000, c.need_seed());
    }
    emit_json(c, j);
    return 0;
  }
  if (what == "extremogram") {
    const auto sim = run_simulation(c, std::nullopt, false);
    const auto& spec = *sim.spec;
    const Vec thr = val.contains("thresholds") ? io::vector_from_json(val.at("thresholds"), spec.sites.size(), "thresholds")
                                               : spec.b;
    emit(c, extremogram_csv(c, extremogram_compare(spec.sites, sim.samples, thr, spec.dep, lag_grid(c.cfg, spec.sites))));
    return 0;
  }
  throw InvalidArgument("unknown validation '" + what + "' (expected qq, risk, marginal or extremogram)");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Functional peaks-over-threshold analysis with generalized r-Pareto processes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(FPOT_VERSION));

  std::string config, out, model_path, method, what = "risk", site;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> fixed_risk, u0;
  bool conditional_peak = false;

  auto globals = [&](CLI::App* sub) {
    sub->add_option("--config,-c", config, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads, "worker threads (default: all cores)");
    sub->add_option("--out,-o", out, "output file (default: stdout)");
  };

  auto* dc = app.add_subcommand("decluster", "decluster the risk series and list the events");
  auto* fm = app.add_subcommand("fit-margins", "fit the marginal model");
  auto* fd = app.add_subcommand("fit-dependence", "fit the dependence model");
  auto* ft = app.add_subcommand("fit", "fit margins and dependence and write model.json");
  auto* sm = app.add_subcommand("simulate", "simulate a generalized r-Pareto process");
  auto* va = app.add_subcommand("validate", "model checks");
  auto* ex = app.add_subcommand("extremogram", "empirical against model extremogram");
  for (auto* s : {dc, fm, fd, ft, sm, va, ex}) globals(s);
  for (auto* s : {fd, ft})
    s->add_option("--method", method, "ls, score or poisson")->check(CLI::IsMember({"ls", "score", "poisson"}));
  for (auto* s : {sm, va, ex}) s->add_option("--model", model_path, "fitted model JSON");
  sm->add_option("--fixed-risk", fixed_risk, "simulate at this exact risk level");
  sm->add_flag("--conditional-peak", conditional_peak, "storms peaking at the centre time");
  va->add_option("check", what, "qq, risk, marginal or extremogram")
      ->required()
      ->check(CLI::IsMember({"qq", "risk", "marginal", "extremogram"}));
  va->add_option("--site", site, "site id or index for the marginal check");
  va->add_option("--u0", u0, "threshold for the marginal check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto ctx = load_context(config, seed, threads, out, model_path);
    if (dc->parsed()) return cmd_decluster(ctx);
    if (fm->parsed()) return cmd_fit_margins(ctx);
    if (fd->parsed()) return cmd_fit_dependence(ctx, method);
    if (ft->parsed()) return cmd_fit(ctx, method);
    if (sm->parsed()) return cmd_simulate(ctx, fixed_risk, conditional_peak);
    if (va->parsed()) return cmd_validate(ctx, what, site, u0);
    if (ex->parsed()) return cmd_extremogram(ctx);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace fpot
