#include "fpot/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace fpot;
namespace fs = std::filesystem;

namespace {
fs::path tmp(const std::string& name) {
  const auto d = fs::temp_directory_path() / "fpot_test_io";
  fs::create_directories(d);
  return d / name;
}
}  // namespace

TEST(Csv, ReadsSitesWithTime) {
  io::write_text(tmp("s.csv"), "site_id,x_km,y_km,t_index\na,0,1,0\nb,2,3,1\n");
  const auto s = io::read_sites_csv(tmp("s.csv"), 6.0);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].id, "b");
  EXPECT_DOUBLE_EQ(*s[1].t_hours, 6.0);
  EXPECT_TRUE(s.has_time());
}

TEST(Csv, RejectsBadHeaderAndNumbers) {
  io::write_text(tmp("bad.csv"), "id,x,y\na,0,0\n");
  EXPECT_THROW(io::read_sites_csv(tmp("bad.csv")), InvalidArgument);
  io::write_text(tmp("bad2.csv"), "site_id,x_km,y_km\na,zero,0\n");
  EXPECT_THROW(io::read_sites_csv(tmp("bad2.csv")), InvalidArgument);
  EXPECT_THROW(io::read_sites_csv(tmp("missing.csv")), InvalidArgument);
}

TEST(Csv, ObservationsReorderedToSites) {
  io::write_text(tmp("s2.csv"), "site_id,x_km,y_km\na,0,0\nb,1,0\n");
  io::write_text(tmp("o.csv"), "# comment\ntime,b,a\n0,2,1\n6,4,3\n");
  const auto s = io::read_sites_csv(tmp("s2.csv"));
  const auto o = io::read_observations_csv(tmp("o.csv"), s);
  ASSERT_EQ(o.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(o.rows[1].values[0], 3.0);
  EXPECT_DOUBLE_EQ(o.rows[1].values[1], 4.0);
  EXPECT_DOUBLE_EQ(o.time[1], 6.0);
  io::write_text(tmp("o2.csv"), "time,a\n0,1\n");
  EXPECT_THROW(io::read_observations_csv(tmp("o2.csv"), s), InvalidArgument);
}

TEST(Format, RoundTripAndHash) {
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(io::fmt(v)), v);
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(io::provenance_line({"abc", 7}), std::string("# fpot ") + FPOT_VERSION + " config=abc seed=7\n");
}

TEST(Json, ModelRoundTrip) {
  const auto j = io::json::parse(R"({"family": "brown_resnick",
    "variogram": {"kind": "whittle_matern", "kappa": 3.5, "nu": 1.0},
    "metric": {"tau_s": 614, "tau_t": 23.8, "a": 1.41, "eta_deg": -4.12, "V": [51.3, 14.4]}})");
  const auto m = io::model_from_json(j);
  const auto& g = std::get<BrownResnick>(m).variogram;
  EXPECT_DOUBLE_EQ(g.kappa, 3.5);
  EXPECT_NEAR(g.metric.eta, -4.12 * std::numbers::pi / 180, 1e-15);
  const auto back = io::model_from_json(io::model_to_json(m));
  EXPECT_EQ(io::model_to_json(back), io::model_to_json(m));
  EXPECT_THROW(io::model_from_json(io::json::parse(R"({"family": "other"})")), InvalidArgument);
}

TEST(Json, ExtremalTModel) {
  const auto m = io::model_from_json(io::json::parse(R"({"family": "extremal_t", "df": 3,
    "correlation": {"kind": "power_exponential", "nu": 1.5}, "metric": {"tau_s": 50}})"));
  EXPECT_DOUBLE_EQ(std::get<ExtremalT>(m).df, 3.0);
}

TEST(Json, RiskFunctionals) {
  const auto sites = SiteSet::grid(2, 2);
  EXPECT_EQ(io::risk_from_json(io::json::parse(R"({"kind": "supremum"})"), sites).kind, RiskFunctional::Kind::Supremum);
  const auto mean = io::risk_from_json(io::json::parse(R"({"kind": "weighted_mean", "weights": "uniform"})"), sites);
  EXPECT_DOUBLE_EQ(evaluate(mean, Vec::LinSpaced(4, 1, 4)), 2.5);
  const auto f = io::risk_from_json(io::json::parse(R"({"kind": "fourier_filtered_mean", "cutoff": 1})"), sites);
  EXPECT_EQ(f.nx, 2u);
  const auto c = io::risk_from_json(
      io::json::parse(R"({"kind": "max_composite", "members": [{"kind": "supremum"}, {"kind": "sum"}], "thresholds": [1, 2]})"),
      sites);
  EXPECT_EQ(c.members.size(), 2u);
  EXPECT_THROW(io::risk_from_json(io::json::parse(R"({"kind": "median"})"), sites), InvalidArgument);
  EXPECT_THROW(io::risk_from_json(io::json::parse(R"({"kind": "weighted_mean", "weights": [1]})"), sites),
               InvalidArgument);
}

TEST(Json, VectorsFromScalarOrArray) {
  EXPECT_EQ(io::vector_from_json(2.0, 3, "a"), Vec::Constant(3, 2.0));
  EXPECT_THROW(io::vector_from_json(io::json::array({1, 2}), 3, "a"), InvalidArgument);
}
