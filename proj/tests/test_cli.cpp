#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cpass/experiment.hpp"
#include "cpass/model.hpp"

using namespace cpass;
using doctest::Approx;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("an empty config yields the reference defaults") {
  const auto spec = expt::parse_config_text("{}");
  CHECK(spec.base.num_ports == 2);
  CHECK(spec.base.num_pas_per_direction == 10);
  CHECK(spec.base.transmit_power_dbm == Approx(20.0));
  CHECK(spec.base.noise_power_dbm == Approx(-80.0));
  CHECK(spec.base.port_spacing_m == Approx(1.25 * spec.base.guided_wavelength()));
  CHECK(spec.base.pa_spacing_m == Approx(1.0));
  CHECK(spec.base.max_displacement_m == Approx(0.01));
  CHECK(spec.base.penalty_init == Approx(0.1));
  CHECK(spec.base.penalty_growth == Approx(1.02));
  CHECK(spec.base.displacement_grid_points == 1000);
  CHECK(spec.base.max_iterations == 1000);
  CHECK(spec.protocols.size() == 3);
  CHECK(spec.realizations == 200);
}

TEST_CASE("validation errors name the offending key") {
  CHECK_THROWS_WITH_AS(expt::parse_config_text(R"({"num_ports": 0})"),
                       doctest::Contains("num_ports"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(expt::parse_config_text(R"({"banana": 1})"),
                       doctest::Contains("banana"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(expt::parse_config_text(R"({"num_ports": "two"})"),
                       doctest::Contains("num_ports"), std::invalid_argument);
  CHECK_THROWS_AS(expt::parse_config_text(R"({"protocols": []})"), std::invalid_argument);
  CHECK_THROWS_AS(expt::parse_config_text("not json"), std::invalid_argument);
}

TEST_CASE("emitted defaults re-parse to an identical spec") {
  const expt::ExperimentSpec spec;
  const auto round = expt::parse_config_text(expt::spec_to_text(spec));
  CHECK(round.base.num_ports == spec.base.num_ports);
  CHECK(round.base.transmit_power_dbm == spec.base.transmit_power_dbm);
  CHECK(round.base.port_spacing_m == Approx(spec.base.port_spacing_m).epsilon(1e-15));
  CHECK(round.protocols == spec.protocols);
  CHECK(round.seed == spec.seed);
  CHECK(round.format == spec.format);
}

TEST_CASE("sweep produces one sorted row per scheme and value") {
  expt::ExperimentSpec spec;
  spec.base.max_iterations = 6;  // row bookkeeping only; no quality needed
  spec.sweep_axis = "transmit_power_dbm";
  for (double p = -10.0; p <= 30.0; p += 5.0) spec.sweep_values.push_back(p);
  spec.protocols = {Protocol::PS, Protocol::TS};
  const auto rows = expt::run_sweep(spec);
  CHECK(rows.size() == 18);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const bool sorted = rows[i - 1].scheme < rows[i].scheme ||
                        (rows[i - 1].scheme == rows[i].scheme &&
                         rows[i - 1].sweep_value <= rows[i].sweep_value);
    CHECK(sorted);
  }
  // scenario seeds derive from the base seed in row order
  CHECK(rows[0].seed == spec.seed);
  CHECK(rows[1].seed == spec.seed + 1);
}

TEST_CASE("worker count does not change any emitted value") {
  expt::ExperimentSpec spec;
  spec.base.max_iterations = 8;
  spec.sweep_axis = "transmit_power_dbm";
  spec.sweep_values = {0.0, 10.0};
  spec.protocols = {Protocol::PS, Protocol::TS};
  const auto serial = expt::run_sweep(spec, 1);
  const auto parallel = expt::run_sweep(spec, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].scheme == parallel[i].scheme);
    CHECK(serial[i].rate_sum == parallel[i].rate_sum);  // bitwise
    CHECK(serial[i].seed == parallel[i].seed);
  }
}

TEST_CASE("result serialization") {
  std::vector<expt::ResultRow> rows;
  SUBCASE("empty table is header-only") {
    CHECK(expt::to_csv(rows) ==
          "sweep_value,scheme,rate_fu,rate_bu,rate_sum,iterations,wall_time_s,seed\n");
  }
  SUBCASE("round trip preserves nine significant digits") {
    expt::ResultRow r;
    r.sweep_value = 20.0;
    r.scheme = "PS";
    r.rate_fu = 5.123456789123;
    r.rate_bu = 6.98765432101;
    r.rate_sum = r.rate_fu + r.rate_bu;
    r.iterations = 17;
    r.wall_time_s = 0.0;
    r.seed = 7;
    rows.push_back(r);
    const auto csv_rows = expt::parse_csv(expt::to_csv(rows));
    REQUIRE(csv_rows.size() == 1);
    CHECK(csv_rows[0].scheme == "PS");
    CHECK(csv_rows[0].rate_fu == Approx(r.rate_fu).epsilon(1e-9));
    const auto json_rows = expt::parse_json(expt::to_json(csv_rows));
    REQUIRE(json_rows.size() == 1);
    CHECK(json_rows[0].rate_fu == Approx(r.rate_fu).epsilon(1e-9));
    CHECK(json_rows[0].seed == 7);
  }
}

TEST_CASE("slope fitting on synthetic lines") {
  auto make_rows = [](double slope) {
    std::vector<expt::ResultRow> rows;
    for (double p : {20.0, 25.0, 30.0, 35.0, 40.0}) {
      expt::ResultRow r;
      r.sweep_value = p;
      r.scheme = "PS";
      r.rate_sum = slope * std::log2(model::dbm_to_mw(p)) + 1.234;
      rows.push_back(r);
    }
    return rows;
  };
  CHECK(expt::fit_dof_slope(make_rows(2.0)) == Approx(2.0).epsilon(1e-9));
  CHECK(expt::fit_dof_slope(make_rows(1.0)) == Approx(1.0).epsilon(1e-9));

  SUBCASE("too few high-power rows is an error") {
    auto rows = make_rows(2.0);
    rows.resize(2);
    CHECK_THROWS_AS(expt::fit_dof_slope(rows), std::invalid_argument);
  }
}

TEST_CASE("repeated sweeps emit byte-identical files") {
  expt::ExperimentSpec spec;
  spec.base.max_iterations = 10;
  spec.base.transmit_power_dbm = 5.0;
  spec.protocols = {Protocol::PS, Protocol::TS};
  spec.seed = 11;
  const auto rows1 = expt::run_sweep(spec);
  const auto rows2 = expt::run_sweep(spec);
  CHECK(expt::to_csv(rows1) == expt::to_csv(rows2));
  CHECK(expt::to_json(rows1) == expt::to_json(rows2));
}

#ifdef CPASS_CLI_PATH
TEST_CASE("command line front end is deterministic end to end") {
  const std::string dir = "/tmp/cpass_cli_test";
  std::system(("mkdir -p " + dir).c_str());
  {
    std::ofstream cfg(dir + "/spec.json");
    cfg << R"({"max_iterations": 8, "sweep_axis": "transmit_power_dbm",
               "sweep_values": [0, 10], "protocols": ["PS", "TS"], "seed": 3})";
  }
  const std::string cli = CPASS_CLI_PATH;
  const std::string cmd1 =
      cli + " sweep --config " + dir + "/spec.json --out " + dir + "/a.csv";
  const std::string cmd2 =
      cli + " sweep --config " + dir + "/spec.json --out " + dir + "/b.csv";
  REQUIRE(std::system(cmd1.c_str()) == 0);
  REQUIRE(std::system(cmd2.c_str()) == 0);
  const std::string a = slurp(dir + "/a.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir + "/b.csv"));
  CHECK(a.rfind("sweep_value,scheme,rate_fu,rate_bu,rate_sum,iterations,wall_time_s,seed\n",
                0) == 0);

  SUBCASE("config errors exit with status 2") {
    std::ofstream bad(dir + "/bad.json");
    bad << R"({"num_ports": 0})";
    bad.close();
    const int status = std::system((cli + " sweep --config " + dir + "/bad.json").c_str());
    CHECK(WEXITSTATUS(status) == 2);
  }
}
#endif
