#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpass/types.hpp"

namespace cpass::expt {

/// One batch experiment: a base configuration, an optional sweep axis,
/// and the schemes to run at every sweep point.
struct ExperimentSpec {
  SystemConfig base;
  std::string sweep_axis;           // "", "transmit_power_dbm", "num_ports",
                                    // or "num_pas_per_direction"
  std::vector<double> sweep_values; // empty: single point at the base value
  std::vector<Protocol> protocols{Protocol::PS, Protocol::DS, Protocol::TS};
  bool baseline_end_fed = false;
  bool baseline_random_precoding = false;
  bool baseline_uniform_pinching = false;
  int realizations = 200;  // random-precoding draws
  std::string output_path;
  std::string format = "csv";
  std::uint64_t seed = 1;
};

struct ResultRow {
  double sweep_value = 0.0;
  std::string scheme;
  double rate_fu = 0.0;
  double rate_bu = 0.0;
  double rate_sum = 0.0;
  int iterations = 0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
};

/// Parses and fully validates a JSON spec file. Unspecified keys keep
/// the reference defaults; unknown keys, type mismatches, and invariant
/// violations raise std::invalid_argument naming the key.
ExperimentSpec parse_config(const std::string& path);
ExperimentSpec parse_config_text(const std::string& text);

/// Serializes a spec (defaults included) back to JSON text.
std::string spec_to_text(const ExperimentSpec& spec);

/// Runs every (scheme, sweep value) scenario. Scenario seeds derive as
/// seed + scenario_index in canonical row order, so output is
/// deterministic and independent of the worker count. Solver failures
/// are recorded in-row and the sweep continues. Wall times are only
/// measured when requested, keeping default output byte-reproducible.
std::vector<ResultRow> run_sweep(const ExperimentSpec& spec, int jobs = 1,
                                 bool measure_time = false);

/// Least-squares slope of rate against log2 of linear transmit power,
/// restricted to high-power rows (>= 20 dBm). One unit equals one extra
/// bit/s/Hz per power doubling (3.0103 dB).
double fit_dof_slope(const std::vector<ResultRow>& rows_one_scheme);

std::string to_csv(const std::vector<ResultRow>& rows);
std::string to_json(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);
std::vector<ResultRow> parse_json(const std::string& text);

/// Writes rows in the requested format ("csv" or "json").
void emit_results(const std::vector<ResultRow>& rows, const std::string& format,
                  const std::string& path);

}  // namespace cpass::expt
