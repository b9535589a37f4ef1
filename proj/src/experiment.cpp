#include "cpass/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "cpass/baselines.hpp"
#include "cpass/model.hpp"
#include "cpass/solver.hpp"

namespace cpass::expt {

namespace {

using nlohmann::json;

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double require_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw std::invalid_argument("key '" + key + "' must be a number");
  return v.get<double>();
}

int require_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw std::invalid_argument("key '" + key + "' must be an integer");
  return v.get<int>();
}

Vec2 require_point(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw std::invalid_argument("key '" + key + "' must be a two-element [x, y] array");
  return Vec2(v[0].get<double>(), v[1].get<double>());
}

void apply_sweep_value(SystemConfig& cfg, const std::string& axis, double value) {
  if (axis == "transmit_power_dbm") {
    cfg.transmit_power_dbm = value;
  } else if (axis == "num_ports") {
    cfg.num_ports = static_cast<int>(value);
  } else if (axis == "num_pas_per_direction") {
    cfg.num_pas_per_direction = static_cast<int>(value);
  } else if (!axis.empty()) {
    throw std::invalid_argument("key 'sweep_axis' has unsupported value '" + axis + "'");
  }
}

struct Scenario {
  std::string scheme;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
};

ResultRow run_scenario(const ExperimentSpec& spec, const Scenario& sc, bool measure_time) {
  ResultRow row;
  row.scheme = sc.scheme;
  row.sweep_value = sc.sweep_value;
  row.seed = sc.seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    SystemConfig cfg = spec.base;
    apply_sweep_value(cfg, spec.sweep_axis, sc.sweep_value);
    cfg.rng_seed = sc.seed;

    RatePair rates;
    int iterations = 0;
    if (sc.scheme == "end_fed") {
      const auto res = baselines::solve_end_fed(cfg);
      rates = res.rates;
      iterations = res.iterations;
    } else if (sc.scheme.ends_with("_rand")) {
      const auto proto = protocol_from_string(sc.scheme.substr(0, sc.scheme.size() - 5));
      const auto res = baselines::solve_random_precoding(proto, cfg, spec.realizations);
      rates = RatePair{res.mean_rate_fu, res.mean_rate_bu};
      iterations = res.iterations_max;
    } else if (sc.scheme.ends_with("_uniform")) {
      const auto proto = protocol_from_string(sc.scheme.substr(0, sc.scheme.size() - 8));
      const auto res = baselines::solve_uniform_pinching(proto, cfg);
      rates = res.rates;
      iterations = res.iterations;
    } else {
      const auto res = solver::solve(protocol_from_string(sc.scheme), cfg);
      rates = res.rates;
      iterations = res.iterations;
    }
    row.rate_fu = rates.fu;
    row.rate_bu = rates.bu;
    row.rate_sum = rates.sum();
    row.iterations = iterations;
  } catch (const std::exception&) {
    row.failed = true;
    row.rate_fu = row.rate_bu = row.rate_sum = std::nan("");
  }
  if (measure_time) {
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
  }
  return row;
}

}  // namespace

ExperimentSpec parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config root must be a JSON object");

  ExperimentSpec spec;
  SystemConfig& cfg = spec.base;
  bool port_spacing_given = false;

  for (const auto& [key, value] : doc.items()) {
    if (key == "carrier_frequency_hz") cfg.carrier_frequency_hz = require_number(value, key);
    else if (key == "speed_of_light_m_s") cfg.speed_of_light_m_s = require_number(value, key);
    else if (key == "effective_refractive_index")
      cfg.effective_refractive_index = require_number(value, key);
    else if (key == "num_ports") cfg.num_ports = require_int(value, key);
    else if (key == "num_pas_per_direction") cfg.num_pas_per_direction = require_int(value, key);
    else if (key == "port_spacing_m") {
      cfg.port_spacing_m = require_number(value, key);
      port_spacing_given = true;
    } else if (key == "pa_spacing_m") cfg.pa_spacing_m = require_number(value, key);
    else if (key == "max_displacement_m") cfg.max_displacement_m = require_number(value, key);
    else if (key == "transmit_power_dbm") cfg.transmit_power_dbm = require_number(value, key);
    else if (key == "noise_power_dbm") cfg.noise_power_dbm = require_number(value, key);
    else if (key == "user_fu_position") cfg.user_fu_position = require_point(value, key);
    else if (key == "user_bu_position") cfg.user_bu_position = require_point(value, key);
    else if (key == "penalty_init") cfg.penalty_init = require_number(value, key);
    else if (key == "penalty_growth") cfg.penalty_growth = require_number(value, key);
    else if (key == "displacement_grid_points")
      cfg.displacement_grid_points = require_int(value, key);
    else if (key == "convergence_tolerance")
      cfg.convergence_tolerance = require_number(value, key);
    else if (key == "max_iterations") cfg.max_iterations = require_int(value, key);
    else if (key == "sweep_axis") {
      if (!value.is_string()) throw std::invalid_argument("key 'sweep_axis' must be a string");
      spec.sweep_axis = value.get<std::string>();
    } else if (key == "sweep_values") {
      if (!value.is_array()) throw std::invalid_argument("key 'sweep_values' must be an array");
      spec.sweep_values.clear();
      for (const auto& v : value) spec.sweep_values.push_back(require_number(v, key));
    } else if (key == "protocols") {
      if (!value.is_array()) throw std::invalid_argument("key 'protocols' must be an array");
      spec.protocols.clear();
      for (const auto& v : value) {
        if (!v.is_string()) throw std::invalid_argument("key 'protocols' must hold strings");
        spec.protocols.push_back(protocol_from_string(v.get<std::string>()));
      }
    } else if (key == "baselines") {
      if (!value.is_array()) throw std::invalid_argument("key 'baselines' must be an array");
      spec.baseline_end_fed = spec.baseline_random_precoding = spec.baseline_uniform_pinching =
          false;
      for (const auto& v : value) {
        const std::string name = v.is_string() ? v.get<std::string>() : "";
        if (name == "end_fed") spec.baseline_end_fed = true;
        else if (name == "random_precoding") spec.baseline_random_precoding = true;
        else if (name == "uniform_pinching") spec.baseline_uniform_pinching = true;
        else throw std::invalid_argument("key 'baselines' has unknown entry '" + name + "'");
      }
    } else if (key == "realizations") {
      spec.realizations = require_int(value, key);
    } else if (key == "output_path") {
      if (!value.is_string()) throw std::invalid_argument("key 'output_path' must be a string");
      spec.output_path = value.get<std::string>();
    } else if (key == "format") {
      if (!value.is_string()) throw std::invalid_argument("key 'format' must be a string");
      spec.format = value.get<std::string>();
    } else if (key == "seed") {
      if (!value.is_number_integer() || value.get<std::int64_t>() < 0)
        throw std::invalid_argument("key 'seed' must be a non-negative integer");
      spec.seed = value.get<std::uint64_t>();
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  if (!port_spacing_given) cfg.port_spacing_m = cfg.default_port_spacing();
  cfg.rng_seed = spec.seed;

  // Validate invariants up front so sweeps cannot start half-valid.
  try {
    (void)model::derive_constants(cfg);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("invalid config value: ") + e.what());
  }
  if (spec.protocols.empty()) throw std::invalid_argument("key 'protocols' must be non-empty");
  if (spec.realizations < 1) throw std::invalid_argument("key 'realizations' must be >= 1");
  if (spec.format != "csv" && spec.format != "json")
    throw std::invalid_argument("key 'format' must be 'csv' or 'json'");
  if (!spec.sweep_axis.empty() && spec.sweep_axis != "transmit_power_dbm" &&
      spec.sweep_axis != "num_ports" && spec.sweep_axis != "num_pas_per_direction")
    throw std::invalid_argument("key 'sweep_axis' has unsupported value '" + spec.sweep_axis +
                                "'");
  for (double v : spec.sweep_values) {
    if (!std::isfinite(v))
      throw std::invalid_argument("key 'sweep_values' must hold finite numbers");
    SystemConfig probe = cfg;
    apply_sweep_value(probe, spec.sweep_axis, v);
    try {
      (void)model::derive_constants(probe);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("invalid sweep value: ") + e.what());
    }
  }
  return spec;
}

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string spec_to_text(const ExperimentSpec& spec) {
  json doc;
  const SystemConfig& c = spec.base;
  doc["carrier_frequency_hz"] = c.carrier_frequency_hz;
  doc["speed_of_light_m_s"] = c.speed_of_light_m_s;
  doc["effective_refractive_index"] = c.effective_refractive_index;
  doc["num_ports"] = c.num_ports;
  doc["num_pas_per_direction"] = c.num_pas_per_direction;
  doc["port_spacing_m"] = c.port_spacing_m;
  doc["pa_spacing_m"] = c.pa_spacing_m;
  doc["max_displacement_m"] = c.max_displacement_m;
  doc["transmit_power_dbm"] = c.transmit_power_dbm;
  doc["noise_power_dbm"] = c.noise_power_dbm;
  doc["user_fu_position"] = {c.user_fu_position[0], c.user_fu_position[1]};
  doc["user_bu_position"] = {c.user_bu_position[0], c.user_bu_position[1]};
  doc["penalty_init"] = c.penalty_init;
  doc["penalty_growth"] = c.penalty_growth;
  doc["displacement_grid_points"] = c.displacement_grid_points;
  doc["convergence_tolerance"] = c.convergence_tolerance;
  doc["max_iterations"] = c.max_iterations;
  doc["sweep_axis"] = spec.sweep_axis;
  doc["sweep_values"] = spec.sweep_values;
  json protocols = json::array();
  for (auto p : spec.protocols) protocols.push_back(to_string(p));
  doc["protocols"] = protocols;
  json baselines = json::array();
  if (spec.baseline_end_fed) baselines.push_back("end_fed");
  if (spec.baseline_random_precoding) baselines.push_back("random_precoding");
  if (spec.baseline_uniform_pinching) baselines.push_back("uniform_pinching");
  doc["baselines"] = baselines;
  doc["realizations"] = spec.realizations;
  doc["output_path"] = spec.output_path;
  doc["format"] = spec.format;
  doc["seed"] = spec.seed;
  return doc.dump(2) + "\n";
}

std::vector<ResultRow> run_sweep(const ExperimentSpec& spec, int jobs, bool measure_time) {
  // Canonical scenario order: scheme names sorted, sweep values ascending.
  std::vector<std::string> schemes;
  for (auto p : spec.protocols) schemes.push_back(to_string(p));
  if (spec.baseline_end_fed) schemes.push_back("end_fed");
  for (auto p : spec.protocols) {
    if (spec.baseline_random_precoding) schemes.push_back(to_string(p) + "_rand");
    if (spec.baseline_uniform_pinching) schemes.push_back(to_string(p) + "_uniform");
  }
  std::sort(schemes.begin(), schemes.end());
  schemes.erase(std::unique(schemes.begin(), schemes.end()), schemes.end());

  std::vector<double> values = spec.sweep_values;
  if (values.empty()) {
    double base_value = 0.0;
    if (spec.sweep_axis == "num_ports") base_value = spec.base.num_ports;
    else if (spec.sweep_axis == "num_pas_per_direction")
      base_value = spec.base.num_pas_per_direction;
    else base_value = spec.base.transmit_power_dbm;
    values.push_back(base_value);
  }
  std::sort(values.begin(), values.end());

  std::vector<Scenario> scenarios;
  for (const auto& scheme : schemes) {
    for (double v : values) {
      Scenario sc;
      sc.scheme = scheme;
      sc.sweep_value = v;
      sc.seed = spec.seed + static_cast<std::uint64_t>(scenarios.size());
      scenarios.push_back(std::move(sc));
    }
  }

  std::vector<ResultRow> rows(scenarios.size());
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(scenarios.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < scenarios.size(); ++i)
      rows[i] = run_scenario(spec, scenarios[i], measure_time);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < scenarios.size(); i = next.fetch_add(1))
          rows[i] = run_scenario(spec, scenarios[i], measure_time);
      });
    }
    for (auto& t : pool) t.join();
  }
  return rows;
}

double fit_dof_slope(const std::vector<ResultRow>& rows_one_scheme) {
  std::vector<std::pair<double, double>> pts;  // (log2 linear power, rate)
  for (const auto& r : rows_one_scheme) {
    if (r.failed || r.sweep_value < 20.0) continue;
    pts.emplace_back(std::log2(model::dbm_to_mw(r.sweep_value)), r.rate_sum);
  }
  if (pts.size() < 3)
    throw std::invalid_argument("slope fit needs at least three rows with power >= 20 dBm");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "sweep_value,scheme,rate_fu,rate_bu,rate_sum,iterations,wall_time_s,seed\n";
  for (const auto& r : rows) {
    out += fmt9(r.sweep_value) + "," + r.scheme + "," + fmt9(r.rate_fu) + "," + fmt9(r.rate_bu) +
           "," + fmt9(r.rate_sum) + "," + std::to_string(r.iterations) + "," +
           fmt9(r.wall_time_s) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string to_json(const std::vector<ResultRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json o;
    o["sweep_value"] = r.sweep_value;
    o["scheme"] = r.scheme;
    o["rate_fu"] = r.rate_fu;
    o["rate_bu"] = r.rate_bu;
    o["rate_sum"] = r.rate_sum;
    o["iterations"] = r.iterations;
    o["wall_time_s"] = r.wall_time_s;
    o["seed"] = r.seed;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw std::invalid_argument("malformed CSV row: " + line);
    ResultRow r;
    r.sweep_value = std::stod(cells[0]);
    r.scheme = cells[1];
    r.rate_fu = std::stod(cells[2]);
    r.rate_bu = std::stod(cells[3]);
    r.rate_sum = std::stod(cells[4]);
    r.iterations = std::stoi(cells[5]);
    r.wall_time_s = std::stod(cells[6]);
    r.seed = std::stoull(cells[7]);
    r.failed = std::isnan(r.rate_sum);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> parse_json(const std::string& text) {
  const json arr = json::parse(text);
  std::vector<ResultRow> rows;
  for (const auto& o : arr) {
    ResultRow r;
    r.sweep_value = o.at("sweep_value").get<double>();
    r.scheme = o.at("scheme").get<std::string>();
    r.rate_fu = o.at("rate_fu").is_null() ? std::nan("") : o.at("rate_fu").get<double>();
    r.rate_bu = o.at("rate_bu").is_null() ? std::nan("") : o.at("rate_bu").get<double>();
    r.rate_sum = o.at("rate_sum").is_null() ? std::nan("") : o.at("rate_sum").get<double>();
    r.iterations = o.at("iterations").get<int>();
    r.wall_time_s = o.at("wall_time_s").get<double>();
    r.seed = o.at("seed").get<std::uint64_t>();
    r.failed = std::isnan(r.rate_sum);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_results(const std::vector<ResultRow>& rows, const std::string& format,
                  const std::string& path) {
  const std::string text = format == "json" ? to_json(rows) : to_csv(rows);
  if (path.empty() || path == "-") {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  out << text;
}

}  // namespace cpass::expt
