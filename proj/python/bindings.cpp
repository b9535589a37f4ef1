#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cpass/baselines.hpp"
#include "cpass/experiment.hpp"
#include "cpass/model.hpp"
#include "cpass/oracle.hpp"
#include "cpass/solver.hpp"

namespace py = pybind11;
using namespace cpass;

namespace {

py::dict trace_entry_to_dict(const TraceEntry& e) {
  py::dict d;
  d["iteration"] = e.iteration;
  d["sum_rate"] = e.sum_rate;
  d["surrogate"] = e.surrogate;
  d["max_residual"] = e.max_residual;
  d["rho"] = e.rho;
  d["mu_fu"] = e.mu_fu;
  return d;
}

py::dict result_to_dict(const solver::SolveResult& res, Protocol proto,
                        const SystemConfig& cfg) {
  py::dict d;
  d["protocol"] = to_string(proto);
  d["rate_fu"] = res.rates.fu;
  d["rate_bu"] = res.rates.bu;
  d["rate_sum"] = res.rates.sum();
  d["iterations"] = res.iterations;
  d["converged"] = res.converged;
  py::list trace;
  for (const auto& e : res.trace.entries) trace.append(trace_entry_to_dict(e));
  d["trace"] = trace;
  d["theta"] = std::vector<double>(res.state.splitting.theta.begin(),
                                   res.state.splitting.theta.end());
  d["xi_f"] = std::vector<double>(res.state.radiation.xi_f.begin(),
                                  res.state.radiation.xi_f.end());
  d["xi_b"] = std::vector<double>(res.state.radiation.xi_b.begin(),
                                  res.state.radiation.xi_b.end());
  d["d_f"] = std::vector<double>(res.state.geometry.fpa_displacements.begin(),
                                 res.state.geometry.fpa_displacements.end());
  d["d_b"] = std::vector<double>(res.state.geometry.bpa_displacements.begin(),
                                 res.state.geometry.bpa_displacements.end());
  d["mu_fu"] = res.state.time.mu_fu;
  const auto rep = solver::evaluate_final(proto, res.state, cfg);
  d["feasible"] = rep.feasible;
  d["max_residual"] = rep.max_residual;
  return d;
}

}  // namespace

PYBIND11_MODULE(_cpass, m) {
  m.doc() = "center-fed pinching-antenna system simulator";

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init<>())
      .def_readwrite("carrier_frequency_hz", &SystemConfig::carrier_frequency_hz)
      .def_readwrite("speed_of_light_m_s", &SystemConfig::speed_of_light_m_s)
      .def_readwrite("effective_refractive_index", &SystemConfig::effective_refractive_index)
      .def_readwrite("num_ports", &SystemConfig::num_ports)
      .def_readwrite("num_pas_per_direction", &SystemConfig::num_pas_per_direction)
      .def_readwrite("port_spacing_m", &SystemConfig::port_spacing_m)
      .def_readwrite("pa_spacing_m", &SystemConfig::pa_spacing_m)
      .def_readwrite("max_displacement_m", &SystemConfig::max_displacement_m)
      .def_readwrite("transmit_power_dbm", &SystemConfig::transmit_power_dbm)
      .def_readwrite("noise_power_dbm", &SystemConfig::noise_power_dbm)
      .def_property(
          "user_fu_position",
          [](const SystemConfig& c) {
            return std::pair<double, double>{c.user_fu_position[0], c.user_fu_position[1]};
          },
          [](SystemConfig& c, std::pair<double, double> p) {
            c.user_fu_position = Vec2(p.first, p.second);
          })
      .def_property(
          "user_bu_position",
          [](const SystemConfig& c) {
            return std::pair<double, double>{c.user_bu_position[0], c.user_bu_position[1]};
          },
          [](SystemConfig& c, std::pair<double, double> p) {
            c.user_bu_position = Vec2(p.first, p.second);
          })
      .def_readwrite("penalty_init", &SystemConfig::penalty_init)
      .def_readwrite("penalty_growth", &SystemConfig::penalty_growth)
      .def_readwrite("displacement_grid_points", &SystemConfig::displacement_grid_points)
      .def_readwrite("convergence_tolerance", &SystemConfig::convergence_tolerance)
      .def_readwrite("max_iterations", &SystemConfig::max_iterations)
      .def_readwrite("rng_seed", &SystemConfig::rng_seed)
      .def("default_port_spacing", &SystemConfig::default_port_spacing);

  m.def("derive_constants", [](const SystemConfig& cfg) {
    const auto dc = model::derive_constants(cfg);
    py::dict d;
    d["lambda0"] = dc.lambda0;
    d["k0"] = dc.k0;
    d["lambda_g"] = dc.lambda_g;
    d["k_g"] = dc.k_g;
    d["eta"] = dc.eta;
    d["transmit_power_mw"] = dc.transmit_power_mw;
    d["noise_power_mw"] = dc.noise_power_mw;
    return d;
  });

  m.def(
      "solve",
      [](const std::string& protocol, const SystemConfig& cfg) {
        const Protocol proto = protocol_from_string(protocol);
        return result_to_dict(solver::solve(proto, cfg), proto, cfg);
      },
      py::arg("protocol"), py::arg("config"),
      "Joint transmit and pinching beamforming for PS, DS, or TS");

  m.def(
      "solve_end_fed",
      [](const SystemConfig& cfg) {
        return result_to_dict(baselines::solve_end_fed(cfg), Protocol::PS, cfg);
      },
      py::arg("config"));

  m.def(
      "solve_uniform_pinching",
      [](const std::string& protocol, const SystemConfig& cfg) {
        const Protocol proto = protocol_from_string(protocol);
        return result_to_dict(baselines::solve_uniform_pinching(proto, cfg), proto, cfg);
      },
      py::arg("protocol"), py::arg("config"));

  m.def(
      "solve_random_precoding",
      [](const std::string& protocol, const SystemConfig& cfg, int realizations) {
        const auto res = baselines::solve_random_precoding(protocol_from_string(protocol), cfg,
                                                           realizations);
        py::dict d;
        d["mean_rate_sum"] = res.mean_rate_sum;
        d["std_rate_sum"] = res.std_rate_sum;
        d["mean_rate_fu"] = res.mean_rate_fu;
        d["mean_rate_bu"] = res.mean_rate_bu;
        d["rates"] = res.rates;
        return d;
      },
      py::arg("protocol"), py::arg("config"), py::arg("realizations") = 200);

  m.def(
      "run_sweep",
      [](const std::string& spec_json, int jobs) {
        const auto spec = expt::parse_config_text(spec_json);
        const auto rows = expt::run_sweep(spec, jobs);
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["sweep_value"] = r.sweep_value;
          d["scheme"] = r.scheme;
          d["rate_fu"] = r.rate_fu;
          d["rate_bu"] = r.rate_bu;
          d["rate_sum"] = r.rate_sum;
          d["iterations"] = r.iterations;
          d["seed"] = r.seed;
          d["failed"] = r.failed;
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("spec_json"), py::arg("jobs") = 1,
      "Run a sweep described by a JSON experiment spec and return the rows");

  m.def("default_spec_json",
        [] { return expt::spec_to_text(expt::ExperimentSpec{}); });

  m.def(
      "verify_state_recompute",
      [](const std::string& protocol, const SystemConfig& cfg) {
        const Protocol proto = protocol_from_string(protocol);
        const auto res = solver::solve(proto, cfg);
        const auto check = oracle::rate_recompute_check(proto, res.state, cfg);
        py::dict d;
        d["pass"] = check.pass;
        d["max_residual"] = check.max_residual;
        d["detail"] = check.detail;
        return d;
      },
      py::arg("protocol"), py::arg("config"),
      "Solve, then re-derive every channel factor with scalar loops");
}
