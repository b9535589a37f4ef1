// Batch front end for the center-fed pinching-antenna simulator:
// single runs with convergence traces, parameter sweeps, protocol and
// baseline comparisons, and an independent self-verification suite.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cpass/baselines.hpp"
#include "cpass/experiment.hpp"
#include "cpass/manifold.hpp"
#include "cpass/model.hpp"
#include "cpass/oracle.hpp"
#include "cpass/solver.hpp"
#include "cpass/splitting.hpp"

namespace {

using namespace cpass;

expt::ExperimentSpec load_spec(const std::string& config_path,
                               std::optional<std::uint64_t> seed_override) {
  expt::ExperimentSpec spec =
      config_path.empty() ? expt::ExperimentSpec{} : expt::parse_config(config_path);
  if (seed_override) {
    spec.seed = *seed_override;
    spec.base.rng_seed = *seed_override;
  }
  return spec;
}

int emit_and_report(const std::vector<expt::ResultRow>& rows, const std::string& format,
                    const std::string& out_path) {
  expt::emit_results(rows, format, out_path);
  bool any_failed = false;
  for (const auto& r : rows) any_failed |= r.failed;
  return any_failed ? 1 : 0;
}

void write_trace(const ConvergenceTrace& trace, const std::string& scheme,
                 const std::string& dir) {
  std::ofstream out(dir + "/trace_" + scheme + ".csv");
  out << "iteration,sum_rate,surrogate,max_residual,rho,mu_fu\n";
  char buf[160];
  for (const auto& e : trace.entries) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.iteration, e.sum_rate,
                  e.surrogate, e.max_residual, e.rho, e.mu_fu);
    out << buf;
  }
}

int cmd_run(const expt::ExperimentSpec& spec, const std::string& out_path,
            const std::string& format, const std::string& trace_dir, bool timing) {
  expt::ExperimentSpec single = spec;
  single.sweep_axis.clear();
  single.sweep_values.clear();
  const auto rows = expt::run_sweep(single, 1, timing);
  if (!trace_dir.empty()) {
    for (auto proto : single.protocols) {
      SystemConfig cfg = single.base;
      const auto res = solver::solve(proto, cfg);
      write_trace(res.trace, to_string(proto), trace_dir);
    }
  }
  return emit_and_report(rows, format, out_path);
}

int cmd_verify(std::uint64_t seed) {
  SystemConfig cfg;
  cfg.rng_seed = seed;
  const auto dc = model::derive_constants(cfg);
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", ok ? "ok" : "FAIL", name.c_str(),
                detail.empty() ? "" : ": ", detail.c_str());
    if (!ok) ++failures;
  };

  // A deterministic mildly perturbed state exercises the gradients away
  // from the symmetric initialization.
  DesignVariables state = solver::default_initialization(Protocol::PS, cfg);
  for (int m = 0; m < state.splitting.theta.size(); ++m)
    state.splitting.theta[m] = 0.3 + 0.2 * m;
  for (int n = 0; n < state.radiation.xi_f.size(); ++n) {
    state.radiation.xi_f[n] = 1.0 + 0.1 * n;
    state.radiation.xi_b[n] = 2.0 - 0.05 * n;
  }
  state.radiation.xi_f /= state.radiation.xi_f.norm();
  state.radiation.xi_b /= state.radiation.xi_b.norm();
  const ChannelSet ch =
      model::build_channels(Protocol::PS, state.geometry, state.splitting, state.radiation,
                            dc, cfg);
  const auto aux = wmmse::update_aux_psds(ch, state.precoder, dc.noise_power_mw);

  {
    const auto rates = model::sum_rate_psds(ch, state.precoder, dc.noise_power_mw);
    const double identity = std::abs(std::log2(aux.kappa_fu) - rates.fu) +
                            std::abs(std::log2(aux.kappa_bu) - rates.bu);
    report("wmmse rate identity", identity < 1e-9);
  }
  {
    const auto quad = manifold::assemble_radiation_psds(ch, state.precoder, aux);
    const VecX g = quad.grad_f(state.radiation.xi_f, state.radiation.xi_b);
    const VecX g_fd = oracle::finite_diff_gradient(
        [&](const VecX& x) { return quad.objective(x, state.radiation.xi_b); },
        state.radiation.xi_f);
    report("radiation gradient vs finite differences",
           oracle::gradient_relative_error(g, g_fd) < 1e-5);
  }
  {
    const auto quad = manifold::assemble_beta_psds(ch, state.geometry, state.radiation,
                                                   state.precoder, aux, dc, cfg);
    const auto [f, g] = splitting::splitting_objective_and_grad(state.splitting.theta, quad,
                                                                cfg.penalty_init);
    (void)f;
    const VecX g_fd = oracle::finite_diff_gradient(
        [&](const VecX& th) {
          return quad.objective_theta(th) + cfg.penalty_init * splitting::penalty_value(th);
        },
        state.splitting.theta);
    report("splitting gradient vs finite differences",
           oracle::gradient_relative_error(g, g_fd) < 1e-5);
  }
  {
    const auto res = solver::solve(Protocol::PS, cfg);
    const auto check = oracle::rate_recompute_check(Protocol::PS, res.state, cfg);
    report("scalar recomputation of converged PS state", check.pass, check.detail);
    const auto rep = solver::evaluate_final(Protocol::PS, res.state, cfg);
    report("PS constraint residuals", rep.feasible);
  }
  {
    const auto res = solver::solve(Protocol::TS, cfg);
    const auto check = oracle::rate_recompute_check(Protocol::TS, res.state, cfg);
    report("scalar recomputation of converged TS state", check.pass, check.detail);
    const auto chts = model::build_channels(Protocol::TS, res.state.geometry,
                                            res.state.splitting, res.state.radiation, dc, cfg);
    const auto grid = oracle::grid_max_mu(chts, res.state.precoder, dc.noise_power_mw, 1001);
    report("closed-form time allocation vs grid search",
           std::abs(grid.mu_fu - res.state.time.mu_fu) <= 1e-3 + 1e-12);
  }
  {
    const auto ds = solver::solve(Protocol::DS, cfg);
    const auto search =
        oracle::exhaustive_ds_search(cfg, solver::default_initialization(Protocol::DS, cfg));
    report("penalty method vs exhaustive binary search",
           ds.rates.sum() >= search.best_rate * 0.98,
           "penalty " + std::to_string(ds.rates.sum()) + " vs exhaustive " +
               std::to_string(search.best_rate));
  }
  std::printf("%s\n", failures == 0 ? "verification passed" : "verification FAILED");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"center-fed pinching-antenna system simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, format, trace_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool timing = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment spec");
    cmd->add_option("--seed", seed, "override the spec seed");
    cmd->add_option("--out", out_path, "output path (default stdout)");
    cmd->add_option("--format", format, "csv or json (default from spec)");
    cmd->add_option("--jobs", jobs, "worker threads for sweep points")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--timing", timing,
                  "measure wall times (off by default so outputs are byte-reproducible)");
  };

  CLI::App* run = app.add_subcommand("run", "solve one scenario per protocol");
  add_common(run);
  run->add_option("--trace-dir", trace_dir, "write per-iteration trace CSVs here");
  CLI::App* sweep = app.add_subcommand("sweep", "run the spec's sweep axis");
  add_common(sweep);
  CLI::App* compare = app.add_subcommand("compare", "protocols plus baselines at one config");
  add_common(compare);
  CLI::App* verify = app.add_subcommand("verify", "run the independent oracle suite");
  verify->add_option("--seed", seed, "seed for the verification scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return cmd_verify(seed.value_or(1));

    expt::ExperimentSpec spec = load_spec(config_path, seed);
    if (!format.empty()) spec.format = format;
    if (!out_path.empty()) spec.output_path = out_path;

    if (run->parsed()) return cmd_run(spec, spec.output_path, spec.format, trace_dir, timing);
    if (sweep->parsed()) {
      const auto rows = expt::run_sweep(spec, jobs, timing);
      return emit_and_report(rows, spec.format, spec.output_path);
    }
    if (compare->parsed()) {
      expt::ExperimentSpec one = spec;
      one.sweep_axis.clear();
      one.sweep_values.clear();
      one.baseline_end_fed = true;
      one.baseline_random_precoding = true;
      one.baseline_uniform_pinching = true;
      const auto rows = expt::run_sweep(one, jobs, timing);
      return emit_and_report(rows, one.format, one.output_path);
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
