#include "cpass/baselines.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

#include "cpass/manifold.hpp"
#include "cpass/model.hpp"
#include "cpass/placement.hpp"

namespace cpass::baselines {

namespace {

constexpr double ln2 = 0.6931471805599453;

CVecX random_cn_vector(std::mt19937_64& rng, int size) {
  std::normal_distribution<double> gauss(0.0, std::numbers::sqrt2 / 2.0);
  CVecX v(size);
  for (int i = 0; i < size; ++i) v[i] = Complex(gauss(rng), gauss(rng));
  return v;
}

/// Scalar per-user auxiliaries for time-shared operation with a frozen
/// (non-MRT) precoder; interference-free, noise share mu_k N0.
struct TsScalarAux {
  Complex t_fu{}, t_bu{};
  double kappa_fu = 1.0, kappa_bu = 1.0;
};

TsScalarAux update_aux_ts_frozen(const ChannelSet& ch, const PrecoderState& prec,
                                 const TimeAllocation& mu, double n0) {
  auto one = [&](const CVecX& h_eff, const CVecX& w, double mu_k, Complex& t, double& kappa) {
    if (mu_k <= 0.0) {
      t = Complex(0.0);
      kappa = 1.0;
      return;
    }
    const Complex z = h_eff.transpose() * w;
    const double denom = std::norm(z) + mu_k * n0;
    t = z / denom;
    const double eps = std::norm(t) * denom - 2.0 * std::real(std::conj(t) * z) + 1.0;
    kappa = 1.0 / eps;
  };
  TsScalarAux aux;
  one(ch.h_eff_fu, prec.w_fu, mu.mu_fu, aux.t_fu, aux.kappa_fu);
  one(ch.h_eff_bu, prec.w_bu, mu.mu_bu, aux.t_bu, aux.kappa_bu);
  return aux;
}

TimeAllocation update_mu_frozen(const ChannelSet& ch, const PrecoderState& prec,
                                const TsScalarAux& aux, double n0) {
  auto terms = [&](const CVecX& h_eff, const CVecX& w, Complex t, double kappa) {
    const Complex z = h_eff.transpose() * w;
    const double c =
        kappa * (std::norm(t) * std::norm(z) - 2.0 * std::real(std::conj(t) * z) + 1.0) / ln2 -
        std::log2(kappa);
    const double q = kappa * std::norm(t) * n0 / ln2;
    return std::pair<double, double>{c, q};
  };
  const auto [c_f, q_f] = terms(ch.h_eff_fu, prec.w_fu, aux.t_fu, aux.kappa_fu);
  const auto [c_b, q_b] = terms(ch.h_eff_bu, prec.w_bu, aux.t_bu, aux.kappa_bu);
  const double a = q_f + q_b;
  if (a <= 0.0) return TimeAllocation{0.5, 0.5};
  const double mu = std::clamp(-(c_f - c_b - 2.0 * q_b) / (2.0 * a), 0.0, 1.0);
  return TimeAllocation{mu, 1.0 - mu};
}

/// Time-shared loop with a frozen precoder: the per-direction radiation
/// and placement subproblems become single-user quadratics in the
/// frozen beam's effective gain.
solver::SolveResult run_ts_frozen_precoder(const SystemConfig& config, DesignVariables state) {
  const auto dc = model::derive_constants(config);
  const double n0 = dc.noise_power_mw;
  auto rebuild = [&](const DesignVariables& s) {
    return model::build_channels(Protocol::TS, s.geometry, s.splitting, s.radiation, dc,
                                 config);
  };
  ChannelSet ch = rebuild(state);
  double rate = model::sum_rate_ts(ch, state.precoder, state.time, n0).sum();
  TsScalarAux aux = update_aux_ts_frozen(ch, state.precoder, state.time, n0);

  solver::SolveResult out;
  out.trace.add({0, rate, 0.0, 0.0, 0.0, state.time.mu_fu});

  auto radiation_quads = [&] {
    auto one = [&](const CVecX& h, const CMatX& g, const CVecX& w, Complex t, double kappa,
                   double mu_k) {
      manifold::SphereQuadratic q;
      const CVecX rw = h.asDiagonal() * (g.transpose() * w);
      const double scale = mu_k * kappa / ln2;
      q.a = scale * std::norm(t) * (rw * rw.adjoint());
      q.c = scale * std::conj(t) * rw;
      return q;
    };
    return std::pair{
        one(ch.h_fu_f, ch.g_f, state.precoder.w_fu, aux.t_fu, aux.kappa_fu, state.time.mu_fu),
        one(ch.h_bu_b, ch.g_b, state.precoder.w_bu, aux.t_bu, aux.kappa_bu, state.time.mu_bu)};
  };

  auto phase_ctx = [&] {
    auto [ramp_f, ramp_b] = model::port_phase_ramps(config.num_ports, dc.k_g,
                                                    config.port_spacing_m);
    const VecX x_f =
        model::relative_wg_coordinates(config, state.geometry.fpa_displacements, true);
    const VecX x_b =
        model::relative_wg_coordinates(config, state.geometry.bpa_displacements, false);
    auto one = [&](const CVecX& ramp, const VecX& xi, const VecX& r, const CVecX& w, Complex t,
                   double kappa, double mu_k) {
      manifold::PhaseQuadratic q;
      const CVecX row = (xi.array() / r.array()).matrix().cast<Complex>();
      q.phi_map = dc.eta * (ramp * row.transpose());
      q.block_size = static_cast<int>(r.size());
      const CVecX a = q.phi_map.transpose() * w;
      const double scale = mu_k * kappa / ln2;
      q.r = scale * std::norm(t) * (a.conjugate() * a.transpose());
      q.k = scale * t * a.conjugate();
      return q;
    };
    manifold::PhaseContext ctx;
    ctx.fu = one(ramp_f, state.radiation.xi_f, ch.r_fu_f, state.precoder.w_fu, aux.t_fu,
                 aux.kappa_fu, state.time.mu_fu);
    ctx.bu = one(ramp_b, state.radiation.xi_b, ch.r_bu_b, state.precoder.w_bu, aux.t_bu,
                 aux.kappa_bu, state.time.mu_bu);
    ctx.start_fu = model::achievable_phases(ch.r_fu_f, x_f, dc.k0, dc.k_g);
    ctx.start_bu = model::achievable_phases(ch.r_bu_b, x_b, dc.k0, dc.k_g);
    return ctx;
  };

  std::optional<std::pair<VecX, VecX>> aligned_fit;
  const int loop_budget = std::max(1, config.max_iterations - 1);
  int iter = 1;
  for (; iter <= loop_budget; ++iter) {
    TimeAllocation mu2 = update_mu_frozen(ch, state.precoder, aux, n0);
    double r2 = model::sum_rate_ts(ch, state.precoder, mu2, n0).sum();
    if (r2 >= rate) {
      state.time = mu2;
      rate = r2;
    }
    aux = update_aux_ts_frozen(ch, state.precoder, state.time, n0);

    const auto [quad_f, quad_b] = radiation_quads();
    DesignVariables cand = state;
    cand.radiation = manifold::minimize_radiation_ts(quad_f, quad_b, state.radiation);
    ChannelSet ch2 = rebuild(cand);
    r2 = model::sum_rate_ts(ch2, state.precoder, state.time, n0).sum();
    if (r2 >= rate) {
      state.radiation = std::move(cand.radiation);
      ch = std::move(ch2);
      rate = r2;
    }
    aux = update_aux_ts_frozen(ch, state.precoder, state.time, n0);

    auto try_displacements = [&](const VecX& d_f, const VecX& d_b) {
      DesignVariables c2 = state;
      c2.geometry = model::build_geometry(config, d_f, d_b);
      ChannelSet chc = rebuild(c2);
      const double rc = model::sum_rate_ts(chc, state.precoder, state.time, n0).sum();
      if (rc >= rate) {
        state.geometry = std::move(c2.geometry);
        ch = std::move(chc);
        rate = rc;
      }
    };
    const auto ctx = phase_ctx();
    const auto [phi_f, phi_b] = manifold::minimize_phases(ctx);
    if ((phi_f - ctx.start_fu).cwiseAbs().maxCoeff() > 1e-12 ||
        (phi_b - ctx.start_bu).cwiseAbs().maxCoeff() > 1e-12) {
      const auto [d_f, d_b] =
          placement::fit_displacement_ts(phi_f, phi_b, config, dc.k0, dc.k_g);
      try_displacements(d_f, d_b);
    }
    // Common-phase candidate; see the time-switched solver loop.
    if (!aligned_fit) {
      const int n_pas = config.num_pas_per_direction;
      aligned_fit = placement::fit_displacement_ts(CVecX::Ones(n_pas), CVecX::Ones(n_pas),
                                                   config, dc.k0, dc.k_g);
    }
    try_displacements(aligned_fit->first, aligned_fit->second);
    aux = update_aux_ts_frozen(ch, state.precoder, state.time, n0);

    const double prev = out.trace.back().sum_rate;
    out.trace.add({iter, rate, 0.0, 0.0, 0.0, state.time.mu_fu});
    if (std::abs(rate - prev) < config.convergence_tolerance * std::max(std::abs(prev), 1e-12)) {
      out.converged = true;
      break;
    }
  }
  out.state = std::move(state);
  out.rates = model::sum_rate_ts(ch, out.state.precoder, out.state.time, n0);
  out.iterations = std::min(iter, loop_budget);
  return out;
}

}  // namespace

solver::SolveResult solve_end_fed(const SystemConfig& config) {
  DesignVariables init = solver::default_initialization(Protocol::PS, config, 0.0);
  solver::SolveOptions opts;
  opts.update_splitting = false;
  return solver::run_algorithm1(Protocol::PS, config, init, opts);
}

solver::SolveResult solve_uniform_pinching(Protocol protocol, const SystemConfig& config) {
  DesignVariables init = solver::default_initialization(protocol, config);
  solver::SolveOptions opts;
  opts.update_radiation = false;
  opts.update_placement = false;
  if (protocol == Protocol::TS) return solver::run_algorithm2(config, init, opts);
  return solver::run_algorithm1(protocol, config, init, opts);
}

RandomPrecodingResult solve_random_precoding(Protocol protocol, const SystemConfig& config,
                                             int n_realizations) {
  if (n_realizations < 1) throw std::invalid_argument("n_realizations must be >= 1");
  const auto dc = model::derive_constants(config);
  RandomPrecodingResult out;
  out.realizations = n_realizations;
  out.rates.reserve(n_realizations);

  double sum_fu = 0.0, sum_bu = 0.0;
  for (int i = 0; i < n_realizations; ++i) {
    std::mt19937_64 rng(config.rng_seed + static_cast<std::uint64_t>(i));
    DesignVariables init = solver::default_initialization(protocol, config);
    CVecX w_fu = random_cn_vector(rng, config.num_ports);
    CVecX w_bu = random_cn_vector(rng, config.num_ports);
    if (protocol == Protocol::TS) {
      // Time-orthogonal users each spend the full budget.
      w_fu *= std::sqrt(dc.transmit_power_mw) / w_fu.norm();
      w_bu *= std::sqrt(dc.transmit_power_mw) / w_bu.norm();
    } else {
      const double total = w_fu.squaredNorm() + w_bu.squaredNorm();
      const double s = std::sqrt(dc.transmit_power_mw / total);
      w_fu *= s;
      w_bu *= s;
    }
    init.precoder.w_fu = std::move(w_fu);
    init.precoder.w_bu = std::move(w_bu);
    init.precoder.lagrange_multiplier = 0.0;

    solver::SolveResult res;
    if (protocol == Protocol::TS) {
      res = run_ts_frozen_precoder(config, std::move(init));
    } else {
      solver::SolveOptions opts;
      opts.update_precoder = false;
      res = solver::run_algorithm1(protocol, config, init, opts);
      if (protocol == Protocol::PS) {
        // Binary splits are feasible here, so the penalty continuation
        // doubles as a second search heuristic; with the beams frozen
        // the continuous descent alone often misses the good corners.
        const auto annealed = solver::run_algorithm1(Protocol::DS, config, init, opts);
        if (annealed.rates.sum() > res.rates.sum()) res = annealed;
      }
    }
    out.rates.push_back(res.rates.sum());
    sum_fu += res.rates.fu;
    sum_bu += res.rates.bu;
    out.iterations_max = std::max(out.iterations_max, res.iterations);
  }

  const double n = static_cast<double>(n_realizations);
  double mean = 0.0;
  for (double r : out.rates) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : out.rates) var += (r - mean) * (r - mean);
  out.mean_rate_sum = mean;
  out.std_rate_sum = n_realizations > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  out.mean_rate_fu = sum_fu / n;
  out.mean_rate_bu = sum_bu / n;
  return out;
}

}  // namespace cpass::baselines
