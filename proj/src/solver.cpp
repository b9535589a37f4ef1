#include "cpass/solver.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cpass/manifold.hpp"
#include "cpass/model.hpp"
#include "cpass/placement.hpp"
#include "cpass/splitting.hpp"

namespace cpass::solver {

namespace {

constexpr double kQuarterPi = std::numbers::pi / 4.0;
constexpr double kHalfPi = std::numbers::pi / 2.0;
constexpr double kRoundTol = 1e-3;
constexpr double kRhoCap = 1e6;
constexpr int kMinIterations = 3;  // convergence is not declared earlier
constexpr double kInnerTol = 1e-6;
constexpr double ln2 = 0.6931471805599453;

double relative_change(double current, double previous) {
  return std::abs(current - previous) / std::max(std::abs(previous), 1e-12);
}

double state_residual(const DesignVariables& s, const SystemConfig& config, double p_t) {
  double r = 0.0;
  r = std::max(r, std::abs(s.radiation.xi_f.norm() - 1.0));
  r = std::max(r, std::abs(s.radiation.xi_b.norm() - 1.0));
  r = std::max(r, -std::min(0.0, s.radiation.xi_f.minCoeff()));
  r = std::max(r, -std::min(0.0, s.radiation.xi_b.minCoeff()));
  r = std::max(r, std::max(0.0, s.precoder.total_power() - p_t) / std::max(p_t, 1e-12));
  const double delta = config.max_displacement_m;
  r = std::max(r, s.geometry.fpa_displacements.cwiseAbs().maxCoeff() - delta);
  r = std::max(r, s.geometry.bpa_displacements.cwiseAbs().maxCoeff() - delta);
  for (int m = 0; m < s.splitting.theta.size(); ++m) {
    const double c = std::cos(s.splitting.theta[m]);
    const double sn = std::sin(s.splitting.theta[m]);
    r = std::max(r, std::abs(c * c + sn * sn - 1.0));
  }
  return std::max(r, 0.0);
}

}  // namespace

DesignVariables default_initialization(Protocol protocol, const SystemConfig& config,
                                       std::optional<double> theta_fill) {
  const auto dc = model::derive_constants(config);
  const int n = config.num_pas_per_direction;
  DesignVariables s;
  s.geometry = model::build_geometry(config, VecX::Zero(n), VecX::Zero(n));
  s.splitting.theta = VecX::Constant(config.num_ports, theta_fill.value_or(kQuarterPi));
  s.radiation.xi_f = VecX::Constant(n, 1.0 / std::sqrt(double(n)));
  s.radiation.xi_b = VecX::Constant(n, 1.0 / std::sqrt(double(n)));
  s.time = TimeAllocation{0.5, 0.5};

  const Protocol builder = (protocol == Protocol::TS) ? Protocol::TS : Protocol::PS;
  const ChannelSet ch = model::build_channels(builder, s.geometry, s.splitting, s.radiation,
                                              dc, config);
  auto steer = [&](const CVecX& h_eff, double power) -> CVecX {
    const double norm = h_eff.norm();
    if (norm <= 0.0) return CVecX::Zero(h_eff.size());
    return std::sqrt(power) / norm * h_eff.conjugate();
  };
  if (protocol == Protocol::TS) {
    // Time-orthogonal users each get the full budget.
    s.precoder.w_fu = steer(ch.h_eff_fu, dc.transmit_power_mw);
    s.precoder.w_bu = steer(ch.h_eff_bu, dc.transmit_power_mw);
  } else {
    // MRT directions with power proportional to each user's channel
    // gain. An exactly even split deadlocks when the two effective
    // channels are parallel (single port, or forced one-way routing):
    // the symmetric interference-limited point is then a fixed point of
    // the alternating updates.
    const double g_fu = ch.h_eff_fu.squaredNorm();
    const double g_bu = ch.h_eff_bu.squaredNorm();
    const double total = g_fu + g_bu;
    const double share_fu = total > 0.0 ? g_fu / total : 0.5;
    s.precoder.w_fu = steer(ch.h_eff_fu, dc.transmit_power_mw * share_fu);
    s.precoder.w_bu = steer(ch.h_eff_bu, dc.transmit_power_mw * (1.0 - share_fu));
  }
  s.precoder.lagrange_multiplier = 0.0;
  return s;
}

SolveResult run_algorithm1(Protocol protocol, const SystemConfig& config,
                           const DesignVariables& initial, const SolveOptions& opts) {
  if (protocol == Protocol::TS)
    throw std::invalid_argument("time-switched operation is handled by run_algorithm2");
  const auto dc = model::derive_constants(config);
  const double p_t = dc.transmit_power_mw;
  const double n0 = dc.noise_power_mw;
  const int n = config.num_pas_per_direction;
  const bool binary_mode = protocol == Protocol::DS && opts.update_splitting;

  DesignVariables state = initial;
  // The relaxed loop always works with continuous splitting amplitudes.
  auto rebuild = [&](const DesignVariables& s) {
    return model::build_channels(Protocol::PS, s.geometry, s.splitting, s.radiation, dc,
                                 config);
  };
  ChannelSet ch = rebuild(state);
  double rate = model::sum_rate_psds(ch, state.precoder, n0).sum();
  wmmse::ScalarAux aux = wmmse::update_aux_psds(ch, state.precoder, n0);

  // DS keeps an incumbent: the best binary-feasible state reached so
  // far (current splits rounded, precoder re-pointed). The reported
  // trace follows the incumbent, which is monotone by construction; the
  // relaxed iterate explores under the penalty without rate guards.
  DesignVariables incumbent = state;
  double incumbent_rate = -std::numeric_limits<double>::infinity();
  auto try_incumbent = [&](const VecX& theta_bin) {
    DesignVariables cand = state;
    cand.splitting.theta = theta_bin;
    const ChannelSet ch_bin = rebuild(cand);
    const auto aux_bin = wmmse::update_aux_psds(ch_bin, cand.precoder, n0);
    cand.precoder = wmmse::update_precoder_psds(ch_bin, aux_bin, p_t);
    const double r_bin = model::sum_rate_psds(ch_bin, cand.precoder, n0).sum();
    if (r_bin > incumbent_rate) {
      incumbent_rate = r_bin;
      incumbent = std::move(cand);
    }
  };
  // Nearest rounding of the relaxed splits plus its single-port flips.
  auto update_incumbent = [&] {
    VecX rounded(state.splitting.theta.size());
    for (int m = 0; m < rounded.size(); ++m)
      rounded[m] = state.splitting.theta[m] < kQuarterPi ? 0.0 : kHalfPi;
    try_incumbent(rounded);
    for (int m = 0; m < rounded.size(); ++m) {
      VecX flipped = rounded;
      flipped[m] = rounded[m] == 0.0 ? kHalfPi : 0.0;
      try_incumbent(flipped);
    }
  };
  if (binary_mode) update_incumbent();

  SolveResult out;
  double rho = (protocol == Protocol::DS) ? config.penalty_init : 0.0;
  auto record = [&](int it) {
    out.trace.add({it, binary_mode ? incumbent_rate : rate,
                   wmmse::surrogate_objective_psds(ch, state.precoder, aux, n0),
                   state_residual(state, config, p_t), rho, 0.0});
  };
  record(0);

  auto refresh_aux = [&] { aux = wmmse::update_aux_psds(ch, state.precoder, n0); };

  auto precoder_step = [&] {
    PrecoderState cand = wmmse::update_precoder_psds(ch, aux, p_t);
    const double r2 = model::sum_rate_psds(ch, cand, n0).sum();
    if (r2 >= rate) {
      state.precoder = std::move(cand);
      rate = r2;
    }
    refresh_aux();
  };

  auto radiation_step = [&] {
    const auto quad = manifold::assemble_radiation_psds(ch, state.precoder, aux);
    RadiationState cand = manifold::minimize_radiation_psds(quad, state.radiation);
    ChannelSet ch2 = model::build_channels(Protocol::PS, state.geometry, state.splitting,
                                           cand, dc, config);
    const double r2 = model::sum_rate_psds(ch2, state.precoder, n0).sum();
    if (r2 >= rate) {
      state.radiation = std::move(cand);
      ch = std::move(ch2);
      rate = r2;
    }
    refresh_aux();
  };

  auto try_displacements = [&](const VecX& d_f, const VecX& d_b) {
    Geometry geo2 = model::build_geometry(config, d_f, d_b);
    DesignVariables probe = state;
    probe.geometry = geo2;
    ChannelSet ch2 = rebuild(probe);
    const double r2 = model::sum_rate_psds(ch2, state.precoder, n0).sum();
    if (r2 >= rate) {
      state.geometry = std::move(geo2);
      ch = std::move(ch2);
      rate = r2;
      return;
    }
    if (!opts.update_precoder) return;
    // A placement that pays off only after the beams re-point would be
    // rejected under the stale precoder; retry with one re-point.
    const auto aux2 = wmmse::update_aux_psds(ch2, state.precoder, n0);
    PrecoderState w2 = wmmse::update_precoder_psds(ch2, aux2, p_t);
    const double r3 = model::sum_rate_psds(ch2, w2, n0).sum();
    if (r3 >= rate) {
      state.geometry = std::move(geo2);
      state.precoder = std::move(w2);
      ch = std::move(ch2);
      rate = r3;
    }
  };

  // Side-aligned candidate: each array phase-coherent for its own user
  // (the per-user direction blocks are rank-one, so a common phase is
  // that user's exact norm maximizer). The relaxed targets freeze near
  // the receive-filter fixed point at high SNR and never propose this
  // on their own. The fit depends only on the nominal geometry, so it
  // is computed once per solve.
  std::optional<std::pair<VecX, VecX>> aligned_fit;
  auto placement_step = [&] {
    const auto ctx = manifold::assemble_phase_psds(ch, state.geometry, state.splitting,
                                                   state.radiation, state.precoder, aux, dc,
                                                   config);
    const auto [phi_fu, phi_bu] = manifold::minimize_phases(ctx);
    const bool moved = (phi_fu - ctx.start_fu).cwiseAbs().maxCoeff() > 1e-12 ||
                       (phi_bu - ctx.start_bu).cwiseAbs().maxCoeff() > 1e-12;
    if (moved) {
      placement::PhaseTargets targets;
      targets.fu_f = phi_fu.head(n);
      targets.fu_b = phi_fu.tail(n);
      targets.bu_f = phi_bu.head(n);
      targets.bu_b = phi_bu.tail(n);
      const auto [d_f, d_b] =
          placement::fit_displacement_psds(targets, config, dc.k0, dc.k_g);
      try_displacements(d_f, d_b);
    }
    if (!aligned_fit) {
      aligned_fit = placement::fit_displacement_ts(CVecX::Ones(n), CVecX::Ones(n), config,
                                                   dc.k0, dc.k_g);
    }
    const bool already_aligned =
        (state.geometry.fpa_displacements - aligned_fit->first).cwiseAbs().maxCoeff() == 0.0 &&
        (state.geometry.bpa_displacements - aligned_fit->second).cwiseAbs().maxCoeff() == 0.0;
    if (!already_aligned) try_displacements(aligned_fit->first, aligned_fit->second);
    refresh_aux();
  };

  auto splitting_step = [&] {
    const auto quad = manifold::assemble_beta_psds(ch, state.geometry, state.radiation,
                                                   state.precoder, aux, dc, config);
    if (protocol == Protocol::PS) {
      const VecX theta2 = splitting::minimize_theta_ps(state.splitting.theta, quad);
      // Candidate set: the quasi-Newton point plus its binary lattice
      // neighbors with a re-pointed precoder. Binary splits are
      // feasible here, and the smooth descent cannot hop between the
      // interior basin and the corners on its own.
      auto try_theta = [&](const VecX& theta_cand, bool repoint) {
        DesignVariables probe = state;
        probe.splitting.theta = theta_cand;
        ChannelSet ch2 = rebuild(probe);
        PrecoderState prec = state.precoder;
        if (repoint) {
          const auto aux2 = wmmse::update_aux_psds(ch2, prec, n0);
          prec = wmmse::update_precoder_psds(ch2, aux2, p_t);
        }
        const double r2 = model::sum_rate_psds(ch2, prec, n0).sum();
        if (r2 >= rate) {
          state.splitting.theta = theta_cand;
          state.precoder = std::move(prec);
          ch = std::move(ch2);
          rate = r2;
        }
      };
      try_theta(theta2, false);
      VecX rounded(theta2.size());
      for (int m = 0; m < rounded.size(); ++m)
        rounded[m] = theta2[m] < kQuarterPi ? 0.0 : kHalfPi;
      try_theta(rounded, true);
      for (int m = 0; m < rounded.size(); ++m) {
        VecX flipped = rounded;
        flipped[m] = rounded[m] == 0.0 ? kHalfPi : 0.0;
        try_theta(flipped, true);
      }
    } else {
      // Penalized descent; the exact rate may dip while the splits drift
      // toward binary values. The incumbent keeps the reported progress.
      state.splitting.theta = splitting::minimize_theta_ds(state.splitting.theta, quad, rho);
      ch = rebuild(state);
      rate = model::sum_rate_psds(ch, state.precoder, n0).sum();
    }
    refresh_aux();
  };

  // The blocks contract slowly against each other at high SNR; cycling
  // them until they settle extracts the progress one sequential pass
  // leaves behind, and keeps the precoder from locking in a beam
  // structure the placement has not caught up with yet. The penalty
  // loop re-enters every block each outer iteration anyway, so it runs
  // on a reduced budget.
  const int cycle_budget = binary_mode ? std::min(opts.inner_cycles, 12) : opts.inner_cycles;
  auto transmit_cycle = [&](int budget) {
    for (int c = 0; c < budget; ++c) {
      const double before = rate;
      if (opts.update_precoder) precoder_step();
      if (opts.update_radiation) radiation_step();
      // The displacement fit is the expensive block; early cycles keep
      // it coupled to the beams, later cycles refresh it periodically.
      if (opts.update_placement && (c < 3 || c % 8 == 0)) placement_step();
      if (rate - before <= kInnerTol * std::max(std::abs(rate), 1.0)) break;
    }
  };

  // At convergence the continuous split update cannot hop basins; refit
  // the binary lattice neighbors with a short frozen-split solve and
  // adopt the best strictly-improving one. Binary splits are feasible
  // points of the continuous protocol, so this only tightens the result.
  int polish_rounds = protocol == Protocol::PS && opts.update_splitting ? 2 : 0;
  auto try_polish = [&]() -> bool {
    SystemConfig screen_cfg = config;
    screen_cfg.max_iterations = 4;
    SolveOptions frozen = opts;
    frozen.update_splitting = false;
    frozen.inner_cycles = 8;
    VecX rounded(state.splitting.theta.size());
    for (int m = 0; m < rounded.size(); ++m)
      rounded[m] = state.splitting.theta[m] < kQuarterPi ? 0.0 : kHalfPi;
    std::vector<VecX> candidates{state.splitting.theta, rounded};
    for (int m = 0; m < rounded.size(); ++m) {
      VecX flipped = rounded;
      flipped[m] = rounded[m] == 0.0 ? kHalfPi : 0.0;
      candidates.push_back(std::move(flipped));
    }
    // Screen the candidates with short frozen-split runs, then chase the
    // winner's placement tail with a tightened tolerance: the per-pass
    // displacement gains fall under the outer tolerance long before they
    // are exhausted.
    double best_rate = rate;
    int best = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      DesignVariables init = state;
      init.splitting.theta = candidates[i];
      const SolveResult res = run_algorithm1(Protocol::PS, screen_cfg, init, frozen);
      if (res.rates.sum() > best_rate) {
        best_rate = res.rates.sum();
        best = static_cast<int>(i);
      }
    }
    if (best < 0) return false;
    SystemConfig deep_cfg = config;
    deep_cfg.convergence_tolerance = config.convergence_tolerance * 1e-2;
    deep_cfg.max_iterations = 30;
    SolveOptions deep_opts = frozen;
    deep_opts.inner_cycles = 30;
    DesignVariables init = state;
    init.splitting.theta = candidates[best];
    const SolveResult res = run_algorithm1(Protocol::PS, deep_cfg, init, deep_opts);
    if (res.rates.sum() <= rate) return false;
    state = res.state;
    ch = rebuild(state);
    rate = model::sum_rate_psds(ch, state.precoder, n0).sum();
    refresh_aux();
    return true;
  };

  const int loop_budget = std::max(1, config.max_iterations - (binary_mode ? 2 : 1));
  int iter = 1;
  for (; iter <= loop_budget; ++iter) {
    transmit_cycle(cycle_budget);
    if (opts.update_splitting) splitting_step();
    if (binary_mode) update_incumbent();

    const double prev = out.trace.back().sum_rate;
    record(iter);
    const bool reported_converged =
        iter >= kMinIterations &&
        relative_change(out.trace.back().sum_rate, prev) < config.convergence_tolerance;
    if (!binary_mode) {
      if (reported_converged) {
        if (polish_rounds > 0 && try_polish()) {
          --polish_rounds;
          continue;
        }
        out.converged = true;
        break;
      }
    } else {
      // The penalty path ends once the reported rate settled and the
      // relaxed splits reached the binary set (or the penalty weight
      // can grow no further).
      if (reported_converged && (state.splitting.is_binary(kRoundTol) || rho >= kRhoCap)) {
        out.converged = true;
        break;
      }
      rho = std::min(rho * config.penalty_growth, kRhoCap);
    }
  }
  iter = std::min(iter, loop_budget);

  if (binary_mode) {
    // Rounding is exact on the incumbent; one refinement pass with the
    // splits frozen closes the gap left by the snap.
    state = incumbent;
    ch = rebuild(state);
    rate = model::sum_rate_psds(ch, state.precoder, n0).sum();
    refresh_aux();
    transmit_cycle(opts.inner_cycles);
    incumbent = state;
    incumbent_rate = std::max(incumbent_rate, rate);
    ++iter;
    record(iter);
  }

  out.state = std::move(state);
  out.rates = model::sum_rate_psds(ch, out.state.precoder, n0);
  out.iterations = iter;
  return out;
}

SolveResult run_algorithm2(const SystemConfig& config, const DesignVariables& initial,
                           const SolveOptions& opts) {
  const auto dc = model::derive_constants(config);
  const double p_t = dc.transmit_power_mw;
  const double n0 = dc.noise_power_mw;

  DesignVariables state = initial;
  auto rebuild = [&](const DesignVariables& s) {
    return model::build_channels(Protocol::TS, s.geometry, s.splitting, s.radiation, dc,
                                 config);
  };
  ChannelSet ch = rebuild(state);
  state.precoder = wmmse::mrt_precoder(ch, p_t);
  double rate = model::sum_rate_ts(ch, state.precoder, state.time, n0).sum();
  wmmse::VectorAux aux = wmmse::update_aux_ts(ch, state.time, p_t, n0);

  SolveResult out;
  auto record = [&](int it) {
    out.trace.add({it, rate, wmmse::surrogate_objective_ts(ch, state.time, aux, p_t, n0),
                   state_residual(state, config, p_t), 0.0, state.time.mu_fu});
  };
  record(0);

  auto refresh_aux = [&] { aux = wmmse::update_aux_ts(ch, state.time, p_t, n0); };

  auto mu_step = [&] {
    TimeAllocation cand = update_mu(ch, aux, p_t, n0);
    const double r2 = model::sum_rate_ts(ch, state.precoder, cand, n0).sum();
    if (r2 >= rate) {
      state.time = cand;
      rate = r2;
    }
    refresh_aux();
  };

  auto commit_channels = [&](DesignVariables&& cand, ChannelSet&& ch2) {
    PrecoderState prec2 = wmmse::mrt_precoder(ch2, p_t);
    const double r2 = model::sum_rate_ts(ch2, prec2, cand.time, n0).sum();
    if (r2 >= rate) {
      state = std::move(cand);
      state.precoder = std::move(prec2);
      ch = std::move(ch2);
      rate = r2;
    }
    refresh_aux();
  };

  auto radiation_step = [&] {
    const auto [quad_f, quad_b] = manifold::assemble_radiation_ts(ch, aux, state.time);
    DesignVariables cand = state;
    cand.radiation = manifold::minimize_radiation_ts(quad_f, quad_b, state.radiation);
    ChannelSet ch2 = rebuild(cand);
    commit_channels(std::move(cand), std::move(ch2));
  };

  const int n = config.num_pas_per_direction;
  auto try_displacements = [&](const VecX& d_f, const VecX& d_b) {
    DesignVariables cand = state;
    cand.geometry = model::build_geometry(config, d_f, d_b);
    ChannelSet ch2 = rebuild(cand);
    commit_channels(std::move(cand), std::move(ch2));
  };
  // Common-phase alignment per direction: the one-way channel is
  // rank-one in the phases, so this is the exact norm maximizer. The
  // weighted-error relaxation saturates once the receive filter matches
  // the channel and stops proposing it at high SNR. Geometry-only, so
  // fitted once per solve.
  std::optional<std::pair<VecX, VecX>> aligned_fit;
  auto placement_step = [&] {
    const auto ctx = manifold::assemble_phase_ts(ch, state.geometry, state.radiation, aux,
                                                 state.time, dc, config);
    const auto [phi_f, phi_b] = manifold::minimize_phases(ctx);
    const bool moved = (phi_f - ctx.start_fu).cwiseAbs().maxCoeff() > 1e-12 ||
                       (phi_b - ctx.start_bu).cwiseAbs().maxCoeff() > 1e-12;
    if (moved) {
      const auto [d_f, d_b] =
          placement::fit_displacement_ts(phi_f, phi_b, config, dc.k0, dc.k_g);
      try_displacements(d_f, d_b);
    }
    if (!aligned_fit) {
      aligned_fit = placement::fit_displacement_ts(CVecX::Ones(n), CVecX::Ones(n), config,
                                                   dc.k0, dc.k_g);
    }
    const bool already_aligned =
        (state.geometry.fpa_displacements - aligned_fit->first).cwiseAbs().maxCoeff() == 0.0 &&
        (state.geometry.bpa_displacements - aligned_fit->second).cwiseAbs().maxCoeff() == 0.0;
    if (!already_aligned) try_displacements(aligned_fit->first, aligned_fit->second);
  };

  // Placement sits inside the cycle: each auxiliary refresh only exposes
  // a sliver of the alignment gain, so one pass per outer iteration
  // starves the time-shared protocol of its main lever.
  auto transmit_cycle = [&] {
    for (int c = 0; c < opts.inner_cycles; ++c) {
      const double before = rate;
      mu_step();
      if (opts.update_radiation) radiation_step();
      if (opts.update_placement && (c < 3 || c % 8 == 0)) placement_step();
      if (rate - before <= kInnerTol * std::max(std::abs(rate), 1.0)) break;
    }
  };

  const int loop_budget = std::max(1, config.max_iterations - 1);
  int iter = 1;
  for (; iter <= loop_budget; ++iter) {
    transmit_cycle();

    const double prev = out.trace.back().sum_rate;
    record(iter);
    if (iter >= kMinIterations &&
        relative_change(rate, prev) < config.convergence_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.state = std::move(state);
  out.rates = model::sum_rate_ts(ch, out.state.precoder, out.state.time, n0);
  out.iterations = std::min(iter, loop_budget);
  return out;
}

SolveResult solve(Protocol protocol, const SystemConfig& config) {
  const DesignVariables init = default_initialization(protocol, config);
  return protocol == Protocol::TS ? run_algorithm2(config, init)
                                  : run_algorithm1(protocol, config, init);
}

MuQuadratic assemble_mu_quadratic(const ChannelSet& channels, const wmmse::VectorAux& aux,
                                  double transmit_power_mw, double noise_mw) {
  auto terms = [&](const CVecX& h_eff, const CVecX& t, double kappa) {
    const Complex z = t.size() ? Complex(t.adjoint() * h_eff) : Complex(0.0);
    const double c = kappa * std::norm(1.0 - z) / ln2 - std::log2(kappa);
    const double q = kappa * noise_mw / (transmit_power_mw * ln2) *
                     (t.size() ? t.squaredNorm() : 0.0);
    return std::pair<double, double>{c, q};
  };
  const auto [c_f, q_f] = terms(channels.h_eff_fu, aux.t_fu, aux.kappa_fu);
  const auto [c_b, q_b] = terms(channels.h_eff_bu, aux.t_bu, aux.kappa_bu);
  MuQuadratic mq;
  mq.a = q_f + q_b;
  mq.b = c_f - c_b - 2.0 * q_b;
  mq.c = c_b + q_b;
  return mq;
}

TimeAllocation update_mu(const ChannelSet& channels, const wmmse::VectorAux& aux,
                         double transmit_power_mw, double noise_mw) {
  const MuQuadratic mq = assemble_mu_quadratic(channels, aux, transmit_power_mw, noise_mw);
  if (mq.a <= 0.0)
    throw std::logic_error("time-allocation quadratic lost positivity");
  const double mu = std::clamp(-mq.b / (2.0 * mq.a), 0.0, 1.0);
  return TimeAllocation{mu, 1.0 - mu};
}

FinalReport evaluate_final(Protocol protocol, const DesignVariables& state,
                           const SystemConfig& config) {
  const auto dc = model::derive_constants(config);
  const ChannelSet ch = model::build_channels(protocol, state.geometry, state.splitting,
                                              state.radiation, dc, config);
  FinalReport rep;
  rep.rates = (protocol == Protocol::TS)
                  ? model::sum_rate_ts(ch, state.precoder, state.time, dc.noise_power_mw)
                  : model::sum_rate_psds(ch, state.precoder, dc.noise_power_mw);

  // Time-orthogonal users each transmit alone at full power, so the
  // budget applies per beam; simultaneous protocols share it.
  const double used_power =
      protocol == Protocol::TS
          ? std::max(state.precoder.w_fu.squaredNorm(), state.precoder.w_bu.squaredNorm())
          : state.precoder.total_power();
  rep.power_excess_mw = std::max(0.0, used_power - dc.transmit_power_mw);
  rep.radiation_norm_error = std::max(std::abs(state.radiation.xi_f.norm() - 1.0),
                                      std::abs(state.radiation.xi_b.norm() - 1.0));
  rep.radiation_negativity = std::max(-std::min(0.0, state.radiation.xi_f.minCoeff()),
                                      -std::min(0.0, state.radiation.xi_b.minCoeff()));
  for (int m = 0; m < state.splitting.theta.size(); ++m) {
    const double c = std::cos(state.splitting.theta[m]);
    const double s = std::sin(state.splitting.theta[m]);
    rep.energy_error = std::max(rep.energy_error, std::abs(c * c + s * s - 1.0));
    if (protocol == Protocol::DS) {
      const double dist = std::min(std::abs(state.splitting.theta[m]),
                                   std::abs(state.splitting.theta[m] - kHalfPi));
      rep.binary_error = std::max(rep.binary_error, dist);
    }
  }
  const double delta = config.max_displacement_m;
  rep.displacement_excess_m =
      std::max(0.0, std::max(state.geometry.fpa_displacements.cwiseAbs().maxCoeff(),
                             state.geometry.bpa_displacements.cwiseAbs().maxCoeff()) -
                        delta);
  if (protocol == Protocol::TS) {
    rep.time_error = std::abs(state.time.mu_fu + state.time.mu_bu - 1.0) +
                     std::max(0.0, -state.time.mu_fu) + std::max(0.0, state.time.mu_fu - 1.0);
  }
  rep.max_residual = std::max({rep.power_excess_mw / std::max(dc.transmit_power_mw, 1e-12),
                               rep.radiation_norm_error, rep.radiation_negativity,
                               rep.energy_error, rep.displacement_excess_m, rep.binary_error,
                               rep.time_error});
  rep.feasible = rep.power_excess_mw <= 1e-9 + 1e-9 * dc.transmit_power_mw &&
                 rep.radiation_norm_error <= 1e-9 && rep.radiation_negativity <= 0.0 &&
                 rep.energy_error <= 1e-12 && rep.displacement_excess_m <= 1e-15 &&
                 rep.binary_error <= 0.0 && rep.time_error <= 1e-12;
  return rep;
}

}  // namespace cpass::solver
