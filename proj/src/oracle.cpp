#include "cpass/oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "cpass/model.hpp"
#include "cpass/solver.hpp"

namespace cpass::oracle {

VecX finite_diff_gradient(const std::function<double(const VecX&)>& objective,
                          const VecX& point, double h) {
  VecX g(point.size());
  for (int i = 0; i < point.size(); ++i) {
    VecX hi = point, lo = point;
    hi[i] += h;
    lo[i] -= h;
    const double f_hi = objective(hi);
    const double f_lo = objective(lo);
    if (!std::isfinite(f_hi) || !std::isfinite(f_lo))
      throw std::runtime_error("finite differences hit a non-finite objective value");
    g[i] = (f_hi - f_lo) / (2.0 * h);
  }
  return g;
}

double gradient_relative_error(const VecX& analytical, const VecX& numerical) {
  return (analytical - numerical).norm() / std::max(analytical.norm(), 1e-12);
}

DsSearchResult exhaustive_ds_search(const SystemConfig& config,
                                    const DesignVariables& frozen_outer) {
  const int m = config.num_ports;
  if (m > 12) throw std::invalid_argument("exhaustive search limited to 2^12 assignments");
  constexpr double half_pi = std::numbers::pi / 2.0;

  DsSearchResult out;
  out.enumerated = 1 << m;
  out.best_rate = -std::numeric_limits<double>::infinity();
  solver::SolveOptions opts;
  opts.update_splitting = false;
  for (int mask = 0; mask < (1 << m); ++mask) {
    DesignVariables init = frozen_outer;
    VecX theta(m);
    for (int i = 0; i < m; ++i) theta[i] = (mask >> i) & 1 ? half_pi : 0.0;
    init.splitting.theta = theta;
    const auto res = solver::run_algorithm1(Protocol::PS, config, init, opts);
    if (res.rates.sum() > out.best_rate) {
      out.best_rate = res.rates.sum();
      out.best_theta = theta;
    }
  }
  return out;
}

MuGridResult grid_max_mu(const ChannelSet& channels_oneway, const PrecoderState& precoder,
                         double noise_mw, int grid) {
  if (grid < 2) throw std::invalid_argument("mu grid needs at least two points");
  MuGridResult out;
  out.rate = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double mu = static_cast<double>(i) / (grid - 1);
    const auto r = model::sum_rate_ts(channels_oneway, precoder, TimeAllocation{mu, 1.0 - mu},
                                      noise_mw);
    if (r.sum() > out.rate) {
      out.rate = r.sum();
      out.mu_fu = mu;
    }
  }
  return out;
}

namespace {

struct ScalarComplex {
  double re = 0.0, im = 0.0;
};

ScalarComplex expj(double phase) { return {std::cos(phase), std::sin(phase)}; }

ScalarComplex mul(ScalarComplex a, ScalarComplex b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

ScalarComplex add(ScalarComplex a, ScalarComplex b) { return {a.re + b.re, a.im + b.im}; }

double mag2(ScalarComplex a) { return a.re * a.re + a.im * a.im; }

}  // namespace

RecomputeReport rate_recompute_check(Protocol protocol, const DesignVariables& state,
                                     const SystemConfig& config, const ChannelSet& claimed,
                                     const RatePair& claimed_rates, double tol) {
  RecomputeReport rep;
  const int m_ports = config.num_ports;
  const int n_pas = config.num_pas_per_direction;
  const double lambda0 = config.speed_of_light_m_s / config.carrier_frequency_hz;
  const double pi = std::numbers::pi;
  const double k0 = 2.0 * pi / lambda0;
  const double k_g = 2.0 * pi / (lambda0 / config.effective_refractive_index);
  const double eta = lambda0 / (4.0 * pi);
  const double n0 = std::pow(10.0, config.noise_power_dbm / 10.0);

  auto update = [&](double resid, const std::string& where) {
    if (resid > rep.max_residual) {
      rep.max_residual = resid;
      rep.detail = where;
    }
  };

  // Positions, scalar formulas only.
  std::vector<double> port_x(m_ports), fpa_x(n_pas), bpa_x(n_pas);
  for (int m = 0; m < m_ports; ++m)
    port_x[m] = (m + 1 - (m_ports + 1) / 2.0) * config.port_spacing_m;
  for (int n = 0; n < n_pas; ++n) {
    fpa_x[n] = (m_ports - 1) / 2.0 * config.port_spacing_m + (n + 1) * config.pa_spacing_m +
               state.geometry.fpa_displacements[n];
    bpa_x[n] = -(m_ports - 1) / 2.0 * config.port_spacing_m - (n + 1) * config.pa_spacing_m +
               state.geometry.bpa_displacements[n];
  }

  // Waveguide channels entry by entry.
  std::vector<std::vector<ScalarComplex>> g_f(m_ports, std::vector<ScalarComplex>(n_pas));
  std::vector<std::vector<ScalarComplex>> g_b(m_ports, std::vector<ScalarComplex>(n_pas));
  for (int m = 0; m < m_ports; ++m) {
    const double amp_f =
        protocol == Protocol::TS ? 1.0 : std::cos(state.splitting.theta[m]);
    const double amp_b =
        protocol == Protocol::TS ? 1.0 : std::sin(state.splitting.theta[m]);
    for (int n = 0; n < n_pas; ++n) {
      const ScalarComplex pf = expj(-k_g * std::abs(fpa_x[n] - port_x[m]));
      const ScalarComplex pb = expj(-k_g * std::abs(bpa_x[n] - port_x[m]));
      g_f[m][n] = {amp_f * pf.re, amp_f * pf.im};
      g_b[m][n] = {amp_b * pb.re, amp_b * pb.im};
      update(std::hypot(g_f[m][n].re - claimed.g_f(m, n).real(),
                        g_f[m][n].im - claimed.g_f(m, n).imag()),
             "g_f entry");
      update(std::hypot(g_b[m][n].re - claimed.g_b(m, n).real(),
                        g_b[m][n].im - claimed.g_b(m, n).imag()),
             "g_b entry");
    }
  }

  // Free-space channels.
  auto freespace = [&](double user_x, double user_y, const std::vector<double>& pa_x,
                       std::vector<ScalarComplex>& h) {
    h.resize(n_pas);
    for (int n = 0; n < n_pas; ++n) {
      const double r = std::hypot(pa_x[n] - user_x, user_y);
      const ScalarComplex ph = expj(-k0 * r);
      h[n] = {eta / r * ph.re, eta / r * ph.im};
    }
  };
  std::vector<ScalarComplex> h_fu_f, h_fu_b, h_bu_f, h_bu_b;
  freespace(config.user_fu_position[0], config.user_fu_position[1], fpa_x, h_fu_f);
  freespace(config.user_fu_position[0], config.user_fu_position[1], bpa_x, h_fu_b);
  freespace(config.user_bu_position[0], config.user_bu_position[1], fpa_x, h_bu_f);
  freespace(config.user_bu_position[0], config.user_bu_position[1], bpa_x, h_bu_b);
  for (int n = 0; n < n_pas; ++n) {
    update(std::hypot(h_fu_f[n].re - claimed.h_fu_f[n].real(),
                      h_fu_f[n].im - claimed.h_fu_f[n].imag()),
           "h_fu_f entry");
    update(std::hypot(h_bu_b[n].re - claimed.h_bu_b[n].real(),
                      h_bu_b[n].im - claimed.h_bu_b[n].imag()),
           "h_bu_b entry");
  }

  // Effective channels and rates.
  auto h_eff = [&](const std::vector<std::vector<ScalarComplex>>& g_first,
                   const std::vector<ScalarComplex>& h_first, const VecX& xi_first,
                   const std::vector<std::vector<ScalarComplex>>& g_second,
                   const std::vector<ScalarComplex>& h_second, const VecX& xi_second,
                   bool one_way) {
    std::vector<ScalarComplex> he(m_ports);
    for (int m = 0; m < m_ports; ++m) {
      ScalarComplex acc{0.0, 0.0};
      for (int n = 0; n < n_pas; ++n) {
        ScalarComplex term = mul(g_first[m][n], h_first[n]);
        acc = add(acc, {xi_first[n] * term.re, xi_first[n] * term.im});
        if (!one_way) {
          term = mul(g_second[m][n], h_second[n]);
          acc = add(acc, {xi_second[n] * term.re, xi_second[n] * term.im});
        }
      }
      he[m] = acc;
    }
    return he;
  };
  const bool one_way = protocol == Protocol::TS;
  const auto he_fu = h_eff(g_f, h_fu_f, state.radiation.xi_f, g_b, h_fu_b,
                           state.radiation.xi_b, one_way);
  // Under TS the backward user's effective channel runs through the
  // backward antennas only.
  const auto he_bu =
      one_way ? h_eff(g_b, h_bu_b, state.radiation.xi_b, g_f, h_bu_f, state.radiation.xi_f,
                      true)
              : h_eff(g_f, h_bu_f, state.radiation.xi_f, g_b, h_bu_b, state.radiation.xi_b,
                      false);
  for (int m = 0; m < m_ports; ++m) {
    update(std::hypot(he_fu[m].re - claimed.h_eff_fu[m].real(),
                      he_fu[m].im - claimed.h_eff_fu[m].imag()),
           "h_eff_fu entry");
    update(std::hypot(he_bu[m].re - claimed.h_eff_bu[m].real(),
                      he_bu[m].im - claimed.h_eff_bu[m].imag()),
           "h_eff_bu entry");
  }

  auto inner = [&](const std::vector<ScalarComplex>& he, const CVecX& w) {
    ScalarComplex acc{0.0, 0.0};
    for (int m = 0; m < m_ports; ++m)
      acc = add(acc, mul(he[m], {w[m].real(), w[m].imag()}));
    return acc;
  };

  double rate_fu = 0.0, rate_bu = 0.0;
  if (protocol == Protocol::TS) {
    const double mu_f = state.time.mu_fu, mu_b = state.time.mu_bu;
    if (mu_f > 0.0)
      rate_fu = mu_f * std::log2(1.0 + mag2(inner(he_fu, state.precoder.w_fu)) / (mu_f * n0));
    if (mu_b > 0.0)
      rate_bu = mu_b * std::log2(1.0 + mag2(inner(he_bu, state.precoder.w_bu)) / (mu_b * n0));
  } else {
    const double s_fu = mag2(inner(he_fu, state.precoder.w_fu));
    const double i_fu = mag2(inner(he_fu, state.precoder.w_bu));
    const double s_bu = mag2(inner(he_bu, state.precoder.w_bu));
    const double i_bu = mag2(inner(he_bu, state.precoder.w_fu));
    rate_fu = std::log2(1.0 + s_fu / (i_fu + n0));
    rate_bu = std::log2(1.0 + s_bu / (i_bu + n0));
  }
  update(std::abs(rate_fu - claimed_rates.fu), "rate_fu");
  update(std::abs(rate_bu - claimed_rates.bu), "rate_bu");

  rep.pass = rep.max_residual <= tol;
  return rep;
}

RecomputeReport rate_recompute_check(Protocol protocol, const DesignVariables& state,
                                     const SystemConfig& config, double tol) {
  const auto dc = model::derive_constants(config);
  const ChannelSet ch = model::build_channels(protocol, state.geometry, state.splitting,
                                              state.radiation, dc, config);
  const RatePair rates =
      protocol == Protocol::TS
          ? model::sum_rate_ts(ch, state.precoder, state.time, dc.noise_power_mw)
          : model::sum_rate_psds(ch, state.precoder, dc.noise_power_mw);
  return rate_recompute_check(protocol, state, config, ch, rates, tol);
}

}  // namespace cpass::oracle
