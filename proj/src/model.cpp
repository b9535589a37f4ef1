#include "cpass/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cpass {

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::PS: return "PS";
    case Protocol::DS: return "DS";
    case Protocol::TS: return "TS";
  }
  return "?";
}

Protocol protocol_from_string(const std::string& name) {
  if (name == "PS") return Protocol::PS;
  if (name == "DS") return Protocol::DS;
  if (name == "TS") return Protocol::TS;
  throw std::invalid_argument("unknown protocol: " + name);
}

bool SplittingState::is_binary(double tol) const {
  constexpr double half_pi = std::numbers::pi / 2.0;
  for (int m = 0; m < theta.size(); ++m) {
    if (std::min(std::abs(theta[m]), std::abs(theta[m] - half_pi)) > tol) return false;
  }
  return true;
}

}  // namespace cpass

namespace cpass::model {

namespace {
constexpr Complex kJ{0.0, 1.0};
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}  // namespace

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

DerivedConstants derive_constants(const SystemConfig& config) {
  if (config.carrier_frequency_hz <= 0.0)
    throw std::invalid_argument("carrier_frequency_hz must be positive");
  if (config.speed_of_light_m_s <= 0.0)
    throw std::invalid_argument("speed_of_light_m_s must be positive");
  if (config.effective_refractive_index < 1.0)
    throw std::invalid_argument("effective_refractive_index must be >= 1");
  if (config.num_ports < 1) throw std::invalid_argument("num_ports must be >= 1");
  if (config.num_pas_per_direction < 1)
    throw std::invalid_argument("num_pas_per_direction must be >= 1");
  if (config.port_spacing_m <= 0.0) throw std::invalid_argument("port_spacing_m must be positive");
  if (config.pa_spacing_m <= 0.0) throw std::invalid_argument("pa_spacing_m must be positive");
  if (config.max_displacement_m < 0.0)
    throw std::invalid_argument("max_displacement_m must be non-negative");
  if (config.penalty_growth <= 1.0) throw std::invalid_argument("penalty_growth must exceed 1");
  if (config.displacement_grid_points < 2)
    throw std::invalid_argument("displacement_grid_points must be >= 2");
  if (config.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (config.convergence_tolerance <= 0.0)
    throw std::invalid_argument("convergence_tolerance must be positive");

  DerivedConstants dc;
  dc.lambda0 = config.speed_of_light_m_s / config.carrier_frequency_hz;
  dc.k0 = kTwoPi / dc.lambda0;
  dc.lambda_g = dc.lambda0 / config.effective_refractive_index;
  dc.k_g = kTwoPi / dc.lambda_g;
  dc.eta = dc.lambda0 / (4.0 * std::numbers::pi);
  dc.transmit_power_mw = dbm_to_mw(config.transmit_power_dbm);
  dc.noise_power_mw = dbm_to_mw(config.noise_power_dbm);
  return dc;
}

Geometry build_geometry(const SystemConfig& config, const VecX& d_f, const VecX& d_b) {
  const int m_ports = config.num_ports;
  const int n_pas = config.num_pas_per_direction;
  if (d_f.size() != n_pas || d_b.size() != n_pas)
    throw std::invalid_argument("displacement vectors must have one entry per antenna");
  const double delta = config.max_displacement_m;
  for (int n = 0; n < n_pas; ++n) {
    if (std::abs(d_f[n]) > delta + 1e-15 || std::abs(d_b[n]) > delta + 1e-15)
      throw std::domain_error("antenna displacement outside [-Delta, Delta]");
  }

  Geometry g;
  g.port_positions.resize(m_ports);
  for (int m = 0; m < m_ports; ++m) {
    g.port_positions[m] = Vec2((m + 1 - (m_ports + 1) / 2.0) * config.port_spacing_m, 0.0);
  }
  g.fpa_positions.resize(n_pas);
  g.bpa_positions.resize(n_pas);
  const double edge = (m_ports - 1) / 2.0 * config.port_spacing_m;
  for (int n = 0; n < n_pas; ++n) {
    const double base = (n + 1) * config.pa_spacing_m;
    g.fpa_positions[n] = Vec2(edge + base + d_f[n], 0.0);
    g.bpa_positions[n] = Vec2(-edge - base + d_b[n], 0.0);
  }
  g.fpa_displacements = d_f;
  g.bpa_displacements = d_b;
  return g;
}

std::pair<CMatX, CMatX> build_waveguide_channel(Protocol protocol, const Geometry& geometry,
                                                const SplittingState& splitting, double k_g) {
  const int m_ports = static_cast<int>(geometry.port_positions.size());
  const int n_pas = static_cast<int>(geometry.fpa_positions.size());
  VecX amp_f, amp_b;
  if (protocol == Protocol::TS) {
    amp_f = VecX::Ones(m_ports);
    amp_b = VecX::Ones(m_ports);
  } else {
    if (splitting.theta.size() != m_ports)
      throw std::invalid_argument("splitting state has wrong number of ports");
    if (protocol == Protocol::DS && !splitting.is_binary(1e-9))
      throw std::invalid_argument("DS waveguide channel requires binary splitting angles");
    amp_f = splitting.amp_forward();
    amp_b = splitting.amp_backward();
  }

  CMatX g_f(m_ports, n_pas), g_b(m_ports, n_pas);
  for (int m = 0; m < m_ports; ++m) {
    for (int n = 0; n < n_pas; ++n) {
      const double dist_f = (geometry.fpa_positions[n] - geometry.port_positions[m]).norm();
      const double dist_b = (geometry.bpa_positions[n] - geometry.port_positions[m]).norm();
      g_f(m, n) = amp_f[m] * std::exp(-kJ * (k_g * dist_f));
      g_b(m, n) = amp_b[m] * std::exp(-kJ * (k_g * dist_b));
    }
  }
  return {std::move(g_f), std::move(g_b)};
}

FreespaceChannel build_freespace_channel(const Geometry& geometry, const Vec2& user_position,
                                         double k0, double eta) {
  const int n_pas = static_cast<int>(geometry.fpa_positions.size());
  FreespaceChannel fc;
  fc.h_f.resize(n_pas);
  fc.h_b.resize(n_pas);
  fc.r_f.resize(n_pas);
  fc.r_b.resize(n_pas);
  for (int n = 0; n < n_pas; ++n) {
    const double r_f = (geometry.fpa_positions[n] - user_position).norm();
    const double r_b = (geometry.bpa_positions[n] - user_position).norm();
    if (r_f <= 0.0 || r_b <= 0.0)
      throw std::domain_error("user coincides with an antenna (zero distance)");
    fc.r_f[n] = r_f;
    fc.r_b[n] = r_b;
    fc.h_f[n] = eta * std::exp(-kJ * (k0 * r_f)) / r_f;
    fc.h_b[n] = eta * std::exp(-kJ * (k0 * r_b)) / r_b;
  }
  return fc;
}

ChannelSet build_channels(Protocol protocol, const Geometry& geometry,
                          const SplittingState& splitting, const RadiationState& radiation,
                          const DerivedConstants& dc, const SystemConfig& config) {
  ChannelSet ch;
  auto [g_f, g_b] = build_waveguide_channel(protocol, geometry, splitting, dc.k_g);
  ch.g_f = std::move(g_f);
  ch.g_b = std::move(g_b);
  auto fu = build_freespace_channel(geometry, config.user_fu_position, dc.k0, dc.eta);
  auto bu = build_freespace_channel(geometry, config.user_bu_position, dc.k0, dc.eta);
  ch.h_fu_f = std::move(fu.h_f);
  ch.h_fu_b = std::move(fu.h_b);
  ch.h_bu_f = std::move(bu.h_f);
  ch.h_bu_b = std::move(bu.h_b);
  ch.r_fu_f = std::move(fu.r_f);
  ch.r_fu_b = std::move(fu.r_b);
  ch.r_bu_f = std::move(bu.r_f);
  ch.r_bu_b = std::move(bu.r_b);

  const auto xi_f = radiation.xi_f.cast<Complex>().asDiagonal();
  const auto xi_b = radiation.xi_b.cast<Complex>().asDiagonal();
  if (protocol == Protocol::TS) {
    ch.h_eff_fu = ch.g_f * (xi_f * ch.h_fu_f);
    ch.h_eff_bu = ch.g_b * (xi_b * ch.h_bu_b);
  } else {
    ch.h_eff_fu = ch.g_f * (xi_f * ch.h_fu_f) + ch.g_b * (xi_b * ch.h_fu_b);
    ch.h_eff_bu = ch.g_f * (xi_f * ch.h_bu_f) + ch.g_b * (xi_b * ch.h_bu_b);
  }
  return ch;
}

RatePair sum_rate_psds(const ChannelSet& channels, const PrecoderState& precoder,
                       double noise_mw) {
  const Complex z_fu_fu = channels.h_eff_fu.transpose() * precoder.w_fu;
  const Complex z_fu_bu = channels.h_eff_fu.transpose() * precoder.w_bu;
  const Complex z_bu_fu = channels.h_eff_bu.transpose() * precoder.w_fu;
  const Complex z_bu_bu = channels.h_eff_bu.transpose() * precoder.w_bu;
  RatePair r;
  r.fu = std::log2(1.0 + std::norm(z_fu_fu) / (std::norm(z_fu_bu) + noise_mw));
  r.bu = std::log2(1.0 + std::norm(z_bu_bu) / (std::norm(z_bu_fu) + noise_mw));
  return r;
}

RatePair sum_rate_ts(const ChannelSet& channels, const PrecoderState& precoder,
                     const TimeAllocation& mu, double noise_mw) {
  auto one_way_rate = [&](const CVecX& h_eff, const CVecX& w, double mu_k) {
    if (mu_k <= 0.0) return 0.0;  // continuous extension of mu*log2(1 + s/mu)
    const Complex z = h_eff.transpose() * w;
    return mu_k * std::log2(1.0 + std::norm(z) / (mu_k * noise_mw));
  };
  RatePair r;
  r.fu = one_way_rate(channels.h_eff_fu, precoder.w_fu, mu.mu_fu);
  r.bu = one_way_rate(channels.h_eff_bu, precoder.w_bu, mu.mu_bu);
  return r;
}

std::pair<CVecX, CVecX> port_phase_ramps(int num_ports, double k_g, double port_spacing) {
  CVecX ramp_f(num_ports), ramp_b(num_ports);
  for (int m = 0; m < num_ports; ++m) {
    ramp_f[m] = std::exp(-kJ * (k_g * (num_ports - 1 - m) * port_spacing));
    ramp_b[m] = std::exp(-kJ * (k_g * m * port_spacing));
  }
  return {std::move(ramp_f), std::move(ramp_b)};
}

VecX relative_wg_coordinates(const SystemConfig& config, const VecX& displacements,
                             bool forward) {
  VecX x(displacements.size());
  for (int n = 0; n < displacements.size(); ++n) {
    const double base = (n + 1) * config.pa_spacing_m;
    x[n] = forward ? base + displacements[n] : base - displacements[n];
  }
  return x;
}

CVecX achievable_phases(const VecX& r, const VecX& wg_coords, double k0, double k_g) {
  CVecX phi(r.size());
  for (int n = 0; n < r.size(); ++n) phi[n] = std::exp(-kJ * (k0 * r[n] + k_g * wg_coords[n]));
  return phi;
}

}  // namespace cpass::model
