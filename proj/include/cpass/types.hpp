#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace cpass {

using Complex = std::complex<double>;
using VecX = Eigen::VectorXd;
using CVecX = Eigen::VectorXcd;
using CMatX = Eigen::MatrixXcd;
using Vec2 = Eigen::Vector2d;

enum class Protocol { PS, DS, TS };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& name);

/// Physical and solver constants. Defaults describe the reference
/// mmWave scenario (28 GHz, two center-fed ports, ten antennas per
/// propagation direction).
struct SystemConfig {
  double carrier_frequency_hz = 28e9;
  double speed_of_light_m_s = 3e8;
  double effective_refractive_index = 1.4;  // n_eff
  int num_ports = 2;                        // M
  int num_pas_per_direction = 10;           // N
  // Port spacing defaults to 5/4 of the in-waveguide wavelength.
  double port_spacing_m = 1.25 * (3e8 / 28e9) / 1.4;  // L_IN
  double pa_spacing_m = 1.0;                          // L_PA
  double max_displacement_m = 0.01;                   // Delta
  double transmit_power_dbm = 20.0;
  double noise_power_dbm = -80.0;
  Vec2 user_fu_position{5.0, 30.0};
  Vec2 user_bu_position{-5.0, 20.0};
  double penalty_init = 0.1;     // rho_0
  double penalty_growth = 1.02;  // c_rho
  int displacement_grid_points = 1000;
  double convergence_tolerance = 1e-3;
  int max_iterations = 1000;
  std::uint64_t rng_seed = 1;

  /// In-waveguide wavelength implied by the current frequency fields.
  double guided_wavelength() const {
    return speed_of_light_m_s / carrier_frequency_hz / effective_refractive_index;
  }
  /// Reference port spacing of 5/4 guided wavelengths.
  double default_port_spacing() const { return 1.25 * guided_wavelength(); }
};

struct DerivedConstants {
  double lambda0;            // free-space wavelength
  double k0;                 // free-space wavenumber
  double lambda_g;           // in-waveguide wavelength
  double k_g;                // in-waveguide wavenumber
  double eta;                // effective channel gain lambda0 / (4 pi)
  double transmit_power_mw;  // P_T in linear milliwatts
  double noise_power_mw;     // N_0 in linear milliwatts
};

/// Positions of input ports and pinching antennas on the waveguide axis.
/// Ports are centered on the origin; forward antennas extend to +x,
/// backward antennas to -x, each offset by a per-antenna displacement.
struct Geometry {
  std::vector<Vec2> port_positions;  // size M
  std::vector<Vec2> fpa_positions;   // size N
  std::vector<Vec2> bpa_positions;   // size N
  VecX fpa_displacements;            // d^F, in [-Delta, Delta]
  VecX bpa_displacements;            // d^B
};

/// Per-port power splitting, parameterized by angles theta in [0, pi/2].
/// cos(theta_m) is the forward amplitude, sin(theta_m) the backward one,
/// so the per-port split always conserves energy.
struct SplittingState {
  VecX theta;

  VecX amp_forward() const { return theta.array().cos(); }
  VecX amp_backward() const { return theta.array().sin(); }
  bool is_binary(double tol) const;
};

/// Power radiation amplitudes of the antennas, one unit-norm
/// non-negative vector per propagation direction.
struct RadiationState {
  VecX xi_f;
  VecX xi_b;
};

struct PrecoderState {
  CVecX w_fu;
  CVecX w_bu;
  double lagrange_multiplier = 0.0;

  double total_power() const { return w_fu.squaredNorm() + w_bu.squaredNorm(); }
  CMatX w_sum() const {
    return w_fu * w_fu.adjoint() + w_bu * w_bu.adjoint();
  }
};

struct TimeAllocation {
  double mu_fu = 0.5;
  double mu_bu = 0.5;
};

/// All channel factors for one system state: in-waveguide matrices G,
/// free-space vectors h with their distances, and the composed
/// effective channels per user.
struct ChannelSet {
  CMatX g_f;  // M x N
  CMatX g_b;  // M x N
  CVecX h_fu_f, h_fu_b;  // N
  CVecX h_bu_f, h_bu_b;  // N
  VecX r_fu_f, r_fu_b;   // antenna-user distances
  VecX r_bu_f, r_bu_b;
  CVecX h_eff_fu;  // M
  CVecX h_eff_bu;  // M
};

struct TraceEntry {
  int iteration = 0;
  double sum_rate = 0.0;   // bits/s/Hz
  double surrogate = 0.0;  // weighted-error objective value
  double max_residual = 0.0;
  double rho = 0.0;  // penalty weight (DS only, 0 otherwise)
  double mu_fu = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceEntry> entries;

  void add(TraceEntry e) { entries.push_back(e); }
  bool empty() const { return entries.empty(); }
  const TraceEntry& back() const { return entries.back(); }
};

/// Complete optimization state for any protocol.
struct DesignVariables {
  Geometry geometry;
  SplittingState splitting;
  RadiationState radiation;
  PrecoderState precoder;
  TimeAllocation time;
};

struct RatePair {
  double fu = 0.0;
  double bu = 0.0;
  double sum() const { return fu + bu; }
};

}  // namespace cpass
