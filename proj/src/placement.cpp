#include "cpass/placement.hpp"

#include <cmath>

#include "cpass/model.hpp"

namespace cpass::placement {

namespace {
constexpr Complex kJ{0.0, 1.0};

/// Model phase radiated by antenna `n` of one direction at displacement d:
/// free-space phase to the user plus the in-waveguide phase past the
/// nearest port. Backward antennas move toward the feed for positive d.
Complex model_phase(const SystemConfig& config, double k0, double k_g, bool forward, int n,
                    double d, const Vec2& user) {
  const double edge = (config.num_ports - 1) / 2.0 * config.port_spacing_m;
  const double base = (n + 1) * config.pa_spacing_m;
  const Vec2 pos = forward ? Vec2(edge + base + d, 0.0) : Vec2(-edge - base + d, 0.0);
  const double r = (pos - user).norm();
  const double wg = forward ? base + d : base - d;
  return std::exp(-kJ * (k0 * r + k_g * wg));
}

VecX fit_direction(const SystemConfig& config, double k0, double k_g, bool forward,
                   const std::vector<std::pair<Vec2, const CVecX*>>& users) {
  const int n_pas = config.num_pas_per_direction;
  const int grid = config.displacement_grid_points;
  const double delta = config.max_displacement_m;
  VecX d_out(n_pas);
  for (int n = 0; n < n_pas; ++n) {
    double best_d = -delta;
    double best_res = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
      const double d = -delta + 2.0 * delta * i / (grid - 1);
      double res = 0.0;
      for (const auto& [user_pos, target] : users) {
        res += std::norm((*target)[n] - model_phase(config, k0, k_g, forward, n, d, user_pos));
      }
      if (res < best_res) {
        best_res = res;
        best_d = d;
      }
    }
    d_out[n] = best_d;
  }
  return d_out;
}

}  // namespace

double fit_residual(const SystemConfig& config, double k0, double k_g, bool forward, int antenna,
                    double d, const std::vector<std::pair<Vec2, Complex>>& user_targets) {
  double res = 0.0;
  for (const auto& [user_pos, target] : user_targets) {
    res += std::norm(target - model_phase(config, k0, k_g, forward, antenna, d, user_pos));
  }
  return res;
}

std::pair<VecX, VecX> fit_displacement_psds(const PhaseTargets& targets,
                                            const SystemConfig& config, double k0, double k_g) {
  const std::vector<std::pair<Vec2, const CVecX*>> fwd = {
      {config.user_fu_position, &targets.fu_f}, {config.user_bu_position, &targets.bu_f}};
  const std::vector<std::pair<Vec2, const CVecX*>> bwd = {
      {config.user_fu_position, &targets.fu_b}, {config.user_bu_position, &targets.bu_b}};
  return {fit_direction(config, k0, k_g, true, fwd), fit_direction(config, k0, k_g, false, bwd)};
}

std::pair<VecX, VecX> fit_displacement_ts(const CVecX& target_fu_f, const CVecX& target_bu_b,
                                          const SystemConfig& config, double k0, double k_g) {
  const std::vector<std::pair<Vec2, const CVecX*>> fwd = {
      {config.user_fu_position, &target_fu_f}};
  const std::vector<std::pair<Vec2, const CVecX*>> bwd = {
      {config.user_bu_position, &target_bu_b}};
  return {fit_direction(config, k0, k_g, true, fwd), fit_direction(config, k0, k_g, false, bwd)};
}

Geometry apply_displacements(const SystemConfig& config, const VecX& d_f, const VecX& d_b) {
  return model::build_geometry(config, d_f, d_b);
}

}  // namespace cpass::placement
