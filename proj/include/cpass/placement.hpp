#pragma once

#include "cpass/types.hpp"

namespace cpass::placement {

/// Target phases per (user, direction, antenna) produced by the phase
/// relaxation; each column vector has one entry per antenna.
struct PhaseTargets {
  CVecX fu_f, fu_b;  // forward/backward blocks for the forward user
  CVecX bu_f, bu_b;  // and for the backward user
};

/// Fits one displacement per (antenna, direction) by total grid search
/// on [-Delta, Delta], minimizing the summed squared phase mismatch of
/// both users. Distances are recomputed exactly at every candidate.
std::pair<VecX, VecX> fit_displacement_psds(const PhaseTargets& targets,
                                            const SystemConfig& config, double k0, double k_g);

/// Single-user variant: the forward user drives the forward antennas
/// and the backward user the backward ones.
std::pair<VecX, VecX> fit_displacement_ts(const CVecX& target_fu_f, const CVecX& target_bu_b,
                                          const SystemConfig& config, double k0, double k_g);

/// Rebuilds antenna coordinates for the given displacements; channels
/// must be rebuilt by the caller.
Geometry apply_displacements(const SystemConfig& config, const VecX& d_f, const VecX& d_b);

/// Residual of one candidate displacement against a set of user targets,
/// exposed for the fine-grid verification oracle.
double fit_residual(const SystemConfig& config, double k0, double k_g, bool forward, int antenna,
                    double d, const std::vector<std::pair<Vec2, Complex>>& user_targets);

}  // namespace cpass::placement
