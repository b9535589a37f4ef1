#pragma once

#include <optional>

#include "cpass/manifold.hpp"
#include "cpass/types.hpp"

namespace cpass::splitting {

/// Binary-attracting penalty: sum_m (cos + sin - 1), zero exactly at
/// theta_m in {0, pi/2} and positive elsewhere on the box.
double penalty_value(const VecX& theta);
VecX penalty_grad(const VecX& theta);

/// Objective and analytical angle gradient of the splitting surrogate,
/// with the penalty term added when rho > 0.
std::pair<double, VecX> splitting_objective_and_grad(const VecX& theta,
                                                     const manifold::BetaQuadratic& quad,
                                                     double rho = 0.0);

/// Box-constrained minimization of the continuous splitting surrogate
/// (limited-memory secant directions with gradient projection).
VecX minimize_theta_ps(const VecX& start, const manifold::BetaQuadratic& quad);

/// Same solver on the penalized surrogate used for the binary protocol.
VecX minimize_theta_ds(const VecX& start, const manifold::BetaQuadratic& quad, double rho);

/// Snap every angle to {0, pi/2}. Returns nullopt when any angle is
/// farther than the tolerance, in which case the penalty loop continues.
std::optional<VecX> round_binary(const VecX& theta, double tolerance);

}  // namespace cpass::splitting
