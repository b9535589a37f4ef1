#pragma once

#include "cpass/solver.hpp"
#include "cpass/types.hpp"

namespace cpass::baselines {

/// Conventional end-fed operation: every port routes all power forward,
/// both users are served through the forward antennas, and the split
/// subproblem is skipped.
solver::SolveResult solve_end_fed(const SystemConfig& config);

/// Uniform pinching beamforming: nominal antenna grid (no displacement)
/// and equal radiation amplitudes, with only the transmit side (precoder
/// plus splits or time shares) optimized.
solver::SolveResult solve_uniform_pinching(Protocol protocol, const SystemConfig& config);

struct RandomPrecodingResult {
  double mean_rate_sum = 0.0;
  double std_rate_sum = 0.0;
  double mean_rate_fu = 0.0;
  double mean_rate_bu = 0.0;
  int realizations = 0;
  int iterations_max = 0;
  std::vector<double> rates;  // per-realization sum rates, in seed order
};

/// Random transmit precoding: per realization an isotropic Gaussian
/// precoder is drawn, scaled to the power budget and frozen, and the
/// remaining beamforming loop runs to convergence. Realization i uses
/// seed rng_seed + i, so results are deterministic and order-free.
RandomPrecodingResult solve_random_precoding(Protocol protocol, const SystemConfig& config,
                                             int n_realizations);

}  // namespace cpass::baselines
