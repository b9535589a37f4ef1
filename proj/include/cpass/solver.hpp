#pragma once

#include <optional>

#include "cpass/types.hpp"
#include "cpass/wmmse.hpp"

namespace cpass::solver {

/// Which blocks the alternating loop updates. Baselines freeze subsets.
struct SolveOptions {
  bool update_precoder = true;
  bool update_radiation = true;
  bool update_placement = true;
  bool update_splitting = true;
  int inner_cycles = 60;  // budget for the per-iteration block cycling
};

struct SolveResult {
  DesignVariables state;
  ConvergenceTrace trace;
  RatePair rates;
  int iterations = 0;
  bool converged = false;
};

/// Feasible symmetric starting point: even splits, uniform radiation,
/// nominal antenna grid, equal-power MRT toward the initial effective
/// channels, and an even time split.
DesignVariables default_initialization(Protocol protocol, const SystemConfig& config,
                                       std::optional<double> theta_fill = std::nullopt);

/// Alternating optimization for the simultaneous-bidirectional
/// protocols. Auxiliaries are refreshed after every subproblem; a
/// subproblem step that lowers the exact sum rate is reverted, so the
/// reported trace is non-decreasing. DS grows the binary penalty each
/// outer iteration and finishes with rounding plus one frozen-split
/// refinement pass.
SolveResult run_algorithm1(Protocol protocol, const SystemConfig& config,
                           const DesignVariables& initial, const SolveOptions& opts = {});

/// Alternating optimization for the time-switched protocol: closed-form
/// time allocation, decoupled per-direction radiation and placement,
/// MRT recomputed whenever the channels change.
SolveResult run_algorithm2(const SystemConfig& config, const DesignVariables& initial,
                           const SolveOptions& opts = {});

/// Convenience entry: default initialization plus the protocol's loop.
SolveResult solve(Protocol protocol, const SystemConfig& config);

/// Coefficients of the scalar quadratic in the forward time share.
struct MuQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

MuQuadratic assemble_mu_quadratic(const ChannelSet& channels, const wmmse::VectorAux& aux,
                                  double transmit_power_mw, double noise_mw);

/// Closed-form optimal time allocation: the clamped vertex of the
/// quadratic surrogate.
TimeAllocation update_mu(const ChannelSet& channels, const wmmse::VectorAux& aux,
                         double transmit_power_mw, double noise_mw);

struct FinalReport {
  RatePair rates;
  double power_excess_mw = 0.0;
  double radiation_norm_error = 0.0;
  double radiation_negativity = 0.0;
  double energy_error = 0.0;
  double displacement_excess_m = 0.0;
  double binary_error = 0.0;  // DS only
  double time_error = 0.0;    // TS only
  double max_residual = 0.0;
  bool feasible = false;
};

/// Recomputes all channels from scratch and reports exact rates plus
/// every constraint residual.
FinalReport evaluate_final(Protocol protocol, const DesignVariables& state,
                           const SystemConfig& config);

}  // namespace cpass::solver
