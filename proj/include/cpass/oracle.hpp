#pragma once

#include <functional>
#include <string>

#include "cpass/types.hpp"

// Deliberately simple verification paths, coded separately from the main
// implementations they check. Nothing here may call into the manifold,
// splitting, placement, or wmmse modules.
namespace cpass::oracle {

/// Central finite differences, one coordinate at a time.
VecX finite_diff_gradient(const std::function<double(const VecX&)>& objective,
                          const VecX& point, double h = 1e-6);

/// Relative error metric used for all gradient verification.
double gradient_relative_error(const VecX& analytical, const VecX& numerical);

struct DsSearchResult {
  VecX best_theta;
  double best_rate = 0.0;
  int enumerated = 0;
};

/// Enumerates all 2^M binary split assignments; for each, the remaining
/// beamforming loop runs to convergence with the splits frozen.
DsSearchResult exhaustive_ds_search(const SystemConfig& config,
                                    const DesignVariables& frozen_outer);

struct MuGridResult {
  double mu_fu = 0.0;
  double rate = 0.0;
};

/// Exact time-shared sum rate maximized over a uniform grid on [0, 1].
MuGridResult grid_max_mu(const ChannelSet& channels_oneway, const PrecoderState& precoder,
                         double noise_mw, int grid);

struct RecomputeReport {
  bool pass = false;
  double max_residual = 0.0;
  std::string detail;
};

/// Scalar-loop recomputation of every channel factor and both rates,
/// compared entry by entry against a claimed channel set and rates.
RecomputeReport rate_recompute_check(Protocol protocol, const DesignVariables& state,
                                     const SystemConfig& config, const ChannelSet& claimed,
                                     const RatePair& claimed_rates, double tol = 1e-9);

/// Convenience overload that builds the claimed values through the model
/// module first.
RecomputeReport rate_recompute_check(Protocol protocol, const DesignVariables& state,
                                     const SystemConfig& config, double tol = 1e-9);

}  // namespace cpass::oracle
