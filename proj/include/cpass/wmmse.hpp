#pragma once

#include "cpass/types.hpp"

namespace cpass::wmmse {

/// Scalar auxiliary variables of the weighted-error surrogate for the
/// interference-coupled (PS/DS) rate. After an optimal update,
/// kappa * eps == 1 and log2(kappa) equals the user's exact rate.
struct ScalarAux {
  Complex t_fu{}, t_bu{};
  double eps_fu = 1.0, eps_bu = 1.0;
  double kappa_fu = 1.0, kappa_bu = 1.0;
};

/// Vector auxiliary variables for the time-shared rate with MRT
/// precoding. mu_k * log2(kappa_k) equals the user's exact rate after
/// an optimal update.
struct VectorAux {
  CVecX t_fu, t_bu;
  double eps_fu = 1.0, eps_bu = 1.0;
  double kappa_fu = 1.0, kappa_bu = 1.0;
};

ScalarAux update_aux_psds(const ChannelSet& channels, const PrecoderState& precoder,
                          double noise_mw);

/// Full weighted-error objective sum_k (kappa_k eps_k - ln kappa_k)
/// evaluated at the given auxiliaries and current variables.
double surrogate_objective_psds(const ChannelSet& channels, const PrecoderState& precoder,
                                const ScalarAux& aux, double noise_mw);

/// The variable-dependent part of the surrogate (noise and +1 constants
/// and the -ln kappa terms dropped); used by the subproblem assemblies.
double surrogate_core_psds(const ChannelSet& channels, const PrecoderState& precoder,
                           const ScalarAux& aux);

/// Closed-form precoder update. The power multiplier is zero when the
/// unconstrained solution is feasible and otherwise found by bisection
/// so that the total power meets the budget to 1e-8 relative.
PrecoderState update_precoder_psds(const ChannelSet& channels, const ScalarAux& aux,
                                   double transmit_power_mw);

VectorAux update_aux_ts(const ChannelSet& channels, const TimeAllocation& mu,
                        double transmit_power_mw, double noise_mw);

double surrogate_objective_ts(const ChannelSet& channels, const TimeAllocation& mu,
                              const VectorAux& aux, double transmit_power_mw, double noise_mw);

/// Full-power maximum ratio transmission toward each user's one-way
/// effective channel (users are time-orthogonal under TS).
PrecoderState mrt_precoder(const ChannelSet& channels_oneway, double transmit_power_mw);

}  // namespace cpass::wmmse
