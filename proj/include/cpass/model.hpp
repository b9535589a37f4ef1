#pragma once

#include "cpass/types.hpp"

namespace cpass::model {

/// Validates the physical fields of a config and computes the wavelength,
/// wavenumber, and power constants used everywhere else.
DerivedConstants derive_constants(const SystemConfig& config);

double dbm_to_mw(double dbm);

/// Port and antenna coordinates for the given displacements.
Geometry build_geometry(const SystemConfig& config, const VecX& d_f, const VecX& d_b);

/// In-waveguide channels from each input port to each antenna.
/// PS/DS scale rows by the splitting amplitudes; TS entries are unit
/// modulus in both directions (direction gating happens via the time
/// allocation in the rate, not here).
std::pair<CMatX, CMatX> build_waveguide_channel(Protocol protocol, const Geometry& geometry,
                                                const SplittingState& splitting, double k_g);

struct FreespaceChannel {
  CVecX h_f, h_b;
  VecX r_f, r_b;
};

/// Spherical-wave propagation from every antenna to one user.
FreespaceChannel build_freespace_channel(const Geometry& geometry, const Vec2& user_position,
                                         double k0, double eta);

/// Composes all factors into a ChannelSet, including the effective
/// port-to-user channels. Under TS each user's effective channel uses
/// only its own propagation direction.
ChannelSet build_channels(Protocol protocol, const Geometry& geometry,
                          const SplittingState& splitting, const RadiationState& radiation,
                          const DerivedConstants& dc, const SystemConfig& config);

/// Exact two-user rates with inter-user interference (PS/DS operation).
RatePair sum_rate_psds(const ChannelSet& channels, const PrecoderState& precoder,
                       double noise_mw);

/// Exact time-shared rates; a zero time share contributes zero rate.
RatePair sum_rate_ts(const ChannelSet& channels, const PrecoderState& precoder,
                     const TimeAllocation& mu, double noise_mw);

/// Unit-modulus port phase ramps accumulated over the port spacing.
/// Forward ports closer to the antennas accumulate less phase.
std::pair<CVecX, CVecX> port_phase_ramps(int num_ports, double k_g, double port_spacing);

/// Relative waveguide coordinate of antenna n past its nearest port
/// (n*L_PA plus the displacement measured away from the feed).
VecX relative_wg_coordinates(const SystemConfig& config, const VecX& displacements,
                             bool forward);

/// Achievable phase entries exp(-j(k0 r + k_g x)) for one user and
/// one direction at the current geometry.
CVecX achievable_phases(const VecX& r, const VecX& wg_coords, double k0, double k_g);

}  // namespace cpass::model
