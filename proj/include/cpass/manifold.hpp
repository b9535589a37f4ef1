#pragma once

#include <functional>
#include <optional>

#include "cpass/types.hpp"
#include "cpass/wmmse.hpp"

namespace cpass::manifold {

// -------------------------------------------------------------------------
// Manifold primitives
// -------------------------------------------------------------------------

/// Tangent projection on the unit sphere: g - (x.g) x.
VecX sphere_riemannian_grad(const VecX& euclid_grad, const VecX& point);

/// Step along -direction, clamp negatives to zero, renormalize. Returns
/// nullopt when clamping annihilates the vector (caller shrinks the step).
std::optional<VecX> sphere_retract_positive(const VecX& point, double step,
                                            const VecX& direction);

/// Per-entry tangent projection on the unit-modulus torus.
CVecX torus_riemannian_grad(const CVecX& euclid_grad, const CVecX& point);

/// Per-entry phase normalization of point - step*grad. An entry that
/// lands on zero keeps its previous value and requests a shrink.
std::optional<CVecX> torus_retract(const CVecX& point, double step, const CVecX& grad);

struct DescentOptions {
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;  // Armijo c_1
  int max_backtracks = 30;
  double grad_tol = 1e-6;
  int max_iters = 100;
};

struct DescentResult {
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient norm fell under grad_tol
};

/// Armijo-backtracked Riemannian descent on the non-negative unit sphere.
/// The accepted objective sequence is non-increasing.
DescentResult armijo_descend_sphere(const std::function<double(const VecX&)>& objective,
                                    const std::function<VecX(const VecX&)>& euclid_grad,
                                    VecX& point, const DescentOptions& opts = {});

/// Armijo-backtracked Riemannian descent on the unit-modulus torus.
DescentResult armijo_descend_torus(const std::function<double(const CVecX&)>& objective,
                                   const std::function<CVecX(const CVecX&)>& euclid_grad,
                                   CVecX& point, const DescentOptions& opts = {});

// -------------------------------------------------------------------------
// Surrogate quadratics
// -------------------------------------------------------------------------

/// Coupled radiation-amplitude quadratic for simultaneous bidirectional
/// operation: f = xiF'A_ff xiF + xiB'A_bb xiB + 2Re{xiF'A_fb xiB}
///              - 2Re{xiF'c_f + xiB'c_b}.
struct RadiationQuadratic {
  CMatX a_ff, a_bb, a_fb;
  CVecX c_f, c_b;

  double objective(const VecX& xi_f, const VecX& xi_b) const;
  VecX grad_f(const VecX& xi_f, const VecX& xi_b) const;
  VecX grad_b(const VecX& xi_f, const VecX& xi_b) const;
};

/// One-direction radiation quadratic (time-shared operation, or any
/// single-user restriction): f = xi'A xi - 2Re{xi'c}.
struct SphereQuadratic {
  CMatX a;
  CVecX c;

  double objective(const VecX& xi) const;
  VecX grad(const VecX& xi) const;
};

/// Unit-modulus phase quadratic for one user:
/// f = Re{phi^H r phi} - 2Re{k^H phi}. phi_map reconstructs the user's
/// effective channel as phi_map * phi. block_size splits the variable
/// into per-direction blocks whose linear-term entries share one phase.
struct PhaseQuadratic {
  CMatX r;
  CVecX k;
  CMatX phi_map;
  int block_size = 0;

  double objective(const CVecX& phi) const;
  CVecX egrad(const CVecX& phi) const;

  /// Entries whose radiation weight vanished carry no gradient and are
  /// optimal anywhere on the circle; pick the block's aligned phase so
  /// a later amplitude update can bring the antenna back.
  void rephase_free_entries(CVecX& phi) const;
};

/// Power-splitting quadratic over the per-port amplitude pair
/// (cos theta, sin theta). Holds per-user aggregate path gains and the
/// unit-modulus port ramps.
struct BetaQuadratic {
  CVecX ramp_f, ramp_b;
  Complex alpha_fu_f{}, alpha_fu_b{}, alpha_bu_f{}, alpha_bu_b{};
  double kt2_fu = 0.0, kt2_bu = 0.0;  // kappa |t|^2
  Complex kt_fu{}, kt_bu{};           // kappa conj(t)
  CMatX w_sum;
  CVecX w_fu, w_bu;

  CVecX h_eff_fu(const VecX& beta_f, const VecX& beta_b) const;
  CVecX h_eff_bu(const VecX& beta_f, const VecX& beta_b) const;
  double objective_beta(const VecX& beta_f, const VecX& beta_b) const;
  double objective_theta(const VecX& theta) const;
  VecX grad_theta(const VecX& theta) const;
};

struct PhaseContext {
  PhaseQuadratic fu;
  PhaseQuadratic bu;
  CVecX start_fu;  // achievable phases at the current geometry
  CVecX start_bu;
};

RadiationQuadratic assemble_radiation_psds(const ChannelSet& channels,
                                           const PrecoderState& precoder,
                                           const wmmse::ScalarAux& aux);

/// Independent per-direction quadratics (FU drives the forward one, BU
/// the backward one), scaled by mu kappa / ln2.
std::pair<SphereQuadratic, SphereQuadratic> assemble_radiation_ts(
    const ChannelSet& channels, const wmmse::VectorAux& aux, const TimeAllocation& mu);

PhaseContext assemble_phase_psds(const ChannelSet& channels, const Geometry& geometry,
                                 const SplittingState& splitting,
                                 const RadiationState& radiation, const PrecoderState& precoder,
                                 const wmmse::ScalarAux& aux, const DerivedConstants& dc,
                                 const SystemConfig& config);

PhaseContext assemble_phase_ts(const ChannelSet& channels, const Geometry& geometry,
                               const RadiationState& radiation, const wmmse::VectorAux& aux,
                               const TimeAllocation& mu, const DerivedConstants& dc,
                               const SystemConfig& config);

BetaQuadratic assemble_beta_psds(const ChannelSet& channels, const Geometry& geometry,
                                 const RadiationState& radiation, const PrecoderState& precoder,
                                 const wmmse::ScalarAux& aux, const DerivedConstants& dc,
                                 const SystemConfig& config);

// -------------------------------------------------------------------------
// Subproblem drivers
// -------------------------------------------------------------------------

/// Alternating per-direction sphere descent (two sweeps). Objective is
/// non-increasing; the result satisfies the manifold constraints.
RadiationState minimize_radiation_psds(const RadiationQuadratic& quad, RadiationState start);

/// Independent forward/backward sphere descents.
RadiationState minimize_radiation_ts(const SphereQuadratic& quad_f,
                                     const SphereQuadratic& quad_b, RadiationState start);

/// Per-user torus descent from the achievable phases; returns the
/// relaxed phase targets.
std::pair<CVecX, CVecX> minimize_phases(const PhaseContext& ctx);

}  // namespace cpass::manifold
