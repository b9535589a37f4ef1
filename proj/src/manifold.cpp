#include "cpass/manifold.hpp"

#include <cmath>
#include <stdexcept>

#include "cpass/model.hpp"

namespace cpass::manifold {

namespace {
constexpr double ln2 = 0.6931471805599453;
}

// -------------------------------------------------------------------------
// Manifold primitives
// -------------------------------------------------------------------------

VecX sphere_riemannian_grad(const VecX& euclid_grad, const VecX& point) {
  return euclid_grad - point.dot(euclid_grad) * point;
}

std::optional<VecX> sphere_retract_positive(const VecX& point, double step,
                                            const VecX& direction) {
  VecX cand = (point - step * direction).cwiseMax(0.0);
  const double norm = cand.norm();
  if (norm <= 0.0) return std::nullopt;
  return VecX(cand / norm);
}

CVecX torus_riemannian_grad(const CVecX& euclid_grad, const CVecX& point) {
  CVecX g = euclid_grad;
  for (int n = 0; n < g.size(); ++n) {
    g[n] -= std::real(euclid_grad[n] * std::conj(point[n])) * point[n];
  }
  return g;
}

std::optional<CVecX> torus_retract(const CVecX& point, double step, const CVecX& grad) {
  CVecX out(point.size());
  for (int n = 0; n < point.size(); ++n) {
    const Complex cand = point[n] - step * grad[n];
    const double mag = std::abs(cand);
    if (mag <= 0.0) return std::nullopt;
    out[n] = cand / mag;
  }
  return out;
}

namespace {

template <typename Vec, typename Objective, typename Grad, typename Project, typename Retract>
DescentResult armijo_core(const Objective& objective, const Grad& euclid_grad,
                          const Project& project, const Retract& retract, Vec& point,
                          const DescentOptions& opts) {
  DescentResult res;
  double fx = objective(point);
  if (!std::isfinite(fx)) throw std::runtime_error("descent started at a non-finite objective");
  for (int it = 0; it < opts.max_iters; ++it) {
    const Vec g = project(euclid_grad(point), point);
    const double gn2 = g.squaredNorm();
    const double gn = std::sqrt(gn2);
    if (gn < opts.grad_tol) {
      res.converged = true;
      break;
    }
    // Scale-invariant first trial: surrogate weights grow with SNR and
    // an absolute unit step would exhaust the backtracking budget.
    double step = opts.initial_step / std::max(1.0, gn);
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      auto cand = retract(point, step, g);
      if (cand) {
        const double fc = objective(*cand);
        if (std::isfinite(fc) && fc <= fx - opts.sufficient_decrease * step * gn2) {
          point = std::move(*cand);
          fx = fc;
          accepted = true;
          break;
        }
      }
      step *= opts.shrink;
    }
    res.iterations = it + 1;
    if (!accepted) break;  // no acceptable step left at this scale
  }
  res.objective = fx;
  return res;
}

}  // namespace

DescentResult armijo_descend_sphere(const std::function<double(const VecX&)>& objective,
                                    const std::function<VecX(const VecX&)>& euclid_grad,
                                    VecX& point, const DescentOptions& opts) {
  return armijo_core<VecX>(objective, euclid_grad, sphere_riemannian_grad,
                           sphere_retract_positive, point, opts);
}

DescentResult armijo_descend_torus(const std::function<double(const CVecX&)>& objective,
                                   const std::function<CVecX(const CVecX&)>& euclid_grad,
                                   CVecX& point, const DescentOptions& opts) {
  return armijo_core<CVecX>(objective, euclid_grad, torus_riemannian_grad, torus_retract,
                            point, opts);
}

// -------------------------------------------------------------------------
// Quadratic evaluations
// -------------------------------------------------------------------------

double RadiationQuadratic::objective(const VecX& xi_f, const VecX& xi_b) const {
  const CVecX f = xi_f.cast<Complex>();
  const CVecX b = xi_b.cast<Complex>();
  const Complex quad = f.dot(a_ff * f) + b.dot(a_bb * b) + 2.0 * f.dot(a_fb * b);
  const Complex lin = f.dot(c_f) + b.dot(c_b);
  return std::real(quad) - 2.0 * std::real(lin);
}

VecX RadiationQuadratic::grad_f(const VecX& xi_f, const VecX& xi_b) const {
  const CVecX f = xi_f.cast<Complex>();
  const CVecX b = xi_b.cast<Complex>();
  return 2.0 * (a_ff * f + a_fb * b - c_f).real();
}

VecX RadiationQuadratic::grad_b(const VecX& xi_f, const VecX& xi_b) const {
  const CVecX f = xi_f.cast<Complex>();
  const CVecX b = xi_b.cast<Complex>();
  return 2.0 * (a_bb * b + a_fb.transpose() * f - c_b).real();
}

double SphereQuadratic::objective(const VecX& xi) const {
  const CVecX x = xi.cast<Complex>();
  return std::real(x.dot(a * x)) - 2.0 * std::real(x.dot(c));
}

VecX SphereQuadratic::grad(const VecX& xi) const {
  const CVecX x = xi.cast<Complex>();
  return 2.0 * (a * x - c).real();
}

double PhaseQuadratic::objective(const CVecX& phi) const {
  return std::real(phi.dot(r * phi)) - 2.0 * std::real(k.dot(phi));
}

CVecX PhaseQuadratic::egrad(const CVecX& phi) const { return 2.0 * (r * phi - k); }

void PhaseQuadratic::rephase_free_entries(CVecX& phi) const {
  const int bs = block_size > 0 ? block_size : static_cast<int>(phi.size());
  for (int start = 0; start < phi.size(); start += bs) {
    double top = 0.0;
    int top_idx = -1;
    for (int n = start; n < start + bs; ++n) {
      if (std::abs(k[n]) > top) {
        top = std::abs(k[n]);
        top_idx = n;
      }
    }
    if (top_idx < 0 || top <= 0.0) continue;
    const Complex aligned = k[top_idx] / top;
    for (int n = start; n < start + bs; ++n) {
      if (std::abs(k[n]) <= 1e-12 * top) phi[n] = aligned;
    }
  }
}

CVecX BetaQuadratic::h_eff_fu(const VecX& beta_f, const VecX& beta_b) const {
  return alpha_fu_f * ramp_f.cwiseProduct(beta_f.cast<Complex>()) +
         alpha_fu_b * ramp_b.cwiseProduct(beta_b.cast<Complex>());
}

CVecX BetaQuadratic::h_eff_bu(const VecX& beta_f, const VecX& beta_b) const {
  return alpha_bu_f * ramp_f.cwiseProduct(beta_f.cast<Complex>()) +
         alpha_bu_b * ramp_b.cwiseProduct(beta_b.cast<Complex>());
}

double BetaQuadratic::objective_beta(const VecX& beta_f, const VecX& beta_b) const {
  auto user_term = [&](const CVecX& h_eff, double kt2, Complex kt, const CVecX& w_self) {
    const Complex z_fu = h_eff.transpose() * w_fu;
    const Complex z_bu = h_eff.transpose() * w_bu;
    const Complex z_self = h_eff.transpose() * w_self;
    return kt2 * (std::norm(z_fu) + std::norm(z_bu)) - 2.0 * std::real(kt * z_self);
  };
  return user_term(h_eff_fu(beta_f, beta_b), kt2_fu, kt_fu, w_fu) +
         user_term(h_eff_bu(beta_f, beta_b), kt2_bu, kt_bu, w_bu);
}

double BetaQuadratic::objective_theta(const VecX& theta) const {
  return objective_beta(theta.array().cos(), theta.array().sin());
}

VecX BetaQuadratic::grad_theta(const VecX& theta) const {
  const VecX beta_f = theta.array().cos();
  const VecX beta_b = theta.array().sin();
  const int m = static_cast<int>(theta.size());
  VecX g_f = VecX::Zero(m), g_b = VecX::Zero(m);
  auto accumulate = [&](const CVecX& h_eff, Complex alpha_f, Complex alpha_b, double kt2,
                        Complex kt, const CVecX& w_self) {
    const CVecX core = kt2 * (w_sum * h_eff.conjugate()) - kt * w_self;
    g_f += 2.0 * (alpha_f * ramp_f.cwiseProduct(core)).real();
    g_b += 2.0 * (alpha_b * ramp_b.cwiseProduct(core)).real();
  };
  accumulate(h_eff_fu(beta_f, beta_b), alpha_fu_f, alpha_fu_b, kt2_fu, kt_fu, w_fu);
  accumulate(h_eff_bu(beta_f, beta_b), alpha_bu_f, alpha_bu_b, kt2_bu, kt_bu, w_bu);
  return g_b.cwiseProduct(beta_f) - g_f.cwiseProduct(beta_b);
}

// -------------------------------------------------------------------------
// Assemblies
// -------------------------------------------------------------------------

RadiationQuadratic assemble_radiation_psds(const ChannelSet& channels,
                                           const PrecoderState& precoder,
                                           const wmmse::ScalarAux& aux) {
  const CMatX r_fu_f = channels.h_fu_f.asDiagonal() * channels.g_f.transpose();
  const CMatX r_fu_b = channels.h_fu_b.asDiagonal() * channels.g_b.transpose();
  const CMatX r_bu_f = channels.h_bu_f.asDiagonal() * channels.g_f.transpose();
  const CMatX r_bu_b = channels.h_bu_b.asDiagonal() * channels.g_b.transpose();
  const CMatX w_sum = precoder.w_sum();
  const double kt2_fu = aux.kappa_fu * std::norm(aux.t_fu);
  const double kt2_bu = aux.kappa_bu * std::norm(aux.t_bu);

  RadiationQuadratic q;
  q.a_ff = kt2_fu * r_fu_f * w_sum * r_fu_f.adjoint() +
           kt2_bu * r_bu_f * w_sum * r_bu_f.adjoint();
  q.a_bb = kt2_fu * r_fu_b * w_sum * r_fu_b.adjoint() +
           kt2_bu * r_bu_b * w_sum * r_bu_b.adjoint();
  q.a_fb = kt2_fu * r_fu_f * w_sum * r_fu_b.adjoint() +
           kt2_bu * r_bu_f * w_sum * r_bu_b.adjoint();
  q.c_f = aux.kappa_fu * std::conj(aux.t_fu) * (r_fu_f * precoder.w_fu) +
          aux.kappa_bu * std::conj(aux.t_bu) * (r_bu_f * precoder.w_bu);
  q.c_b = aux.kappa_fu * std::conj(aux.t_fu) * (r_fu_b * precoder.w_fu) +
          aux.kappa_bu * std::conj(aux.t_bu) * (r_bu_b * precoder.w_bu);
  return q;
}

std::pair<SphereQuadratic, SphereQuadratic> assemble_radiation_ts(
    const ChannelSet& channels, const wmmse::VectorAux& aux, const TimeAllocation& mu) {
  auto one = [](const CVecX& h, const CMatX& g, const CVecX& t, double kappa,
                double mu_k) {
    SphereQuadratic q;
    const CVecX a = h.asDiagonal() * (g.transpose() * t.conjugate());
    const double scale = mu_k * kappa / ln2;
    q.a = scale * (a * a.adjoint());
    q.c = scale * a;
    return q;
  };
  return {one(channels.h_fu_f, channels.g_f, aux.t_fu, aux.kappa_fu, mu.mu_fu),
          one(channels.h_bu_b, channels.g_b, aux.t_bu, aux.kappa_bu, mu.mu_bu)};
}

namespace {

// Effective-channel map h_eff = phi_map * phi for one user at frozen
// amplitudes: columns scale the per-antenna phase entries by the port
// ramp, the radiation amplitude, and the path amplitude eta / r.
CMatX phase_map_block(const CVecX& b_port, const VecX& xi, const VecX& r, double eta) {
  const CVecX row = (xi.array() / r.array()).matrix().cast<Complex>();
  return eta * (b_port * row.transpose());
}

}  // namespace

PhaseContext assemble_phase_psds(const ChannelSet& channels, const Geometry& geometry,
                                 const SplittingState& splitting,
                                 const RadiationState& radiation, const PrecoderState& precoder,
                                 const wmmse::ScalarAux& aux, const DerivedConstants& dc,
                                 const SystemConfig& config) {
  const int m = config.num_ports;
  auto [ramp_f, ramp_b] = model::port_phase_ramps(m, dc.k_g, config.port_spacing_m);
  const CVecX b_f = ramp_f.cwiseProduct(splitting.amp_forward().cast<Complex>());
  const CVecX b_b = ramp_b.cwiseProduct(splitting.amp_backward().cast<Complex>());
  const VecX x_f = model::relative_wg_coordinates(config, geometry.fpa_displacements, true);
  const VecX x_b = model::relative_wg_coordinates(config, geometry.bpa_displacements, false);
  const CMatX w_sum_conj = precoder.w_sum().conjugate();

  auto one_user = [&](const VecX& r_f, const VecX& r_b, double kappa, Complex t,
                      const CVecX& w_self) {
    PhaseQuadratic q;
    const int n = static_cast<int>(r_f.size());
    q.phi_map.resize(m, 2 * n);
    q.phi_map.leftCols(n) = phase_map_block(b_f, radiation.xi_f, r_f, dc.eta);
    q.phi_map.rightCols(n) = phase_map_block(b_b, radiation.xi_b, r_b, dc.eta);
    q.block_size = n;
    const double kt2 = kappa * std::norm(t);
    q.r = kt2 * q.phi_map.adjoint() * w_sum_conj * q.phi_map;
    q.k = kappa * t * (q.phi_map.adjoint() * w_self.conjugate());
    return q;
  };

  PhaseContext ctx;
  ctx.fu = one_user(channels.r_fu_f, channels.r_fu_b, aux.kappa_fu, aux.t_fu, precoder.w_fu);
  ctx.bu = one_user(channels.r_bu_f, channels.r_bu_b, aux.kappa_bu, aux.t_bu, precoder.w_bu);
  const int n = config.num_pas_per_direction;
  ctx.start_fu.resize(2 * n);
  ctx.start_fu << model::achievable_phases(channels.r_fu_f, x_f, dc.k0, dc.k_g),
      model::achievable_phases(channels.r_fu_b, x_b, dc.k0, dc.k_g);
  ctx.start_bu.resize(2 * n);
  ctx.start_bu << model::achievable_phases(channels.r_bu_f, x_f, dc.k0, dc.k_g),
      model::achievable_phases(channels.r_bu_b, x_b, dc.k0, dc.k_g);
  return ctx;
}

PhaseContext assemble_phase_ts(const ChannelSet& channels, const Geometry& geometry,
                               const RadiationState& radiation, const wmmse::VectorAux& aux,
                               const TimeAllocation& mu, const DerivedConstants& dc,
                               const SystemConfig& config) {
  auto [ramp_f, ramp_b] = model::port_phase_ramps(config.num_ports, dc.k_g,
                                                  config.port_spacing_m);
  const VecX x_f = model::relative_wg_coordinates(config, geometry.fpa_displacements, true);
  const VecX x_b = model::relative_wg_coordinates(config, geometry.bpa_displacements, false);

  auto one_user = [&](const CVecX& ramp, const VecX& xi, const VecX& r, const CVecX& t,
                      double kappa, double mu_k) {
    PhaseQuadratic q;
    q.phi_map = phase_map_block(ramp, xi, r, dc.eta);
    q.block_size = static_cast<int>(r.size());
    const CVecX kt = q.phi_map.adjoint() * t;
    const double scale = mu_k * kappa / ln2;
    q.r = scale * (kt * kt.adjoint());
    q.k = scale * kt;
    return q;
  };

  PhaseContext ctx;
  ctx.fu = one_user(ramp_f, radiation.xi_f, channels.r_fu_f, aux.t_fu, aux.kappa_fu, mu.mu_fu);
  ctx.bu = one_user(ramp_b, radiation.xi_b, channels.r_bu_b, aux.t_bu, aux.kappa_bu, mu.mu_bu);
  ctx.start_fu = model::achievable_phases(channels.r_fu_f, x_f, dc.k0, dc.k_g);
  ctx.start_bu = model::achievable_phases(channels.r_bu_b, x_b, dc.k0, dc.k_g);
  return ctx;
}

BetaQuadratic assemble_beta_psds(const ChannelSet& channels, const Geometry& geometry,
                                 const RadiationState& radiation, const PrecoderState& precoder,
                                 const wmmse::ScalarAux& aux, const DerivedConstants& dc,
                                 const SystemConfig& config) {
  BetaQuadratic q;
  auto [ramp_f, ramp_b] = model::port_phase_ramps(config.num_ports, dc.k_g,
                                                  config.port_spacing_m);
  q.ramp_f = std::move(ramp_f);
  q.ramp_b = std::move(ramp_b);
  const VecX x_f = model::relative_wg_coordinates(config, geometry.fpa_displacements, true);
  const VecX x_b = model::relative_wg_coordinates(config, geometry.bpa_displacements, false);
  const CVecX wg_f = model::achievable_phases(VecX::Zero(x_f.size()), x_f, dc.k0, dc.k_g);
  const CVecX wg_b = model::achievable_phases(VecX::Zero(x_b.size()), x_b, dc.k0, dc.k_g);

  auto alpha = [&](const VecX& xi, const CVecX& h, const CVecX& wg_phase) {
    return xi.cast<Complex>().cwiseProduct(h).cwiseProduct(wg_phase).sum();
  };
  q.alpha_fu_f = alpha(radiation.xi_f, channels.h_fu_f, wg_f);
  q.alpha_fu_b = alpha(radiation.xi_b, channels.h_fu_b, wg_b);
  q.alpha_bu_f = alpha(radiation.xi_f, channels.h_bu_f, wg_f);
  q.alpha_bu_b = alpha(radiation.xi_b, channels.h_bu_b, wg_b);
  q.kt2_fu = aux.kappa_fu * std::norm(aux.t_fu);
  q.kt2_bu = aux.kappa_bu * std::norm(aux.t_bu);
  q.kt_fu = aux.kappa_fu * std::conj(aux.t_fu);
  q.kt_bu = aux.kappa_bu * std::conj(aux.t_bu);
  q.w_sum = precoder.w_sum();
  q.w_fu = precoder.w_fu;
  q.w_bu = precoder.w_bu;
  return q;
}

// -------------------------------------------------------------------------
// Subproblem drivers
// -------------------------------------------------------------------------

RadiationState minimize_radiation_psds(const RadiationQuadratic& quad, RadiationState start) {
  DescentOptions opts;
  opts.max_iters = 25;  // four passes keep the per-call budget at 100
  for (int sweep = 0; sweep < 2; ++sweep) {
    armijo_descend_sphere(
        [&](const VecX& x) { return quad.objective(x, start.xi_b); },
        [&](const VecX& x) { return quad.grad_f(x, start.xi_b); }, start.xi_f, opts);
    armijo_descend_sphere(
        [&](const VecX& x) { return quad.objective(start.xi_f, x); },
        [&](const VecX& x) { return quad.grad_b(start.xi_f, x); }, start.xi_b, opts);
  }
  return start;
}

RadiationState minimize_radiation_ts(const SphereQuadratic& quad_f,
                                     const SphereQuadratic& quad_b, RadiationState start) {
  DescentOptions opts;
  armijo_descend_sphere([&](const VecX& x) { return quad_f.objective(x); },
                        [&](const VecX& x) { return quad_f.grad(x); }, start.xi_f, opts);
  armijo_descend_sphere([&](const VecX& x) { return quad_b.objective(x); },
                        [&](const VecX& x) { return quad_b.grad(x); }, start.xi_b, opts);
  return start;
}

std::pair<CVecX, CVecX> minimize_phases(const PhaseContext& ctx) {
  DescentOptions opts;
  CVecX phi_fu = ctx.start_fu;
  CVecX phi_bu = ctx.start_bu;
  armijo_descend_torus([&](const CVecX& p) { return ctx.fu.objective(p); },
                       [&](const CVecX& p) { return ctx.fu.egrad(p); }, phi_fu, opts);
  armijo_descend_torus([&](const CVecX& p) { return ctx.bu.objective(p); },
                       [&](const CVecX& p) { return ctx.bu.egrad(p); }, phi_bu, opts);
  ctx.fu.rephase_free_entries(phi_fu);
  ctx.bu.rephase_free_entries(phi_bu);
  return {std::move(phi_fu), std::move(phi_bu)};
}

}  // namespace cpass::manifold
