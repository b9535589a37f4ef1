#include "cpass/wmmse.hpp"

#include <cmath>
#include <stdexcept>

namespace cpass::wmmse {

namespace {

struct UserView {
  const CVecX& h_eff;
  const CVecX& w_self;
  const CVecX& w_other;
};

double error_psds(const UserView& u, Complex t, double noise_mw) {
  const Complex z_self = u.h_eff.transpose() * u.w_self;
  const Complex z_other = u.h_eff.transpose() * u.w_other;
  const double denom = std::norm(z_self) + std::norm(z_other) + noise_mw;
  return std::norm(t) * denom - 2.0 * std::real(std::conj(t) * z_self) + 1.0;
}

Complex optimal_t_psds(const UserView& u, double noise_mw) {
  const Complex z_self = u.h_eff.transpose() * u.w_self;
  const Complex z_other = u.h_eff.transpose() * u.w_other;
  return z_self / (std::norm(z_self) + std::norm(z_other) + noise_mw);
}

}  // namespace

ScalarAux update_aux_psds(const ChannelSet& channels, const PrecoderState& precoder,
                          double noise_mw) {
  const UserView fu{channels.h_eff_fu, precoder.w_fu, precoder.w_bu};
  const UserView bu{channels.h_eff_bu, precoder.w_bu, precoder.w_fu};
  ScalarAux aux;
  aux.t_fu = optimal_t_psds(fu, noise_mw);
  aux.t_bu = optimal_t_psds(bu, noise_mw);
  aux.eps_fu = error_psds(fu, aux.t_fu, noise_mw);
  aux.eps_bu = error_psds(bu, aux.t_bu, noise_mw);
  if (aux.eps_fu <= 0.0 || aux.eps_bu <= 0.0)
    throw std::logic_error("non-positive weighted error; noise power must be positive");
  aux.kappa_fu = 1.0 / aux.eps_fu;
  aux.kappa_bu = 1.0 / aux.eps_bu;
  return aux;
}

double surrogate_objective_psds(const ChannelSet& channels, const PrecoderState& precoder,
                                const ScalarAux& aux, double noise_mw) {
  const UserView fu{channels.h_eff_fu, precoder.w_fu, precoder.w_bu};
  const UserView bu{channels.h_eff_bu, precoder.w_bu, precoder.w_fu};
  const double e_fu = error_psds(fu, aux.t_fu, noise_mw);
  const double e_bu = error_psds(bu, aux.t_bu, noise_mw);
  return aux.kappa_fu * e_fu - std::log(aux.kappa_fu) + aux.kappa_bu * e_bu -
         std::log(aux.kappa_bu);
}

double surrogate_core_psds(const ChannelSet& channels, const PrecoderState& precoder,
                           const ScalarAux& aux) {
  auto core_one = [](const UserView& u, Complex t, double kappa) {
    const Complex z_self = u.h_eff.transpose() * u.w_self;
    const Complex z_other = u.h_eff.transpose() * u.w_other;
    return kappa * (std::norm(t) * (std::norm(z_self) + std::norm(z_other)) -
                    2.0 * std::real(std::conj(t) * z_self));
  };
  const UserView fu{channels.h_eff_fu, precoder.w_fu, precoder.w_bu};
  const UserView bu{channels.h_eff_bu, precoder.w_bu, precoder.w_fu};
  return core_one(fu, aux.t_fu, aux.kappa_fu) + core_one(bu, aux.t_bu, aux.kappa_bu);
}

PrecoderState update_precoder_psds(const ChannelSet& channels, const ScalarAux& aux,
                                   double transmit_power_mw) {
  const Eigen::Index m = channels.h_eff_fu.size();
  CMatX a = CMatX::Zero(m, m);
  a += aux.kappa_fu * std::norm(aux.t_fu) *
       (channels.h_eff_fu.conjugate() * channels.h_eff_fu.transpose());
  a += aux.kappa_bu * std::norm(aux.t_bu) *
       (channels.h_eff_bu.conjugate() * channels.h_eff_bu.transpose());
  const CVecX b_fu = aux.kappa_fu * aux.t_fu * channels.h_eff_fu.conjugate();
  const CVecX b_bu = aux.kappa_bu * aux.t_bu * channels.h_eff_bu.conjugate();

  auto solve_at = [&](double lambda) -> std::pair<CVecX, CVecX> {
    CMatX lhs = a;
    lhs.diagonal().array() += lambda;
    Eigen::LDLT<CMatX> ldlt(lhs);
    CVecX w_fu = ldlt.solve(b_fu);
    CVecX w_bu = ldlt.solve(b_bu);
    const double scale = std::max(b_fu.norm() + b_bu.norm(), 1e-300);
    const double resid =
        ((lhs * w_fu - b_fu).norm() + (lhs * w_bu - b_bu).norm()) / scale;
    if (!w_fu.allFinite() || !w_bu.allFinite() || resid > 1e-8) {
      // Rank-deficient normal matrix (degenerate channels): regularize.
      lhs = a;
      lhs.diagonal().array() += lambda + 1e-12 * std::real(a.trace()) / double(m);
      Eigen::LDLT<CMatX> reg(lhs);
      w_fu = reg.solve(b_fu);
      w_bu = reg.solve(b_bu);
    }
    return {std::move(w_fu), std::move(w_bu)};
  };

  PrecoderState out;
  if (b_fu.norm() + b_bu.norm() <= 0.0) {
    out.w_fu = CVecX::Zero(m);
    out.w_bu = CVecX::Zero(m);
    out.lagrange_multiplier = 0.0;
    return out;
  }

  auto [w_fu0, w_bu0] = solve_at(0.0);
  double power0 = w_fu0.squaredNorm() + w_bu0.squaredNorm();
  if (power0 <= transmit_power_mw) {
    out.w_fu = std::move(w_fu0);
    out.w_bu = std::move(w_bu0);
    out.lagrange_multiplier = 0.0;
    return out;
  }

  // ||W(lambda)||^2 is strictly decreasing in lambda; bracket then bisect.
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    auto [wf, wb] = solve_at(hi);
    if (wf.squaredNorm() + wb.squaredNorm() <= transmit_power_mw) break;
    lo = hi;
    hi *= 2.0;
  }
  double lambda = hi;
  CVecX w_fu, w_bu;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    auto [wf, wb] = solve_at(mid);
    const double p = wf.squaredNorm() + wb.squaredNorm();
    if (p > transmit_power_mw) {
      lo = mid;
    } else {
      hi = mid;
      lambda = mid;
      w_fu = std::move(wf);
      w_bu = std::move(wb);
    }
    if (std::abs(p - transmit_power_mw) <= 1e-8 * transmit_power_mw) {
      lambda = mid;
      break;
    }
  }
  if (w_fu.size() == 0) {
    auto [wf, wb] = solve_at(lambda);
    w_fu = std::move(wf);
    w_bu = std::move(wb);
  }
  const double p = w_fu.squaredNorm() + w_bu.squaredNorm();
  if (p > transmit_power_mw) {
    const double s = std::sqrt(transmit_power_mw / p);
    w_fu *= s;
    w_bu *= s;
  }
  out.w_fu = std::move(w_fu);
  out.w_bu = std::move(w_bu);
  out.lagrange_multiplier = lambda;
  return out;
}

namespace {

double error_ts(const CVecX& h_eff, const CVecX& t, double mu_k, double noise_mw,
                double transmit_power_mw) {
  const Complex z = t.adjoint() * h_eff;
  return std::norm(1.0 - z) + mu_k * noise_mw / transmit_power_mw * t.squaredNorm();
}

void update_aux_ts_one(const CVecX& h_eff, double mu_k, double transmit_power_mw,
                       double noise_mw, CVecX& t_out, double& eps_out, double& kappa_out) {
  const Eigen::Index m = h_eff.size();
  if (mu_k <= 0.0 || h_eff.squaredNorm() <= 0.0) {
    // Inactive user: keep a neutral auxiliary so its rate contribution is zero.
    t_out = CVecX::Zero(m);
    eps_out = 1.0;
    kappa_out = 1.0;
    return;
  }
  CMatX lhs = h_eff * h_eff.adjoint();
  lhs.diagonal().array() += mu_k * noise_mw / transmit_power_mw;
  t_out = Eigen::LDLT<CMatX>(lhs).solve(h_eff);
  eps_out = error_ts(h_eff, t_out, mu_k, noise_mw, transmit_power_mw);
  kappa_out = 1.0 / eps_out;
}

}  // namespace

VectorAux update_aux_ts(const ChannelSet& channels, const TimeAllocation& mu,
                        double transmit_power_mw, double noise_mw) {
  VectorAux aux;
  update_aux_ts_one(channels.h_eff_fu, mu.mu_fu, transmit_power_mw, noise_mw, aux.t_fu,
                    aux.eps_fu, aux.kappa_fu);
  update_aux_ts_one(channels.h_eff_bu, mu.mu_bu, transmit_power_mw, noise_mw, aux.t_bu,
                    aux.eps_bu, aux.kappa_bu);
  return aux;
}

double surrogate_objective_ts(const ChannelSet& channels, const TimeAllocation& mu,
                              const VectorAux& aux, double transmit_power_mw,
                              double noise_mw) {
  constexpr double ln2 = 0.6931471805599453;
  auto one = [&](const CVecX& h_eff, const CVecX& t, double kappa, double mu_k) {
    if (mu_k <= 0.0) return 0.0;
    const double eps = error_ts(h_eff, t, mu_k, noise_mw, transmit_power_mw);
    return mu_k * kappa * eps / ln2 - mu_k * std::log2(kappa);
  };
  return one(channels.h_eff_fu, aux.t_fu, aux.kappa_fu, mu.mu_fu) +
         one(channels.h_eff_bu, aux.t_bu, aux.kappa_bu, mu.mu_bu);
}

PrecoderState mrt_precoder(const ChannelSet& channels_oneway, double transmit_power_mw) {
  auto mrt_one = [&](const CVecX& h_eff) -> CVecX {
    const double norm = h_eff.norm();
    if (norm <= 0.0) throw std::domain_error("MRT undefined for a zero effective channel");
    return std::sqrt(transmit_power_mw) / norm * h_eff.conjugate();
  };
  PrecoderState p;
  p.w_fu = mrt_one(channels_oneway.h_eff_fu);
  p.w_bu = mrt_one(channels_oneway.h_eff_bu);
  p.lagrange_multiplier = 0.0;
  return p;
}

}  // namespace cpass::wmmse
