#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "cpass/manifold.hpp"
#include "cpass/model.hpp"
#include "cpass/oracle.hpp"
#include "support/test_support.hpp"

using namespace cpass;
using namespace cpass::manifold;
using doctest::Approx;

TEST_CASE("sphere projection removes the radial component") {
  VecX x(3);
  x << 1.0, 0.0, 0.0;
  SUBCASE("radial gradient projects to zero") {
    CHECK(sphere_riemannian_grad(2.5 * x, x).norm() == Approx(0.0));
  }
  SUBCASE("tangent gradient is unchanged") {
    VecX g(3);
    g << 0.0, 1.0, -2.0;
    CHECK((sphere_riemannian_grad(g, x) - g).norm() == Approx(0.0));
  }
  SUBCASE("random projections are tangent") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 10; ++trial) {
      VecX p = VecX::NullaryExpr(6, [&](Eigen::Index) { return gauss(rng); });
      p /= p.norm();
      VecX g = VecX::NullaryExpr(6, [&](Eigen::Index) { return gauss(rng); });
      CHECK(std::abs(p.dot(sphere_riemannian_grad(g, p))) < 1e-12);
    }
  }
}

TEST_CASE("positive sphere retraction") {
  VecX e1(2);
  e1 << 1.0, 0.0;
  SUBCASE("zero step is the identity") {
    const auto r = sphere_retract_positive(e1, 0.0, VecX::Ones(2));
    REQUIRE(r.has_value());
    CHECK((*r - e1).norm() == Approx(0.0));
  }
  SUBCASE("clamp then renormalize") {
    VecX dir(2);
    dir << 0.0, -1.0;
    const auto r = sphere_retract_positive(e1, 1.0, dir);
    REQUIRE(r.has_value());
    CHECK((*r)[0] == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK((*r)[1] == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("outputs stay feasible") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
      VecX p = VecX::NullaryExpr(5, [&](Eigen::Index) { return std::abs(gauss(rng)); });
      p /= p.norm();
      VecX dir = VecX::NullaryExpr(5, [&](Eigen::Index) { return gauss(rng); });
      const auto r = sphere_retract_positive(p, 0.7, dir);
      if (!r) continue;
      CHECK(r->norm() == Approx(1.0).epsilon(1e-12));
      CHECK(r->minCoeff() >= 0.0);
    }
  }
  SUBCASE("annihilating step reports failure") {
    const auto r = sphere_retract_positive(e1, 1.0, e1);  // lands on the origin
    CHECK(!r.has_value());
  }
}

TEST_CASE("torus retraction") {
  SUBCASE("zero step is the identity") {
    CVecX p(2);
    p << Complex(1, 0), Complex(0, 1);
    const auto r = torus_retract(p, 0.0, CVecX::Ones(2));
    REQUIRE(r.has_value());
    CHECK((*r - p).norm() == Approx(0.0));
  }
  SUBCASE("single-entry example") {
    CVecX p(1), g(1);
    p << Complex(1, 0);
    g << Complex(0, 1);
    const auto r = torus_retract(p, 1.0, g);
    REQUIRE(r.has_value());
    CHECK(std::abs((*r)[0] - Complex(1, -1) / std::sqrt(2.0)) < 1e-12);
  }
  SUBCASE("outputs are unit modulus") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
      CVecX p(4), g(4);
      for (int i = 0; i < 4; ++i) {
        p[i] = std::polar(1.0, gauss(rng));
        g[i] = Complex(gauss(rng), gauss(rng));
      }
      const auto r = torus_retract(p, 0.3, g);
      REQUIRE(r.has_value());
      for (int i = 0; i < 4; ++i) CHECK(std::abs(std::abs((*r)[i]) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("sphere descent solves a constrained quadratic bowl") {
  // c*I - B with B entrywise positive has a non-negative least
  // eigenvector, so the positive-orthant constraint is inactive and the
  // dense eigensolution is the oracle.
  Eigen::Matrix3d b;
  b << 1.0, 0.4, 0.2, 0.4, 1.3, 0.5, 0.2, 0.5, 0.8;
  const Eigen::Matrix3d q = 3.0 * Eigen::Matrix3d::Identity() - b;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(q);
  const double expected = eig.eigenvalues().minCoeff();

  VecX x = VecX::Ones(3) / std::sqrt(3.0);
  DescentOptions opts;
  opts.max_iters = 200;
  const auto res = armijo_descend_sphere(
      [&](const VecX& v) { return v.dot(q * v); },
      [&](const VecX& v) { return VecX(2.0 * q * v); }, x, opts);
  CHECK(res.objective == Approx(expected).epsilon(1e-6));
}

TEST_CASE("zero gradient returns the start immediately") {
  VecX x(3);
  x << 1.0, 0.0, 0.0;
  const VecX before = x;
  const auto res = armijo_descend_sphere([](const VecX&) { return 4.2; },
                                         [](const VecX& v) { return VecX::Zero(v.size()); },
                                         x, DescentOptions{});
  CHECK(res.converged);
  CHECK((x - before).norm() == Approx(0.0));
}

TEST_CASE("torus descent aligns phases to a rank-one linear term") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> gauss;
  PhaseQuadratic q;
  const int n = 6;
  q.r = CMatX::Identity(n, n) * 1e-9;  // essentially linear objective
  q.k.resize(n);
  for (int i = 0; i < n; ++i) q.k[i] = std::polar(1.0 + std::abs(gauss(rng)), gauss(rng));
  q.block_size = n;
  CVecX phi = CVecX::Ones(n);
  DescentOptions opts;
  opts.max_iters = 500;
  armijo_descend_torus([&](const CVecX& p) { return q.objective(p); },
                       [&](const CVecX& p) { return q.egrad(p); }, phi, opts);
  for (int i = 0; i < n; ++i) {
    CHECK(std::abs(phi[i] - q.k[i] / std::abs(q.k[i])) < 1e-3);
  }
}

namespace {

VecX flatten(const CVecX& v) {
  VecX out(2 * v.size());
  for (int i = 0; i < v.size(); ++i) {
    out[2 * i] = v[i].real();
    out[2 * i + 1] = v[i].imag();
  }
  return out;
}

CVecX unflatten(const VecX& v) {
  CVecX out(v.size() / 2);
  for (int i = 0; i < out.size(); ++i) out[i] = Complex(v[2 * i], v[2 * i + 1]);
  return out;
}

}  // namespace

TEST_CASE("analytical gradients match central finite differences") {
  SystemConfig cfg = testing::small_config(2, 4);
  const auto dc = model::derive_constants(cfg);
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = testing::random_state(cfg, seed);
    const auto ch = testing::channels_for(Protocol::PS, s, cfg);
    const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);

    {
      const auto quad = assemble_radiation_psds(ch, s.precoder, aux);
      const VecX g = quad.grad_f(s.radiation.xi_f, s.radiation.xi_b);
      const VecX g_fd = oracle::finite_diff_gradient(
          [&](const VecX& x) { return quad.objective(x, s.radiation.xi_b); },
          s.radiation.xi_f);
      CHECK(oracle::gradient_relative_error(g, g_fd) < 1e-5);
      const VecX gb = quad.grad_b(s.radiation.xi_f, s.radiation.xi_b);
      const VecX gb_fd = oracle::finite_diff_gradient(
          [&](const VecX& x) { return quad.objective(s.radiation.xi_f, x); },
          s.radiation.xi_b);
      CHECK(oracle::gradient_relative_error(gb, gb_fd) < 1e-5);
    }
    {
      const auto ctx = assemble_phase_psds(ch, s.geometry, s.splitting, s.radiation,
                                           s.precoder, aux, dc, cfg);
      const CVecX g = torus_riemannian_grad(ctx.fu.egrad(ctx.start_fu), ctx.start_fu);
      (void)g;
      const VecX ge = flatten(ctx.fu.egrad(ctx.start_fu));
      const VecX ge_fd = oracle::finite_diff_gradient(
          [&](const VecX& x) { return ctx.fu.objective(unflatten(x)); },
          flatten(ctx.start_fu));
      CHECK(oracle::gradient_relative_error(ge, ge_fd) < 1e-5);
    }
    {
      const auto chts = testing::channels_for(Protocol::TS, s, cfg);
      const auto aux_ts =
          wmmse::update_aux_ts(chts, s.time, dc.transmit_power_mw, dc.noise_power_mw);
      const auto [qf, qb] = assemble_radiation_ts(chts, aux_ts, s.time);
      const VecX g = qf.grad(s.radiation.xi_f);
      const VecX g_fd = oracle::finite_diff_gradient(
          [&](const VecX& x) { return qf.objective(x); }, s.radiation.xi_f);
      CHECK(oracle::gradient_relative_error(g, g_fd) < 1e-5);
      const auto ctx = assemble_phase_ts(chts, s.geometry, s.radiation, aux_ts, s.time, dc,
                                         cfg);
      const VecX ge = flatten(ctx.bu.egrad(ctx.start_bu));
      const VecX ge_fd = oracle::finite_diff_gradient(
          [&](const VecX& x) { return ctx.bu.objective(unflatten(x)); },
          flatten(ctx.start_bu));
      CHECK(oracle::gradient_relative_error(ge, ge_fd) < 1e-5);
    }
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("radiation quadratic equals the direct weighted error for any point") {
  SystemConfig cfg = testing::small_config(2, 5);
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, 33);
  const auto ch = testing::channels_for(Protocol::PS, s, cfg);
  const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);
  const auto quad = assemble_radiation_psds(ch, s.precoder, aux);

  for (std::uint64_t seed : {41, 42, 43}) {
    auto probe = testing::random_state(cfg, seed);
    probe.geometry = s.geometry;
    probe.splitting = s.splitting;
    probe.precoder = s.precoder;
    const auto ch2 = testing::channels_for(Protocol::PS, probe, cfg);
    const double direct = wmmse::surrogate_core_psds(ch2, s.precoder, aux);
    const double via_quad = quad.objective(probe.radiation.xi_f, probe.radiation.xi_b);
    CHECK(via_quad == Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("phase map reconstructs the effective channel exactly") {
  SystemConfig cfg;
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, 51);
  const auto ch = testing::channels_for(Protocol::PS, s, cfg);
  const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);
  const auto ctx = assemble_phase_psds(ch, s.geometry, s.splitting, s.radiation, s.precoder,
                                       aux, dc, cfg);
  CHECK((ctx.fu.phi_map * ctx.start_fu - ch.h_eff_fu).norm() <=
        1e-12 * std::max(1.0, ch.h_eff_fu.norm()));
  CHECK((ctx.bu.phi_map * ctx.start_bu - ch.h_eff_bu).norm() <=
        1e-12 * std::max(1.0, ch.h_eff_bu.norm()));

  SUBCASE("phase objective at the achievable point equals the direct core") {
    const double direct = wmmse::surrogate_core_psds(ch, s.precoder, aux);
    const double via_quad = ctx.fu.objective(ctx.start_fu) + ctx.bu.objective(ctx.start_bu);
    CHECK(via_quad == Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("coupled radiation descent never increases the quadratic") {
  SystemConfig cfg;
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, 61);
  const auto ch = testing::channels_for(Protocol::PS, s, cfg);
  const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);
  const auto quad = assemble_radiation_psds(ch, s.precoder, aux);
  const double before = quad.objective(s.radiation.xi_f, s.radiation.xi_b);
  const auto after = minimize_radiation_psds(quad, s.radiation);
  CHECK(quad.objective(after.xi_f, after.xi_b) <= before + 1e-12);
  CHECK(after.xi_f.norm() == Approx(1.0).epsilon(1e-12));
  CHECK(after.xi_b.norm() == Approx(1.0).epsilon(1e-12));
  CHECK(after.xi_f.minCoeff() >= 0.0);
}

TEST_CASE("single-antenna radiation sphere is a fixed point") {
  SystemConfig cfg = testing::small_config(2, 1);
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, 62);
  const auto ch = testing::channels_for(Protocol::PS, s, cfg);
  const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);
  const auto quad = assemble_radiation_psds(ch, s.precoder, aux);
  const auto after = minimize_radiation_psds(quad, s.radiation);
  CHECK(after.xi_f[0] == Approx(1.0).epsilon(1e-12));
  CHECK(after.xi_b[0] == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward time-shared blocks ignore the backward user") {
  SystemConfig cfg = testing::small_config(2, 4);
  SystemConfig moved = cfg;
  moved.user_bu_position = Vec2(-9.0, 14.0);
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, 63);
  const auto ch_a = testing::channels_for(Protocol::TS, s, cfg);
  const auto ch_b = model::build_channels(Protocol::TS, s.geometry, s.splitting, s.radiation,
                                          dc, moved);
  const auto aux_a = wmmse::update_aux_ts(ch_a, s.time, dc.transmit_power_mw,
                                          dc.noise_power_mw);
  const auto aux_b = wmmse::update_aux_ts(ch_b, s.time, dc.transmit_power_mw,
                                          dc.noise_power_mw);
  const auto [qf_a, qb_a] = assemble_radiation_ts(ch_a, aux_a, s.time);
  const auto [qf_b, qb_b] = assemble_radiation_ts(ch_b, aux_b, s.time);
  const auto res_a = minimize_radiation_ts(qf_a, qb_a, s.radiation);
  const auto res_b = minimize_radiation_ts(qf_b, qb_b, s.radiation);
  // Bitwise identical: the forward subproblem reads only forward data.
  CHECK((res_a.xi_f.array() == res_b.xi_f.array()).all());
}
