#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "cpass/model.hpp"
#include "cpass/oracle.hpp"
#include "cpass/splitting.hpp"
#include "support/test_support.hpp"

using namespace cpass;
using doctest::Approx;

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

manifold::BetaQuadratic quadratic_for(const SystemConfig& cfg, std::uint64_t seed) {
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, seed);
  const auto ch = testing::channels_for(Protocol::PS, s, cfg);
  const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);
  return manifold::assemble_beta_psds(ch, s.geometry, s.radiation, s.precoder, aux, dc, cfg);
}

VecX random_theta(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, kHalfPi);
  return VecX::NullaryExpr(m, [&](Eigen::Index) { return uni(rng); });
}

}  // namespace

TEST_CASE("penalty is zero exactly at binary splits and positive inside") {
  VecX theta(3);
  theta << 0.0, kHalfPi, 0.0;
  CHECK(splitting::penalty_value(theta) == Approx(0.0));
  theta << std::numbers::pi / 4.0, 0.0, kHalfPi;
  CHECK(splitting::penalty_value(theta) == Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const VecX t = random_theta(4, rng);
    CHECK(splitting::penalty_value(t) >= -1e-15);
  }
}

TEST_CASE("splitting gradients match finite differences") {
  SystemConfig cfg = testing::small_config(3, 4);
  std::mt19937_64 rng(4);
  const auto quad = quadratic_for(cfg, 17);
  for (int trial = 0; trial < 20; ++trial) {
    const VecX theta = random_theta(3, rng);
    for (double rho : {0.0, 0.7}) {
      const auto [f, g] = splitting::splitting_objective_and_grad(theta, quad, rho);
      (void)f;
      const VecX g_fd = oracle::finite_diff_gradient(
          [&](const VecX& t) {
            return quad.objective_theta(t) + rho * splitting::penalty_value(t);
          },
          theta);
      CHECK(oracle::gradient_relative_error(g, g_fd) < 1e-5);
    }
  }
}

TEST_CASE("splitting objective equals the direct weighted error") {
  SystemConfig cfg = testing::small_config(2, 4);
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, 18);
  const auto ch = testing::channels_for(Protocol::PS, s, cfg);
  const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);
  const auto quad =
      manifold::assemble_beta_psds(ch, s.geometry, s.radiation, s.precoder, aux, dc, cfg);

  // Exact in the splits: rebuild channels at several other angles and
  // compare against the quadratic evaluation.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    DesignVariables probe = s;
    probe.splitting.theta = random_theta(cfg.num_ports, rng);
    const auto ch2 = testing::channels_for(Protocol::PS, probe, cfg);
    const double direct = wmmse::surrogate_core_psds(ch2, s.precoder, aux);
    CHECK(quad.objective_theta(probe.splitting.theta) == Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("mirror symmetry of the splitting objective") {
  SystemConfig cfg;
  const auto dc = model::derive_constants(cfg);
  const auto s = testing::random_state(cfg, 19);
  const auto ch = testing::channels_for(Protocol::PS, s, cfg);
  const auto aux = wmmse::update_aux_psds(ch, s.precoder, dc.noise_power_mw);
  const auto quad =
      manifold::assemble_beta_psds(ch, s.geometry, s.radiation, s.precoder, aux, dc, cfg);

  // Build the mirrored scene and its quadratic.
  SystemConfig mcfg = cfg;
  mcfg.user_fu_position = Vec2(-cfg.user_bu_position[0], cfg.user_bu_position[1]);
  mcfg.user_bu_position = Vec2(-cfg.user_fu_position[0], cfg.user_fu_position[1]);
  DesignVariables t;
  const int m = cfg.num_ports;
  t.splitting.theta.resize(m);
  for (int i = 0; i < m; ++i)
    t.splitting.theta[i] = kHalfPi - s.splitting.theta[m - 1 - i];
  t.radiation.xi_f = s.radiation.xi_b;
  t.radiation.xi_b = s.radiation.xi_f;
  t.geometry = model::build_geometry(mcfg, -s.geometry.bpa_displacements,
                                     -s.geometry.fpa_displacements);
  t.precoder.w_fu = s.precoder.w_bu.reverse();
  t.precoder.w_bu = s.precoder.w_fu.reverse();
  const auto ch2 =
      model::build_channels(Protocol::PS, t.geometry, t.splitting, t.radiation, dc, mcfg);
  const auto aux2 = wmmse::update_aux_psds(ch2, t.precoder, dc.noise_power_mw);
  const auto quad2 =
      manifold::assemble_beta_psds(ch2, t.geometry, t.radiation, t.precoder, aux2, dc, mcfg);

  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const VecX theta = random_theta(m, rng);
    VecX mirrored(m);
    for (int i = 0; i < m; ++i) mirrored[i] = kHalfPi - theta[m - 1 - i];
    CHECK(quad.objective_theta(theta) ==
          Approx(quad2.objective_theta(mirrored)).epsilon(1e-9));
  }
}

TEST_CASE("continuous split minimization") {
  SystemConfig cfg = testing::small_config(2, 4);
  const auto quad = quadratic_for(cfg, 21);
  const VecX start = VecX::Constant(2, std::numbers::pi / 4.0);
  const VecX theta = splitting::minimize_theta_ps(start, quad);

  SUBCASE("stays in the box and does not increase the objective") {
    CHECK(theta.minCoeff() >= -1e-15);
    CHECK(theta.maxCoeff() <= kHalfPi + 1e-15);
    CHECK(quad.objective_theta(theta) <= quad.objective_theta(start) + 1e-12);
  }
  SUBCASE("beats random feasible restarts") {
    std::mt19937_64 rng(7);
    const double solved = quad.objective_theta(theta);
    for (int trial = 0; trial < 10; ++trial) {
      const VecX restart = splitting::minimize_theta_ps(random_theta(2, rng), quad);
      CHECK(solved <= quad.objective_theta(restart) + 1e-6 * std::abs(solved));
    }
  }
  SUBCASE("continuous optimum is no worse than every binary corner") {
    double best_corner = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 4; ++mask) {
      VecX corner(2);
      corner << (mask & 1 ? kHalfPi : 0.0), (mask & 2 ? kHalfPi : 0.0);
      best_corner = std::min(best_corner, quad.objective_theta(corner));
    }
    CHECK(quad.objective_theta(theta) <= best_corner + 1e-9);
  }
}

TEST_CASE("forced forward optimum when only the forward path serves") {
  // Single port, only the forward-user linear term active: the optimum
  // routes everything forward. Verified against a dense angle grid.
  manifold::BetaQuadratic quad;
  quad.ramp_f = CVecX::Ones(1);
  quad.ramp_b = CVecX::Ones(1);
  quad.alpha_fu_f = Complex(1e-4, 0.0);
  quad.alpha_fu_b = Complex(0.0, 0.0);
  quad.alpha_bu_f = Complex(0.0, 0.0);
  quad.alpha_bu_b = Complex(0.0, 0.0);
  quad.kt2_fu = 1.0;
  quad.kt_fu = Complex(1e3, 0.0);
  quad.kt2_bu = 0.0;
  quad.kt_bu = Complex(0.0, 0.0);
  quad.w_fu = CVecX::Ones(1);
  quad.w_bu = CVecX::Zero(1);
  quad.w_sum = quad.w_fu * quad.w_fu.adjoint();

  double grid_best = std::numeric_limits<double>::infinity();
  double grid_arg = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double th = kHalfPi * i / 1000.0;
    const double val = quad.objective_theta(VecX::Constant(1, th));
    if (val < grid_best) {
      grid_best = val;
      grid_arg = th;
    }
  }
  CHECK(grid_arg == Approx(0.0));
  const VecX theta = splitting::minimize_theta_ps(VecX::Constant(1, 0.8), quad);
  CHECK(theta[0] == Approx(0.0).epsilon(1e-6));
}

TEST_CASE("penalized minimization drives splits toward binary values") {
  SystemConfig cfg = testing::small_config(2, 4);
  const auto quad = quadratic_for(cfg, 22);
  VecX theta = VecX::Constant(2, std::numbers::pi / 4.0);
  for (double rho = 0.1; rho < 2e4; rho *= 1.6) {
    theta = splitting::minimize_theta_ds(theta, quad, rho);
  }
  for (int m = 0; m < theta.size(); ++m) {
    const double dist = std::min(std::abs(theta[m]), std::abs(theta[m] - kHalfPi));
    CHECK(dist <= 1e-3);
  }
}

TEST_CASE("binary rounding snaps or refuses") {
  VecX near(2);
  near << 0.0004, 1.5704;
  const auto snapped = splitting::round_binary(near, 1e-3);
  REQUIRE(snapped.has_value());
  CHECK((*snapped)[0] == 0.0);
  CHECK((*snapped)[1] == kHalfPi);
  CHECK(SplittingState{*snapped}.is_binary(0.0));

  VecX off(2);
  off << 0.3, 1.5704;
  CHECK(!splitting::round_binary(off, 1e-3).has_value());
}
