#include "cpass/splitting.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <vector>

namespace cpass::splitting {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

VecX project_box(const VecX& theta) {
  return theta.cwiseMax(0.0).cwiseMin(kHalfPi);
}

/// Projected-gradient residual used as the stationarity measure.
VecX projected_gradient(const VecX& theta, const VecX& grad) {
  return theta - project_box(theta - grad);
}

struct BoxObjective {
  const manifold::BetaQuadratic& quad;
  double rho;

  double value(const VecX& theta) const {
    double f = quad.objective_theta(theta);
    if (rho > 0.0) f += rho * penalty_value(theta);
    return f;
  }
  VecX grad(const VecX& theta) const {
    VecX g = quad.grad_theta(theta);
    if (rho > 0.0) g += rho * penalty_grad(theta);
    return g;
  }
};

/// Projected limited-memory quasi-Newton descent on the box [0, pi/2]^M.
VecX minimize_box(const VecX& start, const BoxObjective& obj) {
  constexpr int kMaxIters = 100;
  constexpr int kMemory = 5;
  constexpr double kGradTol = 1e-6;
  constexpr double kC1 = 1e-4;

  VecX x = project_box(start);
  double fx = obj.value(x);
  VecX g = obj.grad(x);
  VecX best_x = x;
  double best_f = fx;
  std::deque<std::pair<VecX, VecX>> memory;  // (s, y) pairs

  for (int it = 0; it < kMaxIters; ++it) {
    if (projected_gradient(x, g).norm() < kGradTol) break;

    // Two-loop recursion for the secant direction.
    VecX dir = g;
    std::vector<double> alphas(memory.size());
    for (int i = static_cast<int>(memory.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = memory[i];
      const double rho_i = 1.0 / y.dot(s);
      alphas[i] = rho_i * s.dot(dir);
      dir -= alphas[i] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      dir *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double rho_i = 1.0 / y.dot(s);
      const double beta = rho_i * y.dot(dir);
      dir += (alphas[i] - beta) * s;
    }
    if (dir.dot(g) <= 0.0) dir = g;  // keep a descent direction

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      for (int bt = 0; bt < 40; ++bt) {
        const VecX cand = project_box(x - step * dir);
        const VecX d = cand - x;
        const double slope = g.dot(d);
        if (d.norm() > 0.0 && slope < 0.0) {
          const double fc = obj.value(cand);
          if (std::isfinite(fc) && fc <= fx + kC1 * slope) {
            const VecX g_new = obj.grad(cand);
            const VecX y = g_new - g;
            if (y.dot(d) > 1e-12 * d.squaredNorm()) {
              memory.emplace_back(d, y);
              if (memory.size() > kMemory) memory.pop_front();
            } else {
              memory.clear();
            }
            x = cand;
            fx = fc;
            g = g_new;
            accepted = true;
            break;
          }
        }
        step *= 0.5;
      }
      if (!accepted && attempt == 0) {
        if ((dir - g).norm() == 0.0) break;  // already tried plain gradient
        memory.clear();
        dir = g;
      }
    }
    if (!accepted) break;  // line search exhausted; return best iterate
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  return best_f <= fx ? best_x : x;
}

}  // namespace

double penalty_value(const VecX& theta) {
  return (theta.array().cos() + theta.array().sin() - 1.0).sum();
}

VecX penalty_grad(const VecX& theta) {
  return theta.array().cos() - theta.array().sin();
}

std::pair<double, VecX> splitting_objective_and_grad(const VecX& theta,
                                                     const manifold::BetaQuadratic& quad,
                                                     double rho) {
  const BoxObjective obj{quad, rho};
  return {obj.value(theta), obj.grad(theta)};
}

VecX minimize_theta_ps(const VecX& start, const manifold::BetaQuadratic& quad) {
  const BoxObjective obj{quad, 0.0};
  const int m = static_cast<int>(start.size());
  std::vector<VecX> starts{start, VecX::Constant(m, std::numbers::pi / 4.0)};
  if (m <= 10) {
    // Best binary corner as a third start; the box descent then always
    // ends at or below the binary-restricted optimum of this surrogate.
    VecX best_corner;
    double best_val = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << m); ++mask) {
      VecX corner(m);
      for (int i = 0; i < m; ++i) corner[i] = (mask >> i) & 1 ? kHalfPi : 0.0;
      const double val = obj.value(corner);
      if (val < best_val) {
        best_val = val;
        best_corner = std::move(corner);
      }
    }
    starts.push_back(std::move(best_corner));
  }
  VecX best = starts.front();
  double best_val = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    VecX cand = minimize_box(s, obj);
    const double val = obj.value(cand);
    if (val < best_val) {
      best_val = val;
      best = std::move(cand);
    }
  }
  return best;
}

VecX minimize_theta_ds(const VecX& start, const manifold::BetaQuadratic& quad, double rho) {
  return minimize_box(start, BoxObjective{quad, rho});
}

std::optional<VecX> round_binary(const VecX& theta, double tolerance) {
  VecX rounded(theta.size());
  for (int m = 0; m < theta.size(); ++m) {
    if (std::abs(theta[m]) <= tolerance) {
      rounded[m] = 0.0;
    } else if (std::abs(theta[m] - kHalfPi) <= tolerance) {
      rounded[m] = kHalfPi;
    } else {
      return std::nullopt;
    }
  }
  return rounded;
}

}  // namespace cpass::splitting
