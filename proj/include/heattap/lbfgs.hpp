#pragma once

#include <cmath>
#include <deque>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace heattap {

struct LbfgsOptions {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-6;
  int history = 10;
  int max_backtracks = 40;
  double armijo = 1e-4;
  double backtrack = 0.5;
};

struct LbfgsResult {
  int iterations = 0;
  double loss = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  /// Objective value after every accepted step, starting with the initial point.
  std::vector<double> loss_history;
};

/// Limited-memory BFGS with a backtracking Armijo line search. Every accepted
/// step strictly decreases the objective. Stops when the gradient's Euclidean
/// norm drops to the tolerance, at the iteration cap, or when the line search
/// cannot make progress.
///
/// `objective(x, grad)` returns f(x) and writes the gradient into `grad`.
/// `stop_norm(x, grad)` is the quantity compared with the tolerance; it lets a
/// caller optimizing in transformed coordinates stop on the original gradient.
template <typename Scalar, typename Objective, typename StopNorm>
LbfgsResult minimize_lbfgs(Objective&& objective, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                           const LbfgsOptions& opt, StopNorm&& stop_norm) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  LbfgsResult result;
  const Eigen::Index n = x.size();
  Vec grad(n), next_grad(n), direction(n), next_x(n);
  Scalar loss = objective(x, grad);
  result.loss_history.push_back(static_cast<double>(loss));

  std::deque<Vec> s_hist, y_hist;
  std::deque<Scalar> rho_hist;
  std::vector<Scalar> alpha(static_cast<std::size_t>(opt.history));

  for (;;) {
    const Scalar gnorm = grad.norm();
    result.gradient_norm = static_cast<double>(stop_norm(x, grad));
    if (!std::isfinite(static_cast<double>(loss)) || !std::isfinite(result.gradient_norm)) break;
    if (result.gradient_norm <= opt.gradient_tolerance) {
      result.converged = true;
      break;
    }
    if (result.iterations >= opt.max_iterations) break;

    // Two-loop recursion.
    direction = -grad;
    const std::size_t m = s_hist.size();
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(direction);
      direction.noalias() -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      direction /= gnorm;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const Scalar beta = rho_hist[i] * y_hist[i].dot(direction);
      direction.noalias() += (alpha[i] - beta) * s_hist[i];
    }

    Scalar slope = grad.dot(direction);
    if (!(slope < 0)) {
      // Lost descent; restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -grad / gnorm;
      slope = grad.dot(direction);
    }

    Scalar step = 1;
    Scalar next_loss = 0;
    bool accepted = false;
    for (int k = 0; k < opt.max_backtracks; ++k) {
      next_x = x + step * direction;
      next_loss = objective(next_x, next_grad);
      if (std::isfinite(static_cast<double>(next_loss)) &&
          next_loss <= loss + static_cast<Scalar>(opt.armijo) * step * slope &&
          next_loss < loss) {
        accepted = true;
        break;
      }
      step *= static_cast<Scalar>(opt.backtrack);
    }
    if (!accepted) break;

    Vec s = next_x - x;
    Vec y = next_grad - grad;
    const Scalar sy = s.dot(y);
    if (sy > Scalar(1e-10) * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      rho_hist.push_back(Scalar(1) / sy);
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
    }
    x.swap(next_x);
    grad.swap(next_grad);
    loss = next_loss;
    ++result.iterations;
    result.loss_history.push_back(static_cast<double>(loss));
  }
  result.loss = static_cast<double>(loss);
  return result;
}

template <typename Scalar, typename Objective>
LbfgsResult minimize_lbfgs(Objective&& objective, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x,
                           const LbfgsOptions& opt = {}) {
  return minimize_lbfgs<Scalar>(
      std::forward<Objective>(objective), x, opt,
      [](const auto&, const auto& grad) { return grad.norm(); });
}

}  // namespace heattap
