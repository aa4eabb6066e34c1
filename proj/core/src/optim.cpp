#include "motiv/optim.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace motiv {

void OptimizerConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("max_iters must be positive");
  if (grad_tol <= 0.0 || rel_tol <= 0.0) throw std::invalid_argument("tolerances must be positive");
}

namespace {

struct Pair {
  Vector s, y;
  double rho;
};

Vector two_loop(const std::deque<Pair>& history, const Vector& grad) {
  Vector q = grad;
  std::vector<double> a(history.size());
  for (int i = static_cast<int>(history.size()) - 1; i >= 0; --i) {
    const Pair& h = history[static_cast<size_t>(i)];
    a[static_cast<size_t>(i)] = h.rho * h.s.dot(q);
    q -= a[static_cast<size_t>(i)] * h.y;
  }
  if (!history.empty()) {
    const Pair& last = history.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (size_t i = 0; i < history.size(); ++i) {
    const Pair& h = history[i];
    const double b = h.rho * h.y.dot(q);
    q += (a[i] - b) * h.s;
  }
  return q;
}

}  // namespace

OptimResult minimize_lbfgs(const Objective& f, Vector x0, const OptimizerConfig& cfg) {
  cfg.validate();
  constexpr size_t kHistory = 10;
  constexpr double kArmijo = 1e-4;

  OptimResult res;
  Vector x = std::move(x0);
  Vector grad(x.size()), grad_new(x.size());
  double value = f(x, grad);
  if (!std::isfinite(value)) throw std::runtime_error("objective not finite at the start point");

  std::deque<Pair> history;
  int stalled = 0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    res.grad_norm = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    if (res.grad_norm < cfg.grad_tol) {
      res.converged = true;
      break;
    }

    Vector dir = -two_loop(history, grad);
    double slope = dir.dot(grad);
    if (!(slope < 0.0)) {  // fall back to steepest descent on a bad direction
      dir = -grad;
      slope = dir.dot(grad);
      history.clear();
    }

    double step = 1.0;
    double value_new = 0.0;
    bool accepted = false;
    Vector x_new;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      value_new = f(x_new, grad_new);
      if (std::isfinite(value_new) && value_new <= value + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search exhausted; gradient norm reported as-is

    const Vector s = x_new - x;
    const Vector y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      history.push_back({s, y, 1.0 / sy});
      if (history.size() > kHistory) history.pop_front();
    }

    const double change = std::abs(value - value_new);
    x = std::move(x_new);
    grad = grad_new;
    const double prev = value;
    value = value_new;
    res.iterations = iter + 1;
    // A single tiny step can be a line-search artifact; require a
    // persistent stall before accepting the relative-change exit.
    stalled = change <= cfg.rel_tol * std::max(1.0, std::abs(prev)) ? stalled + 1 : 0;
    if (stalled >= 3) {
      res.grad_norm = grad.cwiseAbs().maxCoeff();
      res.converged = true;
      break;
    }
  }

  res.grad_norm = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (res.grad_norm < cfg.grad_tol) res.converged = true;
  res.x = std::move(x);
  res.value = value;
  return res;
}

}  // namespace motiv
