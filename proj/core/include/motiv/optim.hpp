#pragma once

#include "motiv/types.hpp"

#include <functional>

namespace motiv {

/// Convergence knobs for every variance-parameter fit. Tolerances apply in
/// the (log) parameter space the objective is expressed in.
struct OptimizerConfig {
  int max_iters = 500;
  double grad_tol = 1e-6;   // sup-norm of the gradient
  double rel_tol = 1e-9;    // relative objective change
  bool log_parameterization = true;

  void validate() const;
};

struct OptimResult {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Objective callback: fills `grad` and returns the value at `x`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Limited-memory BFGS with Armijo backtracking. Deterministic; accepted
/// steps never increase the objective.
OptimResult minimize_lbfgs(const Objective& f, Vector x0, const OptimizerConfig& cfg);

}  // namespace motiv
