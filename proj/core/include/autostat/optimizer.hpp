#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "autostat/gp.hpp"
#include "autostat/joint_model.hpp"
#include "autostat/kernel_expr.hpp"
#include "autostat/rng.hpp"

namespace autostat {

struct OptimizeConfig {
  int max_iterations = 200;
  double grad_tolerance = 1e-5;
  double objective_rel_tolerance = 1e-9;
  int restarts = 3;
  std::uint64_t seed = 0;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  // Verify the Wolfe conditions on every accepted step and throw if violated.
  bool debug_checks = false;
};

struct OptimizeResult {
  Eigen::VectorXd best;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int restart = 0;
  bool converged = false;
  std::vector<double> accepted;  // objective after each accepted step
};

// f(x, grad) fills grad and returns the objective. A non-finite return is
// treated as +inf (the step is rejected); gradients at such points are
// ignored.
using Objective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

// Polak-Ribiere+ nonlinear conjugate gradients with a strong-Wolfe line
// search, restarting to steepest descent whenever the PR coefficient drops
// below zero. Returns the best point seen. If the objective is non-finite at
// `init`, up to 10 perturbed starts are tried before giving up.
OptimizeResult minimize_cg(const Objective& f, const Eigen::VectorXd& init,
                           const OptimizeConfig& config);

// Data-informed starting values: variances from var(y), lengthscales from a
// quarter of the input range, periods from an eighth, locations and offsets
// uniform over the range, SM frequencies uniform below Nyquist. When `noisy`,
// positive slots are jittered by lognormal(sigma = 0.3) noise from `rng` so
// restarts differ.
ParamVector init_params(const KernelExpr& expr,
                        const std::vector<Dataset>& datasets, SeededRng& rng,
                        bool noisy = true);

struct FittedModel {
  OptimizeResult result;
  Eigen::VectorXd shared_params;  // unconstrained, for the shared expression
  JointExtras extras;
  JointNll nll;  // evaluated at the optimum
};

// Fits `expr` (plus per-dataset extras demanded by `mode`) to all datasets
// jointly, taking the best of config.restarts random starts.
FittedModel optimize_model(const KernelExpr& expr,
                           const std::vector<Dataset>& datasets,
                           ScaleMode mode, int sm_components,
                           const OptimizeConfig& config,
                           const JitterPolicy& policy = {});

}  // namespace autostat
