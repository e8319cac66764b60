#pragma once

#include <Eigen/Core>

#include "autostat/kernel_expr.hpp"

namespace autostat {

// k(x, x'). Inputs may have any dimension >= 1; every kernel here acts on
// dimension 0 only.
double eval_kernel(const KernelExpr& expr, const ParamVector& params,
                   const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

// dk/dtheta in the unconstrained coordinates, one entry per slot.
Eigen::VectorXd eval_kernel_grad(const KernelExpr& expr,
                                 const ParamVector& params,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& xp);

namespace detail {

// Scalar entry points used by the Gram-matrix builders: `nat` holds the
// natural-space parameter values in traversal order.
double eval_scalar(const KernelExpr& expr, const double* nat, double x,
                   double xp);

// Adds weight * dk/dtheta (unconstrained coordinates) into grad[0..P) and
// returns k(x, x').
double eval_scalar_grad(const KernelExpr& expr, const double* nat, double x,
                        double xp, double weight, double* grad);

}  // namespace detail

}  // namespace autostat
