#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "autostat/kernel_expr.hpp"

namespace autostat {

// One observed series. Inputs are sorted ascending on dimension 0 and all
// values are finite; duplicate inputs are rejected (white noise treats equal
// inputs as the same observation).
struct Dataset {
  std::string id;
  Eigen::MatrixXd X;  // N x D
  Eigen::VectorXd y;  // N

  static Dataset from_columns(std::string id, const Eigen::VectorXd& t,
                              const Eigen::VectorXd& y);

  Eigen::Index size() const { return y.size(); }
  double input_min() const;
  double input_max() const;
};

// Ridge added to Gram diagonals before factorization: base_rel * mean(diag K),
// multiplied by `factor` after each failed attempt, at most `max_escalations`
// times.
struct JitterPolicy {
  double base_rel = 1e-8;
  double factor = 10.0;
  int max_escalations = 6;
};

Eigen::MatrixXd build_covariance(const KernelExpr& expr,
                                 const ParamVector& params,
                                 const Eigen::MatrixXd& Xa,
                                 const Eigen::MatrixXd& Xb);

struct NllValue {
  double value = 0.0;
  double jitter = 0.0;  // absolute ridge that made the factorization succeed
};

struct NllGradient {
  double value = 0.0;
  Eigen::VectorXd grad;
  double jitter = 0.0;
};

// Exact negative log marginal likelihood of a zero-mean GP,
//   1/2 y' K^-1 y + 1/2 log|K| + N/2 log(2 pi),
// with log|K| read off the Cholesky factor.
NllValue nll(const KernelExpr& expr, const ParamVector& params,
             const Dataset& data, const JitterPolicy& policy = {});

NllGradient nll_grad(const KernelExpr& expr, const ParamVector& params,
                     const Dataset& data, const JitterPolicy& policy = {});

struct GpPosterior {
  Eigen::MatrixXd Xstar;
  Eigen::VectorXd mean;
  Eigen::VectorXd var;  // clamped to >= 0
};

GpPosterior predict(const KernelExpr& expr, const ParamVector& params,
                    const Dataset& data, const Eigen::MatrixXd& Xstar,
                    const JitterPolicy& policy = {});

struct PosteriorComponent {
  std::string description;
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

// Per-summand posterior of a canonical kernel: component means sum to the
// full posterior mean.
struct ComponentDecomposition {
  Eigen::MatrixXd Xstar;
  std::vector<PosteriorComponent> components;
};

ComponentDecomposition decompose_posterior(const KernelExpr& canonical_expr,
                                           const ParamVector& params,
                                           const Dataset& data,
                                           const Eigen::MatrixXd& Xstar,
                                           const JitterPolicy& policy = {});

Eigen::VectorXd sample_prior(const KernelExpr& expr, const ParamVector& params,
                             const Eigen::MatrixXd& X, std::uint64_t seed,
                             const JitterPolicy& policy = {});

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual);

namespace detail {

// Natural-space fast paths used by the joint objective (they skip building a
// ParamVector per evaluation).
Eigen::VectorXd natural_of(const std::vector<Transform>& transforms,
                           const Eigen::VectorXd& unconstrained);

NllValue nll_nat(const KernelExpr& expr, const Eigen::VectorXd& natural,
                 const Dataset& data, const JitterPolicy& policy);

NllGradient nll_grad_nat(const KernelExpr& expr, const Eigen::VectorXd& natural,
                         const Dataset& data, const JitterPolicy& policy);

}  // namespace detail

}  // namespace autostat
