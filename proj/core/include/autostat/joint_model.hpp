#pragma once

#include <Eigen/Core>
#include <vector>

#include "autostat/gp.hpp"
#include "autostat/kernel_expr.hpp"

namespace autostat {

// How one shared kernel is applied across M series.
//   None:          K_j = k(theta)                      (plain shared kernel)
//   ScaleFactors:  K_j = b_j^2 + v_j^2 * k(theta)
//   ScaleFactorsSm:K_j = b_j^2 + v_j^2 * k(theta) + SM_j(theta_j)
enum class ScaleMode { None, ScaleFactors, ScaleFactorsSm };

// Per-series (b_j, v_j), stored unconstrained as (log b_j^2, log v_j^2).
struct ScaleFactors {
  Eigen::VectorXd log_b2;
  Eigen::VectorXd log_v2;

  Eigen::Index size() const { return log_b2.size(); }
};

struct JointExtras {
  ScaleFactors scales;                  // empty when mode == None
  std::vector<Eigen::VectorXd> sm;      // per series, 3Q values; empty unless Sm
};

struct JointNll {
  double total = 0.0;
  Eigen::VectorXd per_dataset;
  double max_jitter = 0.0;
};

// Number of free parameters the joint model optimizes (and that BIC counts).
int joint_param_total(const KernelExpr& shared, ScaleMode mode, int M, int Q);

JointNll joint_nll(const KernelExpr& shared, const Eigen::VectorXd& shared_params,
                   const std::vector<Dataset>& datasets, ScaleMode mode,
                   const JointExtras& extras, const JitterPolicy& policy = {});

struct JointNllGradient {
  JointNll nll;
  Eigen::VectorXd grad;  // layout matches the packed joint vector
};

// Packed joint vector layout: [shared | log b^2, log v^2 per series | SM per
// series]. These helpers move between that vector and (shared, extras).
struct JointLayout {
  int shared = 0;
  int M = 0;
  int Q = 0;
  ScaleMode mode = ScaleMode::None;

  int scale_count() const;
  int sm_count() const;
  int total() const { return shared + scale_count() + sm_count(); }

  Eigen::VectorXd pack(const Eigen::VectorXd& shared_params,
                       const JointExtras& extras) const;
  void unpack(const Eigen::VectorXd& x, Eigen::VectorXd& shared_params,
              JointExtras& extras) const;
};

JointNllGradient joint_nll_grad(const KernelExpr& shared,
                                const JointLayout& layout,
                                const Eigen::VectorXd& packed,
                                const std::vector<Dataset>& datasets,
                                const JitterPolicy& policy = {});

// The kernel a single series sees under `mode`, as a plain expression
// (b^2 and v^2 become CONST nodes), with its parameter vector.
struct EffectiveKernel {
  KernelExpr expr;
  ParamVector params;
};

EffectiveKernel effective_kernel(const KernelExpr& shared,
                                 const Eigen::VectorXd& shared_params,
                                 ScaleMode mode, const JointExtras& extras,
                                 int dataset_index);

// Same series kernel but without the SM part; used to score shared structure
// on its own.
EffectiveKernel effective_kernel_shared_only(const KernelExpr& shared,
                                             const Eigen::VectorXd& shared_params,
                                             ScaleMode mode,
                                             const JointExtras& extras,
                                             int dataset_index);

}  // namespace autostat
