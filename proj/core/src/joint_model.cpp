#include "autostat/joint_model.hpp"

#include <stdexcept>

#include "autostat/kernel_eval.hpp"

namespace autostat {

namespace {

KernelExpr wrap_scaled(const KernelExpr& shared) {
  return KernelExpr::sum(
      {KernelExpr::constant(),
       KernelExpr::product({KernelExpr::constant(), shared})});
}

KernelExpr wrap_scaled_sm(const KernelExpr& shared, int q) {
  return KernelExpr::sum(
      {KernelExpr::constant(),
       KernelExpr::product({KernelExpr::constant(), shared}),
       KernelExpr::spectral_mixture(q)});
}

void check_extras(const std::vector<Dataset>& datasets, ScaleMode mode,
                  const JointExtras& extras) {
  const auto M = static_cast<Eigen::Index>(datasets.size());
  if (M == 0) throw std::invalid_argument("no datasets");
  if (mode == ScaleMode::None) return;
  if (extras.scales.log_b2.size() != M || extras.scales.log_v2.size() != M)
    throw std::invalid_argument("scale factor count does not match datasets");
  if (mode == ScaleMode::ScaleFactorsSm) {
    if (extras.sm.size() != datasets.size())
      throw std::invalid_argument("sm block count does not match datasets");
    for (const auto& block : extras.sm)
      if (block.size() == 0 || block.size() % 3 != 0 ||
          block.size() != extras.sm.front().size())
        throw std::invalid_argument("sm blocks must share one positive size");
  }
}

int sm_q(const JointExtras& extras) {
  return static_cast<int>(extras.sm.front().size() / 3);
}

// Unconstrained parameters of the wrapped kernel for one series:
// [log b2_j, log v2_j, shared..., sm_j...].
Eigen::VectorXd series_params(const Eigen::VectorXd& shared_params,
                              ScaleMode mode, const JointExtras& extras,
                              int j) {
  if (mode == ScaleMode::None) return shared_params;
  Eigen::Index sm_len =
      mode == ScaleMode::ScaleFactorsSm ? extras.sm[static_cast<size_t>(j)].size()
                                        : 0;
  Eigen::VectorXd u(2 + shared_params.size() + sm_len);
  u[0] = extras.scales.log_b2[j];
  u[1] = extras.scales.log_v2[j];
  u.segment(2, shared_params.size()) = shared_params;
  if (sm_len > 0) u.tail(sm_len) = extras.sm[static_cast<size_t>(j)];
  return u;
}

}  // namespace

int joint_param_total(const KernelExpr& shared, ScaleMode mode, int M, int Q) {
  int p = param_count(shared);
  switch (mode) {
    case ScaleMode::None:
      return p;
    case ScaleMode::ScaleFactors:
      return p + 2 * M;
    case ScaleMode::ScaleFactorsSm:
      return p + 2 * M + 3 * Q * M;
  }
  throw std::logic_error("unreachable");
}

int JointLayout::scale_count() const {
  return mode == ScaleMode::None ? 0 : 2 * M;
}

int JointLayout::sm_count() const {
  return mode == ScaleMode::ScaleFactorsSm ? 3 * Q * M : 0;
}

Eigen::VectorXd JointLayout::pack(const Eigen::VectorXd& shared_params,
                                  const JointExtras& extras) const {
  if (shared_params.size() != shared)
    throw std::invalid_argument("shared parameter length mismatch");
  Eigen::VectorXd x(total());
  x.segment(0, shared) = shared_params;
  if (mode != ScaleMode::None) {
    if (extras.scales.size() != M)
      throw std::invalid_argument("scale factor count mismatch");
    for (int j = 0; j < M; ++j) {
      x[shared + 2 * j] = extras.scales.log_b2[j];
      x[shared + 2 * j + 1] = extras.scales.log_v2[j];
    }
  }
  if (mode == ScaleMode::ScaleFactorsSm) {
    if (static_cast<int>(extras.sm.size()) != M)
      throw std::invalid_argument("sm block count mismatch");
    int base = shared + 2 * M;
    for (int j = 0; j < M; ++j) {
      if (extras.sm[static_cast<size_t>(j)].size() != 3 * Q)
        throw std::invalid_argument("sm block length mismatch");
      x.segment(base + 3 * Q * j, 3 * Q) = extras.sm[static_cast<size_t>(j)];
    }
  }
  return x;
}

void JointLayout::unpack(const Eigen::VectorXd& x,
                         Eigen::VectorXd& shared_params,
                         JointExtras& extras) const {
  if (x.size() != total())
    throw std::invalid_argument("packed vector length mismatch");
  shared_params = x.segment(0, shared);
  extras = JointExtras{};
  if (mode != ScaleMode::None) {
    extras.scales.log_b2.resize(M);
    extras.scales.log_v2.resize(M);
    for (int j = 0; j < M; ++j) {
      extras.scales.log_b2[j] = x[shared + 2 * j];
      extras.scales.log_v2[j] = x[shared + 2 * j + 1];
    }
  }
  if (mode == ScaleMode::ScaleFactorsSm) {
    int base = shared + 2 * M;
    extras.sm.resize(static_cast<size_t>(M));
    for (int j = 0; j < M; ++j)
      extras.sm[static_cast<size_t>(j)] = x.segment(base + 3 * Q * j, 3 * Q);
  }
}

JointNll joint_nll(const KernelExpr& shared,
                   const Eigen::VectorXd& shared_params,
                   const std::vector<Dataset>& datasets, ScaleMode mode,
                   const JointExtras& extras, const JitterPolicy& policy) {
  check_extras(datasets, mode, extras);
  if (shared_params.size() != param_count(shared))
    throw std::invalid_argument("shared parameter length mismatch");

  KernelExpr eff = mode == ScaleMode::None ? shared
                   : mode == ScaleMode::ScaleFactors
                       ? wrap_scaled(shared)
                       : wrap_scaled_sm(shared, sm_q(extras));
  std::vector<Transform> transforms = transform_list(eff);

  JointNll out;
  out.per_dataset.resize(static_cast<Eigen::Index>(datasets.size()));
  for (size_t j = 0; j < datasets.size(); ++j) {
    Eigen::VectorXd u =
        series_params(shared_params, mode, extras, static_cast<int>(j));
    NllValue v = detail::nll_nat(eff, detail::natural_of(transforms, u),
                                 datasets[j], policy);
    out.per_dataset[static_cast<Eigen::Index>(j)] = v.value;
    out.total += v.value;
    out.max_jitter = std::max(out.max_jitter, v.jitter);
  }
  return out;
}

JointNllGradient joint_nll_grad(const KernelExpr& shared,
                                const JointLayout& layout,
                                const Eigen::VectorXd& packed,
                                const std::vector<Dataset>& datasets,
                                const JitterPolicy& policy) {
  if (layout.shared != param_count(shared))
    throw std::invalid_argument("layout does not match shared kernel");
  if (static_cast<int>(datasets.size()) != layout.M)
    throw std::invalid_argument("layout does not match dataset count");
  Eigen::VectorXd shared_params;
  JointExtras extras;
  layout.unpack(packed, shared_params, extras);
  check_extras(datasets, layout.mode, extras);

  KernelExpr eff = layout.mode == ScaleMode::None ? shared
                   : layout.mode == ScaleMode::ScaleFactors
                       ? wrap_scaled(shared)
                       : wrap_scaled_sm(shared, layout.Q);
  std::vector<Transform> transforms = transform_list(eff);

  JointNllGradient out;
  out.grad = Eigen::VectorXd::Zero(layout.total());
  out.nll.per_dataset.resize(layout.M);

  const int s = layout.shared;
  const int sm_base = s + layout.scale_count();
  for (int j = 0; j < layout.M; ++j) {
    Eigen::VectorXd u = series_params(shared_params, layout.mode, extras, j);
    NllGradient g =
        detail::nll_grad_nat(eff, detail::natural_of(transforms, u),
                             datasets[static_cast<size_t>(j)], policy);
    out.nll.per_dataset[j] = g.value;
    out.nll.total += g.value;
    out.nll.max_jitter = std::max(out.nll.max_jitter, g.jitter);

    if (layout.mode == ScaleMode::None) {
      out.grad += g.grad;
    } else {
      out.grad[s + 2 * j] += g.grad[0];
      out.grad[s + 2 * j + 1] += g.grad[1];
      out.grad.segment(0, s) += g.grad.segment(2, s);
      if (layout.mode == ScaleMode::ScaleFactorsSm)
        out.grad.segment(sm_base + 3 * layout.Q * j, 3 * layout.Q) +=
            g.grad.tail(3 * layout.Q);
    }
  }
  return out;
}

EffectiveKernel effective_kernel(const KernelExpr& shared,
                                 const Eigen::VectorXd& shared_params,
                                 ScaleMode mode, const JointExtras& extras,
                                 int dataset_index) {
  if (shared_params.size() != param_count(shared))
    throw std::invalid_argument("shared parameter length mismatch");
  EffectiveKernel out{shared, ParamVector{}};
  if (mode == ScaleMode::None) {
    out.params = ParamVector::from_unconstrained(shared, shared_params);
    return out;
  }
  out.expr = mode == ScaleMode::ScaleFactors
                 ? wrap_scaled(shared)
                 : wrap_scaled_sm(shared, sm_q(extras));
  out.params = ParamVector::from_unconstrained(
      out.expr, series_params(shared_params, mode, extras, dataset_index));
  return out;
}

EffectiveKernel effective_kernel_shared_only(
    const KernelExpr& shared, const Eigen::VectorXd& shared_params,
    ScaleMode mode, const JointExtras& extras, int dataset_index) {
  if (mode == ScaleMode::None || mode == ScaleMode::ScaleFactors)
    return effective_kernel(shared, shared_params, mode, extras, dataset_index);
  JointExtras no_sm;
  no_sm.scales = extras.scales;
  return effective_kernel(shared, shared_params, ScaleMode::ScaleFactors, no_sm,
                          dataset_index);
}

}  // namespace autostat
