#include "autostat/kernel_expr.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "autostat/errors.hpp"

namespace autostat {

bool is_base_kind(NodeKind kind) {
  switch (kind) {
    case NodeKind::WhiteNoise:
    case NodeKind::Constant:
    case NodeKind::Linear:
    case NodeKind::SquaredExp:
    case NodeKind::Periodic:
    case NodeKind::SpectralMixture:
      return true;
    default:
      return false;
  }
}

KernelExpr KernelExpr::white_noise() { return {NodeKind::WhiteNoise, 0, {}}; }
KernelExpr KernelExpr::constant() { return {NodeKind::Constant, 0, {}}; }
KernelExpr KernelExpr::linear() { return {NodeKind::Linear, 0, {}}; }
KernelExpr KernelExpr::squared_exp() { return {NodeKind::SquaredExp, 0, {}}; }
KernelExpr KernelExpr::periodic() { return {NodeKind::Periodic, 0, {}}; }

KernelExpr KernelExpr::spectral_mixture(int q) {
  if (q < 1) throw std::invalid_argument("spectral mixture needs q >= 1");
  return {NodeKind::SpectralMixture, q, {}};
}

KernelExpr KernelExpr::sum(std::vector<KernelExpr> kids) {
  if (kids.size() < 2) throw std::invalid_argument("sum needs >= 2 children");
  return {NodeKind::Sum, 0, std::move(kids)};
}

KernelExpr KernelExpr::product(std::vector<KernelExpr> kids) {
  if (kids.size() < 2)
    throw std::invalid_argument("product needs >= 2 children");
  return {NodeKind::Product, 0, std::move(kids)};
}

KernelExpr KernelExpr::change_point(KernelExpr a, KernelExpr b) {
  std::vector<KernelExpr> kids;
  kids.push_back(std::move(a));
  kids.push_back(std::move(b));
  return {NodeKind::ChangePoint, 0, std::move(kids)};
}

KernelExpr KernelExpr::change_window(KernelExpr a, KernelExpr b) {
  std::vector<KernelExpr> kids;
  kids.push_back(std::move(a));
  kids.push_back(std::move(b));
  return {NodeKind::ChangeWindow, 0, std::move(kids)};
}

bool KernelExpr::operator==(const KernelExpr& other) const {
  return kind == other.kind && sm_components == other.sm_components &&
         children == other.children;
}

int own_slot_count(const KernelExpr& node) {
  switch (node.kind) {
    case NodeKind::WhiteNoise:
    case NodeKind::Constant:
      return 1;
    case NodeKind::Linear:
    case NodeKind::SquaredExp:
      return 2;
    case NodeKind::Periodic:
      return 3;
    case NodeKind::SpectralMixture:
      return 3 * node.sm_components;
    case NodeKind::Sum:
    case NodeKind::Product:
      return 0;
    case NodeKind::ChangePoint:
      return 2;  // location, log steepness
    case NodeKind::ChangeWindow:
      return 3;  // location, log width, log steepness
  }
  return 0;
}

int param_count(const KernelExpr& expr) {
  int n = own_slot_count(expr);
  for (const KernelExpr& child : expr.children) n += param_count(child);
  return n;
}

namespace {

void append_own_slots(const KernelExpr& node, const std::vector<int>& path,
                      std::vector<Slot>& out) {
  auto add = [&](const char* name, Transform t) {
    out.push_back(Slot{path, name, t});
  };
  switch (node.kind) {
    case NodeKind::WhiteNoise:
    case NodeKind::Constant:
      add("variance", Transform::Log);
      break;
    case NodeKind::Linear:
      add("variance", Transform::Log);
      add("offset", Transform::Identity);
      break;
    case NodeKind::SquaredExp:
      add("variance", Transform::Log);
      add("lengthscale", Transform::Log);
      break;
    case NodeKind::Periodic:
      add("variance", Transform::Log);
      add("lengthscale", Transform::Log);
      add("period", Transform::Log);
      break;
    case NodeKind::SpectralMixture:
      for (int q = 0; q < node.sm_components; ++q) {
        std::string idx = std::to_string(q);
        out.push_back(Slot{path, "weight_" + idx, Transform::Log});
        out.push_back(Slot{path, "frequency_" + idx, Transform::Log});
        out.push_back(Slot{path, "bandwidth_" + idx, Transform::Log});
      }
      break;
    case NodeKind::Sum:
    case NodeKind::Product:
      break;
    case NodeKind::ChangePoint:
      add("location", Transform::Identity);
      add("steepness", Transform::Log);
      break;
    case NodeKind::ChangeWindow:
      add("location", Transform::Identity);
      add("width", Transform::Log);
      add("steepness", Transform::Log);
      break;
  }
}

void layout_rec(const KernelExpr& node, std::vector<int>& path,
                std::vector<Slot>& out) {
  append_own_slots(node, path, out);
  for (int i = 0; i < static_cast<int>(node.children.size()); ++i) {
    path.push_back(i);
    layout_rec(node.children[i], path, out);
    path.pop_back();
  }
}

}  // namespace

std::vector<Slot> param_layout(const KernelExpr& expr) {
  std::vector<Slot> out;
  out.reserve(param_count(expr));
  std::vector<int> path;
  layout_rec(expr, path, out);
  return out;
}

namespace {

void transforms_rec(const KernelExpr& node, std::vector<Transform>& out) {
  switch (node.kind) {
    case NodeKind::Linear:
      out.push_back(Transform::Log);
      out.push_back(Transform::Identity);
      break;
    case NodeKind::ChangePoint:
      out.push_back(Transform::Identity);
      out.push_back(Transform::Log);
      break;
    case NodeKind::ChangeWindow:
      out.push_back(Transform::Identity);
      out.push_back(Transform::Log);
      out.push_back(Transform::Log);
      break;
    default:
      out.insert(out.end(), static_cast<size_t>(own_slot_count(node)),
                 Transform::Log);
      break;
  }
  for (const KernelExpr& child : node.children) transforms_rec(child, out);
}

}  // namespace

std::vector<Transform> transform_list(const KernelExpr& expr) {
  std::vector<Transform> out;
  out.reserve(param_count(expr));
  transforms_rec(expr, out);
  return out;
}

double untransform_value(Transform t, double v) {
  return t == Transform::Log ? std::exp(v) : v;
}

double transform_value(Transform t, double v) {
  if (t == Transform::Identity) return v;
  if (!(v > 0.0))
    throw NumericError("log-transformed slot needs a positive value");
  return std::log(v);
}

ParamVector ParamVector::zeros(const KernelExpr& expr) {
  ParamVector p;
  p.slots = param_layout(expr);
  p.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.slots.size()));
  return p;
}

ParamVector ParamVector::from_unconstrained(const KernelExpr& expr,
                                            const Eigen::VectorXd& v) {
  ParamVector p;
  p.slots = param_layout(expr);
  if (v.size() != static_cast<Eigen::Index>(p.slots.size()))
    throw std::invalid_argument("parameter vector length mismatch");
  p.values = v;
  return p;
}

ParamVector ParamVector::from_natural(const KernelExpr& expr,
                                      const Eigen::VectorXd& v) {
  ParamVector p;
  p.slots = param_layout(expr);
  if (v.size() != static_cast<Eigen::Index>(p.slots.size()))
    throw std::invalid_argument("parameter vector length mismatch");
  p.values.resize(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    p.values[i] = transform_value(p.slots[static_cast<size_t>(i)].transform, v[i]);
  return p;
}

Eigen::VectorXd ParamVector::natural() const {
  Eigen::VectorXd out(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    out[i] =
        untransform_value(slots[static_cast<size_t>(i)].transform, values[i]);
    if (!std::isfinite(out[i]))
      throw NumericError("non-finite parameter after untransform");
  }
  return out;
}

}  // namespace autostat
