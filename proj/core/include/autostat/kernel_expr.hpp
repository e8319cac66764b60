#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace autostat {

enum class NodeKind {
  WhiteNoise,
  Constant,
  Linear,
  SquaredExp,
  Periodic,
  SpectralMixture,
  Sum,
  Product,
  ChangePoint,
  ChangeWindow,
};

bool is_base_kind(NodeKind kind);

// A kernel expression. Structure only: hyperparameter values live in a
// ParamVector keyed to the tree by traversal order (a node's own slots first,
// then its children left to right).
struct KernelExpr {
  NodeKind kind = NodeKind::WhiteNoise;
  int sm_components = 0;             // SpectralMixture only
  std::vector<KernelExpr> children;  // Sum/Product: >= 2; CP/CW: exactly 2

  static KernelExpr white_noise();
  static KernelExpr constant();
  static KernelExpr linear();
  static KernelExpr squared_exp();
  static KernelExpr periodic();
  static KernelExpr spectral_mixture(int q);
  static KernelExpr sum(std::vector<KernelExpr> kids);
  static KernelExpr product(std::vector<KernelExpr> kids);
  // CP(a, b): a governs inputs right of the change location, b the left side.
  static KernelExpr change_point(KernelExpr a, KernelExpr b);
  // CW(a, b): a governs the window, b the complement weight.
  static KernelExpr change_window(KernelExpr a, KernelExpr b);

  bool operator==(const KernelExpr& other) const;
};

enum class Transform { Log, Identity };

struct Slot {
  std::vector<int> path;  // child indices from the root to the owning node
  std::string name;
  Transform transform = Transform::Log;
};

int own_slot_count(const KernelExpr& node);
int param_count(const KernelExpr& expr);
std::vector<Slot> param_layout(const KernelExpr& expr);
// Just the per-slot transforms, cheaper than the full layout.
std::vector<Transform> transform_list(const KernelExpr& expr);

double untransform_value(Transform t, double v);
double transform_value(Transform t, double v);  // throws on log(v <= 0)

// Flat unconstrained hyperparameter vector for one expression.
struct ParamVector {
  Eigen::VectorXd values;  // unconstrained space
  std::vector<Slot> slots;

  static ParamVector zeros(const KernelExpr& expr);
  static ParamVector from_unconstrained(const KernelExpr& expr,
                                        const Eigen::VectorXd& v);
  static ParamVector from_natural(const KernelExpr& expr,
                                  const Eigen::VectorXd& v);

  Eigen::Index size() const { return values.size(); }

  // Per-slot untransform (exp on Log slots). Throws NumericError if any
  // resulting value is non-finite.
  Eigen::VectorXd natural() const;
};

}  // namespace autostat
