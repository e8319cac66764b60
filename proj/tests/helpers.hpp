#pragma once

// Shared test utilities: a reference NLL/posterior built on dense LU algebra
// (independent of the library's Cholesky path), a from-the-definition scalar
// kernel evaluator, central finite differences, and seeded random instances.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "autostat/gp.hpp"
#include "autostat/kernel_eval.hpp"
#include "autostat/kernel_expr.hpp"
#include "autostat/rng.hpp"

namespace testutil {

using namespace autostat;

constexpr double kPi = 3.14159265358979323846;

inline Eigen::VectorXd vecd(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Eigen::MatrixXd cold(std::initializer_list<double> xs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

// Scalar kernel value straight from the definitions, written against the slot
// table rather than the library's evaluator.
inline double ref_eval(const KernelExpr& e, const double* nat, int& off,
                       double x, double xp) {
  auto logistic = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  switch (e.kind) {
    case NodeKind::WhiteNoise: {
      double v = nat[off++];
      return x == xp ? v : 0.0;
    }
    case NodeKind::Constant:
      return nat[off++];
    case NodeKind::Linear: {
      double v = nat[off], l = nat[off + 1];
      off += 2;
      return v * (x - l) * (xp - l);
    }
    case NodeKind::SquaredExp: {
      double v = nat[off], l = nat[off + 1];
      off += 2;
      double d = x - xp;
      return v * std::exp(-d * d / (2.0 * l * l));
    }
    case NodeKind::Periodic: {
      double v = nat[off], l = nat[off + 1], p = nat[off + 2];
      off += 3;
      double s = std::sin(kPi * (x - xp) / p);
      return v * std::exp(-2.0 * s * s / (l * l));
    }
    case NodeKind::SpectralMixture: {
      double tau = x - xp;
      double sum = 0.0;
      for (int q = 0; q < e.sm_components; ++q) {
        double w = nat[off], mu = nat[off + 1], bw = nat[off + 2];
        off += 3;
        sum += w * std::exp(-2.0 * kPi * kPi * tau * tau * bw) *
               std::cos(2.0 * kPi * tau * mu);
      }
      return sum;
    }
    case NodeKind::Sum: {
      double total = 0.0;
      for (const KernelExpr& kid : e.children)
        total += ref_eval(kid, nat, off, x, xp);
      return total;
    }
    case NodeKind::Product: {
      double total = 1.0;
      for (const KernelExpr& kid : e.children)
        total *= ref_eval(kid, nat, off, x, xp);
      return total;
    }
    case NodeKind::ChangePoint: {
      double loc = nat[off], s = nat[off + 1];
      off += 2;
      double sx = logistic(s * (x - loc));
      double sxp = logistic(s * (xp - loc));
      double k1 = ref_eval(e.children[0], nat, off, x, xp);
      double k2 = ref_eval(e.children[1], nat, off, x, xp);
      return sx * sxp * k1 + (1.0 - sx) * (1.0 - sxp) * k2;
    }
    case NodeKind::ChangeWindow: {
      double loc = nat[off], w = nat[off + 1], s = nat[off + 2];
      off += 3;
      double l2 = loc + w;
      auto wa = [&](double z) {
        return logistic(s * (z - loc)) * (1.0 - logistic(s * (z - l2)));
      };
      auto wb = [&](double z) {
        return (1.0 - logistic(s * (z - loc))) * logistic(s * (z - l2));
      };
      double k1 = ref_eval(e.children[0], nat, off, x, xp);
      double k2 = ref_eval(e.children[1], nat, off, x, xp);
      return wa(x) * wa(xp) * k1 + wb(x) * wb(xp) * k2;
    }
  }
  throw std::logic_error("unhandled node kind");
}

inline double ref_eval(const KernelExpr& e, const ParamVector& params, double x,
                       double xp) {
  Eigen::VectorXd nat = params.natural();
  int off = 0;
  return ref_eval(e, nat.data(), off, x, xp);
}

// Dense Gaussian density via LU inverse and determinant, with the same
// first-attempt diagonal ridge the library applies.
inline double reference_nll(const KernelExpr& expr, const ParamVector& params,
                            const Dataset& data, double base_rel = 1e-8) {
  const Eigen::Index n = data.size();
  Eigen::MatrixXd K(n, n);
  Eigen::VectorXd nat = params.natural();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      int off = 0;
      K(i, j) = ref_eval(expr, nat.data(), off, data.X(i, 0), data.X(j, 0));
    }
  K.diagonal().array() += base_rel * K.diagonal().mean();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  Eigen::VectorXd alpha = lu.inverse() * data.y;
  return 0.5 * data.y.dot(alpha) + 0.5 * std::log(lu.determinant()) +
         0.5 * static_cast<double>(n) * std::log(2.0 * kPi);
}

struct ReferencePosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

inline ReferencePosterior reference_predict(const KernelExpr& expr,
                                            const ParamVector& params,
                                            const Dataset& data,
                                            const Eigen::MatrixXd& Xstar,
                                            double base_rel = 1e-8) {
  const Eigen::Index n = data.size();
  const Eigen::Index m = Xstar.rows();
  Eigen::VectorXd nat = params.natural();
  auto kv = [&](double a, double b) {
    int off = 0;
    return ref_eval(expr, nat.data(), off, a, b);
  };
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K(i, j) = kv(data.X(i, 0), data.X(j, 0));
  K.diagonal().array() += base_rel * K.diagonal().mean();
  Eigen::MatrixXd Kinv = Eigen::FullPivLU<Eigen::MatrixXd>(K).inverse();

  Eigen::MatrixXd Ks(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) Ks(i, j) = kv(data.X(i, 0), Xstar(j, 0));

  ReferencePosterior out;
  out.mean = Ks.transpose() * Kinv * data.y;
  out.var.resize(m);
  for (Eigen::Index j = 0; j < m; ++j)
    out.var[j] = kv(Xstar(j, 0), Xstar(j, 0)) - Ks.col(j).dot(Kinv * Ks.col(j));
  return out;
}

inline Eigen::VectorXd fd_gradient(const KernelExpr& expr,
                                   const ParamVector& params,
                                   const Dataset& data,
                                   const JitterPolicy& policy = {},
                                   double h = 1e-5) {
  Eigen::VectorXd g(params.size());
  for (int t = 0; t < params.size(); ++t) {
    double step = h * std::max(1.0, std::abs(params.values[t]));
    ParamVector hi = params, lo = params;
    hi.values[t] += step;
    lo.values[t] -= step;
    g[t] = (nll(expr, hi, data, policy).value - nll(expr, lo, data, policy).value) /
           (2.0 * step);
  }
  return g;
}

// Random kernel tree covering every node kind. Depth bounds the operator
// nesting; leaves are drawn uniformly from the five base kernels plus SM.
inline KernelExpr random_expr(SeededRng& rng, int depth) {
  int pick = depth <= 0 ? static_cast<int>(rng.uniform(0.0, 6.0))
                        : static_cast<int>(rng.uniform(0.0, 10.0));
  switch (pick) {
    case 0:
      return KernelExpr::white_noise();
    case 1:
      return KernelExpr::constant();
    case 2:
      return KernelExpr::linear();
    case 3:
      return KernelExpr::squared_exp();
    case 4:
      return KernelExpr::periodic();
    case 5:
      return KernelExpr::spectral_mixture(1 + static_cast<int>(rng.uniform(0.0, 3.0)));
    case 6: {
      std::vector<KernelExpr> kids;
      int n = 2 + static_cast<int>(rng.uniform(0.0, 2.0));
      for (int i = 0; i < n; ++i) kids.push_back(random_expr(rng, depth - 1));
      return KernelExpr::sum(std::move(kids));
    }
    case 7: {
      std::vector<KernelExpr> kids;
      int n = 2 + static_cast<int>(rng.uniform(0.0, 2.0));
      for (int i = 0; i < n; ++i) kids.push_back(random_expr(rng, depth - 1));
      return KernelExpr::product(std::move(kids));
    }
    case 8:
      return KernelExpr::change_point(random_expr(rng, depth - 1),
                                      random_expr(rng, depth - 1));
    default:
      return KernelExpr::change_window(random_expr(rng, depth - 1),
                                       random_expr(rng, depth - 1));
  }
}

// Natural-space values in ranges that keep Grams on [0,1] inputs
// well-conditioned, so Cholesky succeeds on the first ridge attempt and
// finite differences stay clean.
inline ParamVector random_params(const KernelExpr& expr, SeededRng& rng) {
  std::vector<Slot> slots = param_layout(expr);
  Eigen::VectorXd nat(static_cast<Eigen::Index>(slots.size()));
  for (size_t i = 0; i < slots.size(); ++i) {
    const std::string& name = slots[i].name;
    double v;
    if (name == "variance" || name.rfind("weight_", 0) == 0)
      v = rng.uniform(0.3, 2.0);
    else if (name == "lengthscale")
      v = rng.uniform(0.3, 1.5);
    else if (name == "period")
      v = rng.uniform(0.5, 2.0);
    else if (name == "offset" || name == "location")
      v = rng.uniform(-0.5, 1.5);
    else if (name == "width")
      v = rng.uniform(0.2, 0.8);
    else if (name == "steepness")
      v = rng.uniform(2.0, 12.0);
    else if (name.rfind("frequency_", 0) == 0)
      v = rng.uniform(0.2, 2.5);
    else if (name.rfind("bandwidth_", 0) == 0)
      v = rng.uniform(0.05, 0.8);
    else
      throw std::logic_error("slot name without a range: " + name);
    nat[static_cast<Eigen::Index>(i)] = v;
  }
  return ParamVector::from_natural(expr, nat);
}

inline Dataset random_dataset(SeededRng& rng, int n,
                              const std::string& id = "test") {
  Eigen::VectorXd t(n), y(n);
  for (int i = 0; i < n; ++i) {
    t[i] = (static_cast<double>(i) + 0.2 * rng.uniform()) /
           static_cast<double>(n);
    y[i] = rng.normal();
  }
  return Dataset::from_columns(id, t, y);
}

}  // namespace testutil
