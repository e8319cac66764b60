#include "autostat/kernel_eval.hpp"

#include <cmath>
#include <stdexcept>

#include "autostat/errors.hpp"

namespace autostat {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kMaxFactors = 64;

double logistic(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

namespace detail {

// Both walkers advance `off` through the natural-parameter array in traversal
// order (node slots first, then children).

namespace {

double value_rec(const KernelExpr& n, const double* nat, int& off, double x,
                 double xp) {
  switch (n.kind) {
    case NodeKind::WhiteNoise: {
      double s2 = nat[off++];
      return x == xp ? s2 : 0.0;
    }
    case NodeKind::Constant:
      return nat[off++];
    case NodeKind::Linear: {
      double s2 = nat[off];
      double l = nat[off + 1];
      off += 2;
      return s2 * (x - l) * (xp - l);
    }
    case NodeKind::SquaredExp: {
      double s2 = nat[off];
      double ell = nat[off + 1];
      off += 2;
      double r = (x - xp) / ell;
      return s2 * std::exp(-0.5 * r * r);
    }
    case NodeKind::Periodic: {
      double s2 = nat[off];
      double ell = nat[off + 1];
      double p = nat[off + 2];
      off += 3;
      double u = std::sin(kPi * (x - xp) / p) / ell;
      return s2 * std::exp(-2.0 * u * u);
    }
    case NodeKind::SpectralMixture: {
      double tau = x - xp;
      double acc = 0.0;
      for (int q = 0; q < n.sm_components; ++q) {
        double w = nat[off];
        double mu = nat[off + 1];
        double v = nat[off + 2];
        off += 3;
        acc += w * std::exp(-2.0 * kPi * kPi * tau * tau * v) *
               std::cos(2.0 * kPi * tau * mu);
      }
      return acc;
    }
    case NodeKind::Sum: {
      double acc = 0.0;
      for (const KernelExpr& c : n.children) acc += value_rec(c, nat, off, x, xp);
      return acc;
    }
    case NodeKind::Product: {
      double acc = 1.0;
      for (const KernelExpr& c : n.children) acc *= value_rec(c, nat, off, x, xp);
      return acc;
    }
    case NodeKind::ChangePoint: {
      double loc = nat[off];
      double s = nat[off + 1];
      off += 2;
      double sx = logistic(s * (x - loc));
      double sxp = logistic(s * (xp - loc));
      double k1 = value_rec(n.children[0], nat, off, x, xp);
      double k2 = value_rec(n.children[1], nat, off, x, xp);
      return sx * sxp * k1 + (1.0 - sx) * (1.0 - sxp) * k2;
    }
    case NodeKind::ChangeWindow: {
      double loc = nat[off];
      double w = nat[off + 1];
      double s = nat[off + 2];
      off += 3;
      double l2 = loc + w;
      double s1x = logistic(s * (x - loc));
      double s2x = logistic(s * (x - l2));
      double s1xp = logistic(s * (xp - loc));
      double s2xp = logistic(s * (xp - l2));
      double wa = s1x * (1.0 - s2x) * s1xp * (1.0 - s2xp);
      double wb = (1.0 - s1x) * s2x * (1.0 - s1xp) * s2xp;
      double k1 = value_rec(n.children[0], nat, off, x, xp);
      double k2 = value_rec(n.children[1], nat, off, x, xp);
      return wa * k1 + wb * k2;
    }
  }
  return 0.0;
}

// Adds weight * dk/dtheta (unconstrained coordinates: log-slots carry the
// extra factor of the natural value) into grad, returns k.
double grad_rec(const KernelExpr& n, const double* nat, int& off, double x,
                double xp, double weight, double* grad) {
  switch (n.kind) {
    case NodeKind::WhiteNoise: {
      double s2 = nat[off];
      double v = x == xp ? s2 : 0.0;
      grad[off++] += weight * v;
      return v;
    }
    case NodeKind::Constant: {
      double v = nat[off];
      grad[off++] += weight * v;
      return v;
    }
    case NodeKind::Linear: {
      double s2 = nat[off];
      double l = nat[off + 1];
      double v = s2 * (x - l) * (xp - l);
      grad[off] += weight * v;
      grad[off + 1] += weight * (-s2) * ((x - l) + (xp - l));
      off += 2;
      return v;
    }
    case NodeKind::SquaredExp: {
      double s2 = nat[off];
      double ell = nat[off + 1];
      double r = (x - xp) / ell;
      double v = s2 * std::exp(-0.5 * r * r);
      grad[off] += weight * v;
      grad[off + 1] += weight * v * r * r;
      off += 2;
      return v;
    }
    case NodeKind::Periodic: {
      double s2 = nat[off];
      double ell = nat[off + 1];
      double p = nat[off + 2];
      double d = x - xp;
      double a = kPi * d / p;
      double su = std::sin(a);
      double u = su / ell;
      double v = s2 * std::exp(-2.0 * u * u);
      grad[off] += weight * v;
      grad[off + 1] += weight * v * 4.0 * u * u;
      grad[off + 2] += weight * v * (2.0 * kPi * d / (p * ell * ell)) * std::sin(2.0 * a);
      off += 3;
      return v;
    }
    case NodeKind::SpectralMixture: {
      double tau = x - xp;
      double acc = 0.0;
      for (int q = 0; q < n.sm_components; ++q) {
        double w = nat[off];
        double mu = nat[off + 1];
        double v = nat[off + 2];
        double e = std::exp(-2.0 * kPi * kPi * tau * tau * v);
        double c = std::cos(2.0 * kPi * tau * mu);
        double term = w * e * c;
        acc += term;
        grad[off] += weight * term;
        grad[off + 1] +=
            weight * w * e * (-std::sin(2.0 * kPi * tau * mu)) * 2.0 * kPi * tau * mu;
        grad[off + 2] += weight * term * (-2.0 * kPi * kPi * tau * tau * v);
        off += 3;
      }
      return acc;
    }
    case NodeKind::Sum: {
      double acc = 0.0;
      for (const KernelExpr& c : n.children)
        acc += grad_rec(c, nat, off, x, xp, weight, grad);
      return acc;
    }
    case NodeKind::Product: {
      int m = static_cast<int>(n.children.size());
      if (m > kMaxFactors)
        throw NumericError("product with too many factors");
      double vals[kMaxFactors];
      int starts[kMaxFactors];
      // Value pass to get every factor (and its slot range).
      int voff = off;
      for (int i = 0; i < m; ++i) {
        starts[i] = voff;
        vals[i] = value_rec(n.children[i], nat, voff, x, xp);
      }
      // prefix[i] = product of vals[0..i), suffix accumulated in reverse.
      double prefix[kMaxFactors + 1];
      double suffix[kMaxFactors + 1];
      prefix[0] = 1.0;
      for (int i = 0; i < m; ++i) prefix[i + 1] = prefix[i] * vals[i];
      suffix[m] = 1.0;
      for (int i = m - 1; i >= 0; --i) suffix[i] = suffix[i + 1] * vals[i];
      for (int i = 0; i < m; ++i) {
        int coff = starts[i];
        grad_rec(n.children[i], nat, coff, x, xp,
                 weight * prefix[i] * suffix[i + 1], grad);
      }
      off = voff;
      return prefix[m];
    }
    case NodeKind::ChangePoint: {
      int own = off;
      double loc = nat[off];
      double s = nat[off + 1];
      off += 2;
      double sx = logistic(s * (x - loc));
      double sxp = logistic(s * (xp - loc));
      double a = sx * sxp;
      double b = (1.0 - sx) * (1.0 - sxp);
      double k1 = grad_rec(n.children[0], nat, off, x, xp, weight * a, grad);
      double k2 = grad_rec(n.children[1], nat, off, x, xp, weight * b, grad);
      double gx = sx * (1.0 - sx);
      double gxp = sxp * (1.0 - sxp);
      // location
      double dsx = -s * gx;
      double dsxp = -s * gxp;
      grad[own] += weight * (k1 * (dsx * sxp + sx * dsxp) +
                             k2 * (-dsx * (1.0 - sxp) - (1.0 - sx) * dsxp));
      // log steepness
      dsx = s * (x - loc) * gx;
      dsxp = s * (xp - loc) * gxp;
      grad[own + 1] += weight * (k1 * (dsx * sxp + sx * dsxp) +
                                 k2 * (-dsx * (1.0 - sxp) - (1.0 - sx) * dsxp));
      return a * k1 + b * k2;
    }
    case NodeKind::ChangeWindow: {
      int own = off;
      double loc = nat[off];
      double w = nat[off + 1];
      double s = nat[off + 2];
      off += 3;
      double l2 = loc + w;
      double s1[2], s2[2];  // sigmoids at x and xp
      double z[2] = {x, xp};
      for (int i = 0; i < 2; ++i) {
        s1[i] = logistic(s * (z[i] - loc));
        s2[i] = logistic(s * (z[i] - l2));
      }
      double wa[2], wb[2];
      for (int i = 0; i < 2; ++i) {
        wa[i] = s1[i] * (1.0 - s2[i]);
        wb[i] = (1.0 - s1[i]) * s2[i];
      }
      double A = wa[0] * wa[1];
      double B = wb[0] * wb[1];
      double k1 = grad_rec(n.children[0], nat, off, x, xp, weight * A, grad);
      double k2 = grad_rec(n.children[1], nat, off, x, xp, weight * B, grad);

      // dsig1[i][p], dsig2[i][p] for p in {location, log width, log steepness}
      for (int p = 0; p < 3; ++p) {
        double dwa[2], dwb[2];
        for (int i = 0; i < 2; ++i) {
          double g1 = s1[i] * (1.0 - s1[i]);
          double g2 = s2[i] * (1.0 - s2[i]);
          double ds1, ds2;
          if (p == 0) {  // location (moves both edges)
            ds1 = -s * g1;
            ds2 = -s * g2;
          } else if (p == 1) {  // log width (moves the right edge only)
            ds1 = 0.0;
            ds2 = -s * g2 * w;
          } else {  // log steepness
            ds1 = s * (z[i] - loc) * g1;
            ds2 = s * (z[i] - l2) * g2;
          }
          dwa[i] = ds1 * (1.0 - s2[i]) - s1[i] * ds2;
          dwb[i] = -ds1 * s2[i] + (1.0 - s1[i]) * ds2;
        }
        double dA = dwa[0] * wa[1] + wa[0] * dwa[1];
        double dB = dwb[0] * wb[1] + wb[0] * dwb[1];
        grad[own + p] += weight * (k1 * dA + k2 * dB);
      }
      return A * k1 + B * k2;
    }
  }
  return 0.0;
}

}  // namespace

double eval_scalar(const KernelExpr& expr, const double* nat, double x,
                   double xp) {
  int off = 0;
  return value_rec(expr, nat, off, x, xp);
}

double eval_scalar_grad(const KernelExpr& expr, const double* nat, double x,
                        double xp, double weight, double* grad) {
  int off = 0;
  return grad_rec(expr, nat, off, x, xp, weight, grad);
}

}  // namespace detail

namespace {

void check_args(const KernelExpr& expr, const ParamVector& params,
                const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
  if (params.size() != param_count(expr))
    throw std::invalid_argument("parameter vector length mismatch");
  if (x.size() < 1 || xp.size() < 1)
    throw std::invalid_argument("inputs need at least one dimension");
  if (x.size() != xp.size())
    throw std::invalid_argument("input dimension mismatch");
}

}  // namespace

double eval_kernel(const KernelExpr& expr, const ParamVector& params,
                   const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
  check_args(expr, params, x, xp);
  Eigen::VectorXd nat = params.natural();
  return detail::eval_scalar(expr, nat.data(), x[0], xp[0]);
}

Eigen::VectorXd eval_kernel_grad(const KernelExpr& expr,
                                 const ParamVector& params,
                                 const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& xp) {
  check_args(expr, params, x, xp);
  Eigen::VectorXd nat = params.natural();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
  detail::eval_scalar_grad(expr, nat.data(), x[0], xp[0], 1.0, grad.data());
  return grad;
}

}  // namespace autostat
