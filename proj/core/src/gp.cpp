#include "autostat/gp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "autostat/errors.hpp"
#include "autostat/kernel_eval.hpp"
#include "autostat/kernel_rewrite.hpp"
#include "autostat/kernel_text.hpp"
#include "autostat/rng.hpp"

namespace autostat {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kVarClamp = -1e-10;

}  // namespace

Dataset Dataset::from_columns(std::string id, const Eigen::VectorXd& t,
                              const Eigen::VectorXd& y) {
  if (t.size() != y.size())
    throw std::invalid_argument("input and target lengths differ");
  if (t.size() == 0) throw std::invalid_argument("empty dataset");
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i]) || !std::isfinite(y[i]))
      throw std::invalid_argument("non-finite value in dataset");

  std::vector<Eigen::Index> order(static_cast<size_t>(t.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&t](Eigen::Index a, Eigen::Index b) { return t[a] < t[b]; });

  Dataset d;
  d.id = std::move(id);
  d.X.resize(t.size(), 1);
  d.y.resize(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    d.X(i, 0) = t[order[static_cast<size_t>(i)]];
    d.y[i] = y[order[static_cast<size_t>(i)]];
  }
  for (Eigen::Index i = 1; i < t.size(); ++i)
    if (d.X(i, 0) == d.X(i - 1, 0))
      throw std::invalid_argument("duplicate input t=" +
                                  std::to_string(d.X(i, 0)));
  return d;
}

double Dataset::input_min() const { return X.col(0).minCoeff(); }
double Dataset::input_max() const { return X.col(0).maxCoeff(); }

Eigen::MatrixXd build_covariance(const KernelExpr& expr,
                                 const ParamVector& params,
                                 const Eigen::MatrixXd& Xa,
                                 const Eigen::MatrixXd& Xb) {
  if (params.size() != param_count(expr))
    throw std::invalid_argument("parameter vector length mismatch");
  Eigen::VectorXd nat = params.natural();
  Eigen::MatrixXd K(Xa.rows(), Xb.rows());
  for (Eigen::Index i = 0; i < Xa.rows(); ++i)
    for (Eigen::Index j = 0; j < Xb.rows(); ++j)
      K(i, j) = detail::eval_scalar(expr, nat.data(), Xa(i, 0), Xb(j, 0));
  return K;
}

namespace {

Eigen::MatrixXd gram(const KernelExpr& expr, const Eigen::VectorXd& nat,
                     const Eigen::MatrixXd& X) {
  Eigen::Index n = X.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      double v = detail::eval_scalar(expr, nat.data(), X(i, 0), X(j, 0));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;      // absolute ridge added to the diagonal
  double jitter_rel = 0.0;  // ridge as a multiple of mean(diag K), 0 if absolute
};

Factorization factorize(const KernelExpr& expr, const Eigen::MatrixXd& K,
                        const JitterPolicy& policy) {
  if (!K.allFinite())
    throw NumericError("non-finite covariance for " + describe(expr));
  double mean_diag = K.diagonal().mean();
  bool relative = std::isfinite(mean_diag) && mean_diag > 0.0;
  double base = relative ? policy.base_rel * mean_diag : policy.base_rel;

  Factorization f;
  double jit = base;
  for (int attempt = 0; attempt <= policy.max_escalations; ++attempt) {
    Eigen::MatrixXd M = K;
    M.diagonal().array() += jit;
    f.llt.compute(M);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = jit;
      f.jitter_rel = relative ? jit / mean_diag : 0.0;
      return f;
    }
    jit *= policy.factor;
  }
  throw NumericError("singular covariance for " + describe(expr));
}

}  // namespace

namespace detail {

Eigen::VectorXd natural_of(const std::vector<Transform>& transforms,
                           const Eigen::VectorXd& u) {
  if (u.size() != static_cast<Eigen::Index>(transforms.size()))
    throw std::invalid_argument("parameter vector length mismatch");
  Eigen::VectorXd nat(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    nat[i] = transforms[static_cast<size_t>(i)] == Transform::Log
                 ? std::exp(u[i])
                 : u[i];
    if (!std::isfinite(nat[i]))
      throw NumericError("non-finite parameter after untransform");
  }
  return nat;
}

NllValue nll_nat(const KernelExpr& expr, const Eigen::VectorXd& nat,
                 const Dataset& data, const JitterPolicy& policy) {
  Eigen::MatrixXd K = gram(expr, nat, data.X);
  Factorization f = factorize(expr, K, policy);
  Eigen::VectorXd alpha = f.llt.solve(data.y);
  double logdet = 0.0;
  const auto& L = f.llt.matrixLLT();
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += std::log(L(i, i));
  NllValue out;
  out.value = 0.5 * data.y.dot(alpha) + logdet +
              0.5 * static_cast<double>(data.size()) * kLog2Pi;
  out.jitter = f.jitter;
  return out;
}

NllGradient nll_grad_nat(const KernelExpr& expr, const Eigen::VectorXd& nat,
                         const Dataset& data, const JitterPolicy& policy) {
  const Eigen::Index n = data.size();
  const int p = param_count(expr);
  Eigen::MatrixXd K = gram(expr, nat, data.X);
  Factorization f = factorize(expr, K, policy);

  Eigen::VectorXd alpha = f.llt.solve(data.y);
  Eigen::MatrixXd W =
      f.llt.solve(Eigen::MatrixXd::Identity(n, n));  // K^-1 first
  double trace_w = 0.0;
  // W <- K^-1 - alpha alpha'
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) W(i, j) -= alpha[i] * alpha[j];
    trace_w += W(i, i);
  }

  double logdet = 0.0;
  const auto& L = f.llt.matrixLLT();
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(L(i, i));

  NllGradient out;
  out.value = 0.5 * data.y.dot(alpha) + logdet +
              0.5 * static_cast<double>(n) * kLog2Pi;
  out.jitter = f.jitter;
  out.grad = Eigen::VectorXd::Zero(p);

  // dNLL/dtheta = 1/2 sum_ij W_ij dK_ij; off-diagonal pairs counted twice.
  Eigen::VectorXd diag_grad = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::eval_scalar_grad(expr, nat.data(), data.X(i, 0), data.X(i, 0),
                             0.5 * W(i, i), out.grad.data());
    if (f.jitter_rel > 0.0)
      detail::eval_scalar_grad(expr, nat.data(), data.X(i, 0), data.X(i, 0),
                               1.0 / static_cast<double>(n), diag_grad.data());
    for (Eigen::Index j = i + 1; j < n; ++j)
      detail::eval_scalar_grad(expr, nat.data(), data.X(i, 0), data.X(j, 0),
                               W(i, j), out.grad.data());
  }
  // The ridge scales with mean(diag K), so it moves with theta too.
  if (f.jitter_rel > 0.0)
    out.grad += (0.5 * trace_w * f.jitter_rel) * diag_grad;
  return out;
}

}  // namespace detail

NllValue nll(const KernelExpr& expr, const ParamVector& params,
             const Dataset& data, const JitterPolicy& policy) {
  if (params.size() != param_count(expr))
    throw std::invalid_argument("parameter vector length mismatch");
  return detail::nll_nat(expr, params.natural(), data, policy);
}

NllGradient nll_grad(const KernelExpr& expr, const ParamVector& params,
                     const Dataset& data, const JitterPolicy& policy) {
  if (params.size() != param_count(expr))
    throw std::invalid_argument("parameter vector length mismatch");
  return detail::nll_grad_nat(expr, params.natural(), data, policy);
}

namespace {

double clamp_variance(double v, const char* what) {
  if (v >= 0.0) return v;
  if (v >= kVarClamp) return 0.0;
  throw NumericError(std::string(what) + " variance below tolerance: " +
                     std::to_string(v));
}

}  // namespace

GpPosterior predict(const KernelExpr& expr, const ParamVector& params,
                    const Dataset& data, const Eigen::MatrixXd& Xstar,
                    const JitterPolicy& policy) {
  if (params.size() != param_count(expr))
    throw std::invalid_argument("parameter vector length mismatch");
  Eigen::VectorXd nat = params.natural();
  Eigen::MatrixXd K = gram(expr, nat, data.X);
  Factorization f = factorize(expr, K, policy);
  Eigen::VectorXd alpha = f.llt.solve(data.y);

  Eigen::Index ns = Xstar.rows();
  Eigen::MatrixXd Kxs(data.size(), ns);  // train x star
  for (Eigen::Index i = 0; i < data.size(); ++i)
    for (Eigen::Index j = 0; j < ns; ++j)
      Kxs(i, j) = detail::eval_scalar(expr, nat.data(), data.X(i, 0), Xstar(j, 0));

  GpPosterior post;
  post.Xstar = Xstar;
  post.mean = Kxs.transpose() * alpha;
  Eigen::MatrixXd V =
      f.llt.matrixL().solve(Kxs);  // L^-1 Kxs, so var = kss - colwise ||.||^2
  post.var.resize(ns);
  for (Eigen::Index j = 0; j < ns; ++j) {
    double kss = detail::eval_scalar(expr, nat.data(), Xstar(j, 0), Xstar(j, 0));
    post.var[j] = clamp_variance(kss - V.col(j).squaredNorm(), "predicted");
  }
  return post;
}

ComponentDecomposition decompose_posterior(const KernelExpr& canonical_expr,
                                           const ParamVector& params,
                                           const Dataset& data,
                                           const Eigen::MatrixXd& Xstar,
                                           const JitterPolicy& policy) {
  if (params.size() != param_count(canonical_expr))
    throw std::invalid_argument("parameter vector length mismatch");
  Eigen::VectorXd nat = params.natural();
  Eigen::MatrixXd K = gram(canonical_expr, nat, data.X);
  Factorization f = factorize(canonical_expr, K, policy);
  Eigen::VectorXd alpha = f.llt.solve(data.y);

  std::vector<KernelExpr> parts = maximal_summands(canonical_expr);

  ComponentDecomposition out;
  out.Xstar = Xstar;
  Eigen::Index ns = Xstar.rows();
  int off = 0;
  for (const KernelExpr& part : parts) {
    int pc = param_count(part);
    const double* pn = nat.data() + off;
    off += pc;

    Eigen::MatrixXd Kxs(data.size(), ns);
    for (Eigen::Index i = 0; i < data.size(); ++i)
      for (Eigen::Index j = 0; j < ns; ++j)
        Kxs(i, j) = detail::eval_scalar(part, pn, data.X(i, 0), Xstar(j, 0));

    PosteriorComponent comp;
    comp.description = describe(part);
    comp.mean = Kxs.transpose() * alpha;
    Eigen::MatrixXd V = f.llt.matrixL().solve(Kxs);
    comp.var.resize(ns);
    for (Eigen::Index j = 0; j < ns; ++j) {
      double kss = detail::eval_scalar(part, pn, Xstar(j, 0), Xstar(j, 0));
      comp.var[j] = clamp_variance(kss - V.col(j).squaredNorm(), "component");
    }
    out.components.push_back(std::move(comp));
  }
  return out;
}

Eigen::VectorXd sample_prior(const KernelExpr& expr, const ParamVector& params,
                             const Eigen::MatrixXd& X, std::uint64_t seed,
                             const JitterPolicy& policy) {
  if (params.size() != param_count(expr))
    throw std::invalid_argument("parameter vector length mismatch");
  Eigen::VectorXd nat = params.natural();
  Eigen::MatrixXd K = gram(expr, nat, X);
  Factorization f = factorize(expr, K, policy);
  SeededRng rng(seed);
  Eigen::VectorXd z(X.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return f.llt.matrixL() * z;
}

double rmse(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
  if (predicted.size() != actual.size())
    throw std::invalid_argument("rmse length mismatch");
  if (predicted.size() == 0) throw std::invalid_argument("rmse of nothing");
  return std::sqrt((predicted - actual).squaredNorm() /
                   static_cast<double>(predicted.size()));
}

}  // namespace autostat
