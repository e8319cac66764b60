#include "autostat/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "autostat/errors.hpp"
#include "autostat/kernel_text.hpp"

namespace autostat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ProbePoint {
  double alpha = 0.0;
  double phi = kInf;
  double dphi = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

class LineProbe {
 public:
  LineProbe(const Objective& f, const Eigen::VectorXd& x0,
            const Eigen::VectorXd& d)
      : f_(f), x0_(x0), d_(d) {}

  ProbePoint at(double alpha) {
    ProbePoint p;
    p.alpha = alpha;
    p.x = x0_ + alpha * d_;
    p.grad.resize(x0_.size());
    double v = f_(p.x, p.grad);
    if (std::isfinite(v)) {
      p.phi = v;
      p.dphi = p.grad.dot(d_);
      if (!std::isfinite(p.dphi)) p.phi = kInf;
    }
    return p;
  }

 private:
  const Objective& f_;
  const Eigen::VectorXd& x0_;
  const Eigen::VectorXd& d_;
};

struct LineSearchOutcome {
  bool ok = false;
  ProbePoint point;
};

// Minimizer of the quadratic through (0, phi0) with slope dphi0 and the value
// phi_a at alpha. Exact for quadratic objectives.
double quadratic_min(double phi0, double dphi0, double alpha, double phi_a) {
  double denom = 2.0 * (phi_a - phi0 - dphi0 * alpha);
  if (!(denom > 0.0) || !std::isfinite(denom)) return -1.0;
  return -dphi0 * alpha * alpha / denom;
}

// Strong-Wolfe line search (bracket then zoom), then a quadratic
// interpolation polish so that on a quadratic objective the step lands on the
// exact line minimizer.
LineSearchOutcome line_search(const Objective& f, const Eigen::VectorXd& x0,
                              double phi0, const Eigen::VectorXd& g0,
                              const Eigen::VectorXd& d,
                              const OptimizeConfig& cfg) {
  LineProbe probe(f, x0, d);
  const double dphi0 = g0.dot(d);
  LineSearchOutcome out;
  if (!(dphi0 < 0.0)) return out;

  const double c1 = cfg.wolfe_c1;
  const double c2 = cfg.wolfe_c2;
  auto armijo = [&](const ProbePoint& p) {
    return p.phi <= phi0 + c1 * p.alpha * dphi0;
  };
  auto curvature = [&](const ProbePoint& p) {
    return std::abs(p.dphi) <= -c2 * dphi0;
  };

  std::optional<ProbePoint> wolfe;

  // Two-sided zoom between a low point satisfying Armijo and a high endpoint.
  auto zoom = [&](ProbePoint lo, ProbePoint hi) {
    for (int it = 0; it < 60; ++it) {
      double width = hi.alpha - lo.alpha;
      if (std::abs(width) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
      double cand = lo.alpha + quadratic_min(lo.phi, lo.dphi, width, hi.phi);
      double margin = 0.1 * std::abs(width);
      double a = std::min(lo.alpha, hi.alpha) + margin;
      double b = std::max(lo.alpha, hi.alpha) - margin;
      if (!std::isfinite(cand) || cand < a || cand > b)
        cand = lo.alpha + 0.5 * width;
      ProbePoint p = probe.at(cand);
      if (!armijo(p) || p.phi >= lo.phi) {
        hi = std::move(p);
      } else {
        if (curvature(p)) {
          wolfe = std::move(p);
          return;
        }
        if (p.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(p);
      }
    }
    // The interval collapsed without a strong-Wolfe point; keep the best
    // sufficient-decrease point so the outer loop can still move.
    if (lo.alpha > 0.0 && std::isfinite(lo.phi) && lo.phi < phi0) {
      out.ok = true;
      out.point = std::move(lo);
    }
  };

  ProbePoint prev;
  prev.alpha = 0.0;
  prev.phi = phi0;
  prev.dphi = dphi0;

  double alpha = 1.0;
  for (int it = 0; it < 30 && !wolfe && !out.ok; ++it) {
    ProbePoint p = probe.at(alpha);
    if (!armijo(p) || (it > 0 && p.phi >= prev.phi)) {
      zoom(std::move(prev), std::move(p));
      break;
    }
    if (curvature(p)) {
      wolfe = std::move(p);
      break;
    }
    if (p.dphi >= 0.0) {
      zoom(std::move(p), std::move(prev));
      break;
    }
    prev = std::move(p);
    alpha *= 2.0;
    if (alpha > 1e12) break;
  }

  if (wolfe) {
    // Polish: the quadratic through phi(0), phi'(0), phi(alpha) has a closed
    // form minimizer; step there when it is at least as good and still Wolfe.
    double aq = quadratic_min(phi0, dphi0, wolfe->alpha, wolfe->phi);
    if (aq > 0.0 && std::isfinite(aq) && std::abs(aq - wolfe->alpha) >
                                             1e-12 * std::abs(wolfe->alpha)) {
      ProbePoint q = probe.at(aq);
      if (q.phi <= wolfe->phi && armijo(q) && curvature(q)) wolfe = std::move(q);
    }
    out.ok = true;
    out.point = std::move(*wolfe);
  }
  return out;
}

}  // namespace

OptimizeResult minimize_cg(const Objective& f, const Eigen::VectorXd& init,
                           const OptimizeConfig& config) {
  Eigen::VectorXd x = init;
  Eigen::VectorXd g(x.size());
  double fx = kInf;

  for (int attempt = 0; attempt < 10; ++attempt) {
    if (attempt > 0) {
      SeededRng rng(derive_seed(config.seed, "perturb-start",
                                static_cast<std::uint64_t>(attempt)));
      double scale = 0.1 * attempt;
      x = init;
      for (Eigen::Index i = 0; i < x.size(); ++i)
        x[i] += scale * (1.0 + std::abs(init[i])) * rng.normal();
    }
    double v = f(x, g);
    if (std::isfinite(v) && g.allFinite()) {
      fx = v;
      break;
    }
  }
  if (!std::isfinite(fx))
    throw NumericError("objective is not finite at any starting point");

  OptimizeResult res;
  res.best = x;
  res.objective = fx;
  res.grad_norm = g.norm();

  Eigen::VectorXd d = -g;
  bool steepest = true;
  for (int it = 0; it < config.max_iterations; ++it) {
    if (g.norm() <= config.grad_tolerance) {
      res.converged = true;
      break;
    }
    if (g.dot(d) >= 0.0) {
      d = -g;
      steepest = true;
    }

    LineSearchOutcome ls = line_search(f, x, fx, g, d, config);
    if (!ls.ok && !steepest) {
      d = -g;
      steepest = true;
      ls = line_search(f, x, fx, g, d, config);
    }
    if (!ls.ok) break;

    if (config.debug_checks) {
      double dphi0 = g.dot(d);
      double slack = 1e-9 * std::max(1.0, std::abs(fx));
      if (ls.point.phi > fx + config.wolfe_c1 * ls.point.alpha * dphi0 + slack)
        throw std::logic_error("accepted step violates sufficient decrease");
      if (std::abs(ls.point.dphi) > -config.wolfe_c2 * dphi0 + slack)
        throw std::logic_error("accepted step violates the curvature condition");
    }

    double f_old = fx;
    Eigen::VectorXd g_old = std::move(g);
    x = std::move(ls.point.x);
    fx = ls.point.phi;
    g = std::move(ls.point.grad);
    res.iterations = it + 1;
    res.accepted.push_back(fx);
    res.best = x;
    res.objective = fx;

    if (std::abs(f_old - fx) <=
        config.objective_rel_tolerance * std::max(1.0, std::abs(f_old))) {
      res.converged = true;
      break;
    }

    double denom = g_old.squaredNorm();
    double beta =
        denom > 0.0 ? std::max(0.0, g.dot(g - g_old) / denom) : 0.0;
    d = -g + beta * d;
    steepest = beta == 0.0;
  }

  res.grad_norm = g.norm();
  if (res.grad_norm <= config.grad_tolerance) res.converged = true;
  return res;
}

namespace {

struct PooledStats {
  double lo = 0.0;
  double hi = 1.0;
  double range = 1.0;
  double variance = 1.0;
  double nyquist = 0.5;
};

PooledStats pool_stats(const std::vector<Dataset>& datasets) {
  if (datasets.empty()) throw std::invalid_argument("no datasets");
  PooledStats s;
  s.lo = kInf;
  s.hi = -kInf;
  double sum = 0.0, sumsq = 0.0;
  Eigen::Index n = 0;
  std::vector<double> gaps;
  for (const Dataset& d : datasets) {
    s.lo = std::min(s.lo, d.input_min());
    s.hi = std::max(s.hi, d.input_max());
    sum += d.y.sum();
    sumsq += d.y.squaredNorm();
    n += d.size();
    for (Eigen::Index i = 1; i < d.size(); ++i)
      gaps.push_back(d.X(i, 0) - d.X(i - 1, 0));
  }
  double mean = sum / static_cast<double>(n);
  double msq = sumsq / static_cast<double>(n);
  s.variance = std::max({msq - mean * mean, 1e-3 * msq, 1e-10});
  s.range = s.hi - s.lo;
  if (!(s.range > 0.0)) s.range = 1.0;
  if (!gaps.empty()) {
    size_t mid = gaps.size() / 2;
    std::nth_element(gaps.begin(), gaps.begin() + mid, gaps.end());
    double dx = gaps[mid];
    if (dx > 0.0) s.nyquist = 0.5 / dx;
  }
  return s;
}

void fill_natural(const KernelExpr& e, const PooledStats& s, SeededRng& rng,
                  bool noisy, std::vector<double>& nat) {
  auto pos = [&](double v) { return noisy ? v * rng.lognormal(0.3) : v; };
  switch (e.kind) {
    case NodeKind::WhiteNoise:
    case NodeKind::Constant:
      nat.push_back(pos(s.variance));
      break;
    case NodeKind::Linear:
      nat.push_back(pos(s.variance));
      nat.push_back(rng.uniform(s.lo, s.hi));
      break;
    case NodeKind::SquaredExp:
      nat.push_back(pos(s.variance));
      nat.push_back(pos(s.range / 4.0));
      break;
    case NodeKind::Periodic:
      nat.push_back(pos(s.variance));
      nat.push_back(pos(s.range / 4.0));
      nat.push_back(pos(s.range / 8.0));
      break;
    case NodeKind::SpectralMixture: {
      double w = s.variance / e.sm_components;
      for (int q = 0; q < e.sm_components; ++q) {
        nat.push_back(pos(w));
        nat.push_back(rng.uniform(0.0, s.nyquist));
        nat.push_back(pos(1.0 / (s.range * s.range)));
      }
      break;
    }
    case NodeKind::ChangePoint:
      nat.push_back(rng.uniform(s.lo, s.hi));
      nat.push_back(pos(10.0 / s.range));
      break;
    case NodeKind::ChangeWindow:
      nat.push_back(rng.uniform(s.lo, s.hi));
      nat.push_back(pos(s.range / 8.0));
      nat.push_back(pos(10.0 / s.range));
      break;
    case NodeKind::Sum:
    case NodeKind::Product:
      break;
  }
  for (const KernelExpr& kid : e.children) fill_natural(kid, s, rng, noisy, nat);
}

}  // namespace

ParamVector init_params(const KernelExpr& expr,
                        const std::vector<Dataset>& datasets, SeededRng& rng,
                        bool noisy) {
  PooledStats s = pool_stats(datasets);
  std::vector<double> nat;
  nat.reserve(static_cast<size_t>(param_count(expr)));
  fill_natural(expr, s, rng, noisy, nat);
  return ParamVector::from_natural(
      expr, Eigen::Map<const Eigen::VectorXd>(
                nat.data(), static_cast<Eigen::Index>(nat.size())));
}

namespace {

JointExtras initial_extras(const std::vector<Dataset>& datasets, ScaleMode mode,
                           int sm_components, SeededRng& rng, bool noisy) {
  JointExtras ex;
  if (mode == ScaleMode::None) return ex;
  const auto M = static_cast<Eigen::Index>(datasets.size());
  ex.scales.log_b2.resize(M);
  ex.scales.log_v2.resize(M);
  auto pos = [&](double v) { return noisy ? v * rng.lognormal(0.3) : v; };
  for (Eigen::Index j = 0; j < M; ++j) {
    const Dataset& d = datasets[static_cast<size_t>(j)];
    double mean = d.y.mean();
    double msq = d.y.squaredNorm() / static_cast<double>(d.size());
    double var = std::max({msq - mean * mean, 1e-3 * msq, 1e-10});
    ex.scales.log_b2[j] = std::log(pos(std::max(mean * mean, 1e-2 * var)));
    ex.scales.log_v2[j] = std::log(pos(1.0));
  }
  if (mode == ScaleMode::ScaleFactorsSm) {
    KernelExpr sm = KernelExpr::spectral_mixture(sm_components);
    for (Eigen::Index j = 0; j < M; ++j) {
      std::vector<Dataset> one{datasets[static_cast<size_t>(j)]};
      ex.sm.push_back(init_params(sm, one, rng, noisy).values);
    }
  }
  return ex;
}

}  // namespace

FittedModel optimize_model(const KernelExpr& expr,
                           const std::vector<Dataset>& datasets, ScaleMode mode,
                           int sm_components, const OptimizeConfig& config,
                           const JitterPolicy& policy) {
  if (datasets.empty()) throw std::invalid_argument("no datasets");
  if (mode == ScaleMode::ScaleFactorsSm && sm_components < 1)
    throw std::invalid_argument("spectral mixture needs at least one component");

  JointLayout layout;
  layout.shared = param_count(expr);
  layout.M = static_cast<int>(datasets.size());
  layout.Q = mode == ScaleMode::ScaleFactorsSm ? sm_components : 0;
  layout.mode = mode;

  Objective objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
    try {
      JointNllGradient g = joint_nll_grad(expr, layout, v, datasets, policy);
      grad = std::move(g.grad);
      return g.nll.total;
    } catch (const NumericError&) {
      return kInf;
    }
  };

  std::optional<OptimizeResult> best;
  int starts = std::max(1, config.restarts);
  for (int r = 0; r < starts; ++r) {
    SeededRng rng(derive_seed(config.seed, "start", static_cast<std::uint64_t>(r)));
    bool noisy = r > 0;
    Eigen::VectorXd shared0 = init_params(expr, datasets, rng, noisy).values;
    JointExtras ex0 = initial_extras(datasets, mode, sm_components, rng, noisy);
    Eigen::VectorXd x0 = layout.pack(shared0, ex0);

    OptimizeConfig c = config;
    c.seed = derive_seed(config.seed, "cg", static_cast<std::uint64_t>(r));
    OptimizeResult res;
    try {
      res = minimize_cg(objective, x0, c);
    } catch (const NumericError&) {
      continue;
    }
    if (!best || res.objective < best->objective) {
      res.restart = r;
      best = std::move(res);
    }
  }
  if (!best)
    throw NumericError("optimization failed for " + describe(expr));

  FittedModel fit;
  fit.result = std::move(*best);
  layout.unpack(fit.result.best, fit.shared_params, fit.extras);
  fit.nll = joint_nll(expr, fit.shared_params, datasets, mode, fit.extras, policy);
  return fit;
}

}  // namespace autostat
