#include "autostat/model_search.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "autostat/errors.hpp"
#include "autostat/kernel_text.hpp"

namespace autostat {

double bic(double total_nll, int parameter_count, long n_points) {
  if (n_points < 1) throw std::invalid_argument("bic needs n_points >= 1");
  if (parameter_count < 0) throw std::invalid_argument("negative parameter count");
  return 2.0 * total_nll +
         static_cast<double>(parameter_count) *
             std::log(static_cast<double>(n_points));
}

namespace {

constexpr double kBicTie = 1e-9;

// Selection order within a depth: selection BIC, then fewer parameters, then
// the lexicographically smaller description.
bool selection_better(const ModelCandidate& a, const ModelCandidate& b) {
  if (a.selection_bic < b.selection_bic - kBicTie) return true;
  if (a.selection_bic > b.selection_bic + kBicTie) return false;
  if (a.param_total != b.param_total) return a.param_total < b.param_total;
  return a.text < b.text;
}

// Cross-depth order for the returned best, on the full-model BIC.
bool full_better(const ModelCandidate& a, const ModelCandidate& b) {
  if (a.bic < b.bic - kBicTie) return true;
  if (a.bic > b.bic + kBicTie) return false;
  if (a.param_total != b.param_total) return a.param_total < b.param_total;
  return a.text < b.text;
}

ModelCandidate fit_candidate(const KernelExpr& expr,
                             const std::vector<Dataset>& datasets,
                             ScaleMode mode, int depth,
                             const SearchConfig& config, long n_total) {
  ModelCandidate c;
  c.expr = expr;
  c.text = describe(expr);
  c.mode = mode;

  OptimizeConfig opt = config.opt;
  opt.seed = derive_seed(config.opt.seed, "cand",
                         static_cast<std::uint64_t>(depth),
                         fnv1a(1469598103934665603ULL, c.text));
  FittedModel fit = optimize_model(expr, datasets, mode, config.sm_components,
                                   opt, config.jitter);

  const int M = static_cast<int>(datasets.size());
  c.shared_params = std::move(fit.shared_params);
  c.extras = std::move(fit.extras);
  c.per_dataset_nll = fit.nll.per_dataset;
  c.total_nll = fit.nll.total;
  c.max_jitter = fit.nll.max_jitter;
  c.converged = fit.result.converged;
  c.param_total = joint_param_total(expr, mode, M, config.sm_components);
  c.bic = bic(c.total_nll, c.param_total, n_total);

  if (mode == ScaleMode::ScaleFactorsSm) {
    // Depth selection judges the shared structure alone: evaluate each series
    // under b_j^2 + v_j^2 * k at the jointly fitted parameters.
    double shared = 0.0;
    for (int j = 0; j < M; ++j) {
      EffectiveKernel ek = effective_kernel_shared_only(expr, c.shared_params,
                                                        mode, c.extras, j);
      shared +=
          nll(ek.expr, ek.params, datasets[static_cast<size_t>(j)], config.jitter)
              .value;
    }
    c.shared_nll = shared;
    c.shared_param_total = param_count(expr) + 2 * M;
    c.selection_bic = bic(shared, c.shared_param_total, n_total);
  } else {
    c.shared_nll = c.total_nll;
    c.shared_param_total = c.param_total;
    c.selection_bic = c.bic;
  }
  return c;
}

struct GreedyOutcome {
  ModelCandidate best;  // lowest full-model BIC across depths
  SearchTrace trace;
  std::vector<ModelCandidate> per_depth;  // each depth's winner, in order
};

GreedyOutcome greedy_search(const std::vector<Dataset>& datasets,
                            const GrammarRules& grammar, int max_depth,
                            const SearchConfig& config, ScaleMode mode) {
  if (datasets.empty()) throw std::invalid_argument("no datasets");
  if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  long n_total = 0;
  for (const Dataset& d : datasets) n_total += static_cast<long>(d.size());

  GreedyOutcome out;
  bool have_best = false;

  for (int depth = 0; depth <= max_depth; ++depth) {
    std::vector<KernelExpr> exprs;
    if (depth == 0)
      exprs.push_back(KernelExpr::white_noise());
    else
      exprs = expand(out.per_depth.back().expr, grammar);

    DepthEntry entry;
    entry.depth = depth;
    bool have_depth_best = false;
    ModelCandidate depth_best;

    for (const KernelExpr& expr : exprs) {
      CandidateSummary cs;
      cs.text = describe(expr);
      try {
        ModelCandidate c =
            fit_candidate(expr, datasets, mode, depth, config, n_total);
        cs.param_total = c.param_total;
        cs.total_nll = c.total_nll;
        cs.bic = c.bic;
        cs.selection_bic = c.selection_bic;
        if (!have_depth_best || selection_better(c, depth_best)) {
          depth_best = std::move(c);
          have_depth_best = true;
        }
      } catch (const NumericError&) {
        cs.failed = true;
      }
      entry.candidates.push_back(std::move(cs));
    }

    if (!have_depth_best) {
      if (!have_best)
        throw NumericError("search could not fit the starting kernel");
      out.trace.aborted = true;
      break;
    }

    entry.best = depth_best;
    entry.shared_nll = depth_best.shared_nll;
    entry.full_nll = depth_best.total_nll;
    out.trace.depths.push_back(std::move(entry));

    if (!have_best || full_better(depth_best, out.best)) {
      out.best = depth_best;
      have_best = true;
    }
    out.per_depth.push_back(std::move(depth_best));
  }
  return out;
}

}  // namespace

SearchResult ckl_search(const Dataset& data, const GrammarRules& grammar,
                        int max_depth, const SearchConfig& config) {
  GreedyOutcome g = greedy_search({data}, grammar, max_depth, config,
                                  ScaleMode::None);
  return SearchResult{std::move(g.best), std::move(g.trace)};
}

SearchResult rkl_search(const std::vector<Dataset>& datasets,
                        const GrammarRules& grammar, int max_depth,
                        const SearchConfig& config) {
  ScaleMode mode =
      config.freeze_scales ? ScaleMode::None : ScaleMode::ScaleFactors;
  GreedyOutcome g = greedy_search(datasets, grammar, max_depth, config, mode);
  return SearchResult{std::move(g.best), std::move(g.trace)};
}

SrklResult srkl_search(const std::vector<Dataset>& datasets,
                       const GrammarRules& grammar, int max_depth,
                       const SearchConfig& config) {
  if (config.sm_components < 1)
    throw std::invalid_argument("spectral mixture needs at least one component");
  GreedyOutcome g = greedy_search(datasets, grammar, max_depth, config,
                                  ScaleMode::ScaleFactorsSm);
  SrklResult out;
  out.per_depth = std::move(g.per_depth);
  out.trace = std::move(g.trace);
  out.best_index = 0;
  for (size_t i = 1; i < out.per_depth.size(); ++i)
    if (full_better(out.per_depth[i],
                    out.per_depth[static_cast<size_t>(out.best_index)]))
      out.best_index = static_cast<int>(i);
  return out;
}

std::optional<int> overfit_diagnostic(const std::vector<double>& shared_nll,
                                      const std::vector<double>& full_nll) {
  if (shared_nll.size() != full_nll.size())
    throw std::invalid_argument("history length mismatch");
  for (size_t t = 1; t < shared_nll.size(); ++t)
    if (shared_nll[t] < shared_nll[t - 1] && full_nll[t] > full_nll[t - 1])
      return static_cast<int>(t);
  return std::nullopt;
}

std::optional<int> overfit_diagnostic(const SearchTrace& trace) {
  std::vector<double> shared, full;
  shared.reserve(trace.depths.size());
  full.reserve(trace.depths.size());
  for (const DepthEntry& d : trace.depths) {
    shared.push_back(d.shared_nll);
    full.push_back(d.full_nll);
  }
  return overfit_diagnostic(shared, full);
}

}  // namespace autostat
