#pragma once

#include <optional>
#include <string>
#include <vector>

#include "autostat/joint_model.hpp"
#include "autostat/kernel_rewrite.hpp"
#include "autostat/optimizer.hpp"

namespace autostat {

// 2 * NLL + P * log(n). n counts every observed point across all series.
double bic(double total_nll, int parameter_count, long n_points);

struct ModelCandidate {
  KernelExpr expr;
  std::string text;  // describe(expr)
  ScaleMode mode = ScaleMode::None;
  Eigen::VectorXd shared_params;
  JointExtras extras;
  Eigen::VectorXd per_dataset_nll;
  double total_nll = 0.0;
  int param_total = 0;
  double bic = 0.0;
  // ScaleFactorsSm only: fit of the scaled shared kernel alone, which is what
  // depth selection scores.
  double shared_nll = 0.0;
  int shared_param_total = 0;
  double selection_bic = 0.0;
  double max_jitter = 0.0;
  bool converged = false;
};

struct CandidateSummary {
  std::string text;
  int param_total = 0;
  double total_nll = 0.0;
  double bic = 0.0;
  double selection_bic = 0.0;
  bool failed = false;
};

struct DepthEntry {
  int depth = 0;
  std::vector<CandidateSummary> candidates;
  ModelCandidate best;
  // Histories driving the overfit diagnostic. For ScaleFactorsSm, shared_nll
  // is the scaled-shared-kernel fit and full_nll the complete model's; other
  // modes record the total NLL in both.
  double shared_nll = 0.0;
  double full_nll = 0.0;
};

struct SearchTrace {
  std::vector<DepthEntry> depths;
  // Set when every candidate at some depth failed and the search stopped
  // early with the best model found so far.
  bool aborted = false;
};

struct SearchConfig {
  OptimizeConfig opt;
  JitterPolicy jitter;
  int sm_components = 3;        // ScaleFactorsSm only
  bool freeze_scales = false;   // diagnostic: pin b = 0, v = 1 (no extras)
};

struct SearchResult {
  ModelCandidate best;  // lowest BIC across all depths
  SearchTrace trace;
};

// Greedy structure search: depth 0 scores the WN start kernel, each further
// depth expands the previous depth's winner and keeps the BIC-best candidate.
SearchResult ckl_search(const Dataset& data, const GrammarRules& grammar,
                        int max_depth, const SearchConfig& config);

// Shared-kernel search across all series; the Gram a series sees is
// b_j^2 + v_j^2 * k.
SearchResult rkl_search(const std::vector<Dataset>& datasets,
                        const GrammarRules& grammar, int max_depth,
                        const SearchConfig& config);

struct SrklResult {
  // One fitted model per depth (the accumulated set K), index == depth.
  std::vector<ModelCandidate> per_depth;
  SearchTrace trace;
  int best_index = 0;  // lowest full-model BIC within per_depth
};

// Shared kernel plus a per-series spectral-mixture remainder. Depth selection
// scores the scaled shared kernel alone; the per-depth winners are all kept.
SrklResult srkl_search(const std::vector<Dataset>& datasets,
                       const GrammarRules& grammar, int max_depth,
                       const SearchConfig& config);

// First depth t >= 1 where the shared fit improved while the full-model fit
// got worse; nullopt when no such depth exists.
std::optional<int> overfit_diagnostic(const std::vector<double>& shared_nll,
                                      const std::vector<double>& full_nll);
std::optional<int> overfit_diagnostic(const SearchTrace& trace);

}  // namespace autostat
