#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autostat/model_search.hpp"

namespace autostat {

enum class RunMode { Ckl, Rkl, Srkl };

const char* run_mode_name(RunMode mode);
RunMode parse_run_mode(const std::string& name);  // throws ConfigError

struct RunConfig {
  RunMode mode = RunMode::Ckl;
  int depth = 2;
  int holdout = 13;
  int sm_components = 3;
  int restarts = 3;
  int max_iterations = 200;
  std::uint64_t seed = 0;
  double jitter_base = 1e-8;
  bool normalize_inputs = false;
  int grid_points = 201;
  std::vector<std::string> inputs;
  std::string out_dir;
};

struct ComponentSeries {
  std::string description;
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> var;
};

struct DatasetReport {
  std::string id;
  long n_train = 0;
  long n_holdout = 0;
  double nll = 0.0;
  std::optional<double> rmse_holdout;
  // Per-series model, ckl mode only.
  std::optional<std::string> kernel;
  std::vector<double> kernel_params;
  std::optional<int> param_total;
  std::optional<double> bic_value;
  // Scale factors (natural space), rkl and srkl modes.
  std::optional<double> b2;
  std::optional<double> v2;
  // Spectral-mixture remainder (natural space), srkl mode.
  std::vector<double> sm_params;
  ComponentSeries posterior;  // full posterior on the plot grid
  std::vector<ComponentSeries> components;
};

struct DepthSummary {
  int depth = 0;
  std::string best_kernel;
  double best_bic = 0.0;
  double shared_nll = 0.0;
  double full_nll = 0.0;
  std::vector<CandidateSummary> candidates;
};

struct TraceReport {
  std::string label;  // dataset id for per-series searches, "joint" otherwise
  std::vector<DepthSummary> depths;
  bool aborted = false;
  std::optional<int> overfit_depth;
};

struct RunReport {
  int schema = 1;
  RunConfig config;
  std::vector<std::string> dataset_ids;
  // Joint model (rkl/srkl always; ckl when a single series was given).
  std::optional<std::string> best_kernel;
  std::vector<double> best_params;          // unconstrained
  std::vector<double> best_params_natural;  // same slots, natural space
  int param_total = 0;
  double total_nll = 0.0;
  double bic_value = 0.0;
  std::optional<double> selection_bic;           // srkl
  std::vector<std::string> depth_kernels;        // srkl: accumulated set K
  std::optional<int> best_depth;                 // srkl: winner within K
  std::vector<TraceReport> traces;
  std::vector<DatasetReport> datasets;
  double max_jitter = 0.0;
  bool aborted = false;
  double timing_ms = 0.0;  // excluded from the determinism contract
};

// Two numeric columns, optional "t,y"-style header, rejects duplicate or
// non-numeric inputs (errors name the 1-based row). Rows are sorted by t.
// The dataset id is the file stem.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& data, const std::string& path);

// Withholds the last config.holdout points of each series, runs the selected
// search on the rest, and fills in forecasts, holdout RMSE and component
// decompositions. Does not touch the filesystem beyond reading the inputs.
RunReport run_search(const RunConfig& config);

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

// report.json in dir.
void write_report(const RunReport& report, const std::string& dir);

// One CSV per series ("<id>_full.csv") plus one per component
// ("<id>_component_<k>.csv"), each "t,mean,lo,hi" with the band at two
// standard deviations, and an index.json naming them all.
void export_plot_data(const RunReport& report, const std::string& dir);

struct SynthConfig {
  std::string kernel_text;
  Eigen::VectorXd true_params_natural;
  int m_max = 20;
  int trials = 10;
  int n_points = 40;
  std::uint64_t seed = 0;
  double jitter_base = 1e-8;
  int max_iterations = 200;
};

struct SynthRow {
  int m = 0;
  std::vector<double> errors;  // one per trial
  double median_error = 0.0;
};

// Hyperparameter-recovery study: sample m_max series from the given prior,
// then for every subset size m fit the same kernel (starting at the truth) to
// random m-subsets and record the unconstrained-space RMSE to the true
// hyperparameters.
struct SynthResult {
  SynthConfig config;
  std::vector<SynthRow> rows;
  double timing_ms = 0.0;
};

SynthResult synth_experiment(const SynthConfig& config);

// synth.json and synth.csv (m,trial,error) in dir.
void write_synth_result(const SynthResult& result, const std::string& dir);

}  // namespace autostat
