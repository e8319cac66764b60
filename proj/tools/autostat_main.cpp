#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "autostat/driver.hpp"
#include "autostat/errors.hpp"

namespace {

int run_main(autostat::RunConfig cfg, const std::string& mode_name) {
  cfg.mode = autostat::parse_run_mode(mode_name);
  if (cfg.out_dir.empty())
    throw autostat::ConfigError("--out is required (output directory)");

  autostat::RunReport report = autostat::run_search(cfg);
  autostat::write_report(report, cfg.out_dir);
  autostat::export_plot_data(report, cfg.out_dir);

  if (report.best_kernel) {
    std::printf("best kernel: %s\n", report.best_kernel->c_str());
  } else {
    for (const autostat::DatasetReport& d : report.datasets)
      if (d.kernel) std::printf("%s: %s\n", d.id.c_str(), d.kernel->c_str());
  }
  std::printf("total NLL %.4f, P %d, BIC %.4f\n", report.total_nll,
              report.param_total, report.bic_value);
  if (report.selection_bic)
    std::printf("selection BIC %.4f (depth %d)\n", *report.selection_bic,
                report.best_depth.value_or(0));
  for (const autostat::DatasetReport& d : report.datasets)
    if (d.rmse_holdout)
      std::printf("%s holdout RMSE %.6f\n", d.id.c_str(), *d.rmse_holdout);
  if (report.aborted)
    std::fprintf(stderr,
                 "warning: search aborted early; report holds the best "
                 "model found before the failure\n");
  std::printf("report written to %s/report.json\n", cfg.out_dir.c_str());
  return 0;
}

int run_synth(autostat::SynthConfig cfg, const std::vector<double>& params,
              const std::string& out_dir) {
  cfg.true_params_natural =
      Eigen::Map<const Eigen::VectorXd>(params.data(),
                                        static_cast<Eigen::Index>(params.size()));
  autostat::SynthResult result = autostat::synth_experiment(cfg);
  autostat::write_synth_result(result, out_dir);
  std::printf("recovery error (median over %d trials): m=1 %.6f, m=%d %.6f\n",
              cfg.trials, result.rows.front().median_error, cfg.m_max,
              result.rows.back().median_error);
  std::printf("results written to %s/synth.json\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional GP kernel discovery for time series"};
  app.require_subcommand(0, 1);

  autostat::RunConfig cfg;
  std::string mode_name = "ckl";
  app.add_option("--mode", mode_name, "Search mode: ckl, rkl or srkl")
      ->capture_default_str();
  app.add_option("--depth", cfg.depth, "Maximum grammar search depth")
      ->capture_default_str();
  app.add_option("--holdout", cfg.holdout,
                 "Points withheld from the end of each series for RMSE")
      ->capture_default_str();
  app.add_option("--sm-components", cfg.sm_components,
                 "Spectral mixture components per series (srkl)")
      ->capture_default_str();
  app.add_option("--restarts", cfg.restarts, "Random optimizer restarts")
      ->capture_default_str();
  app.add_option("--max-iterations", cfg.max_iterations,
                 "Optimizer iteration cap")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--jitter-base", cfg.jitter_base,
                 "Relative diagonal jitter added before Cholesky")
      ->capture_default_str();
  app.add_flag("--normalize-inputs", cfg.normalize_inputs,
               "Affinely map all inputs onto [0,1] before fitting");
  app.add_option("--grid-points", cfg.grid_points,
                 "Points in the forecast/decomposition grid")
      ->capture_default_str();
  app.add_option("--out", cfg.out_dir, "Output directory");
  app.add_option("inputs", cfg.inputs, "Input CSV files (two columns: t,y)");

  autostat::SynthConfig scfg;
  std::vector<double> synth_params;
  std::string synth_out = ".";
  CLI::App* synth = app.add_subcommand(
      "synth", "Hyperparameter recovery study on prior samples");
  synth->add_option("--kernel", scfg.kernel_text, "Kernel text, e.g. 'SE + WN'")
      ->required();
  synth
      ->add_option("--params", synth_params,
                   "True hyperparameters, natural space, traversal order")
      ->required();
  synth->add_option("--m-max", scfg.m_max, "Number of series sampled")
      ->capture_default_str();
  synth->add_option("--trials", scfg.trials, "Trials per subset size")
      ->capture_default_str();
  synth->add_option("--n-points", scfg.n_points, "Points per sampled series")
      ->capture_default_str();
  synth->add_option("--seed", scfg.seed, "Random seed")->capture_default_str();
  synth->add_option("--jitter-base", scfg.jitter_base,
                    "Relative diagonal jitter added before Cholesky")
      ->capture_default_str();
  synth->add_option("--max-iterations", scfg.max_iterations,
                    "Optimizer iteration cap")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(scfg, synth_params, synth_out);
    return run_main(std::move(cfg), mode_name);
  } catch (const autostat::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const autostat::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const autostat::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const autostat::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
