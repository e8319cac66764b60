#include "autostat/driver.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "autostat/errors.hpp"
#include "autostat/kernel_text.hpp"
#include "json.hpp"

namespace autostat {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Ckl:
      return "ckl";
    case RunMode::Rkl:
      return "rkl";
    case RunMode::Srkl:
      return "srkl";
  }
  return "ckl";
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "ckl") return RunMode::Ckl;
  if (name == "rkl") return RunMode::Rkl;
  if (name == "srkl") return RunMode::Srkl;
  throw ConfigError("unknown mode '" + name + "' (expected ckl, rkl or srkl)");
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "0";
  return std::string(buf, p);
}

bool parse_double(std::string_view cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  if (first == last) return false;
  auto [p, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && p == last;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path);

  std::vector<double> ts, ys;
  std::map<double, size_t> seen;
  size_t pos = 0;
  size_t row = 0;
  bool saw_data = false;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line(text.data() + pos,
                          (nl == std::string::npos ? text.size() : nl) - pos);
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    std::vector<std::string_view> cells = split_cells(line);
    double t = 0.0, y = 0.0;
    bool numeric = cells.size() >= 1 && parse_double(cells[0], t) &&
                   (cells.size() < 2 || parse_double(cells[1], y));
    if (!saw_data && ts.empty() && !numeric) continue;  // header row

    if (cells.size() != 2)
      throw ParseError(path + " row " + std::to_string(row) +
                           ": expected two columns, found " +
                           std::to_string(cells.size()),
                       row);
    if (!parse_double(cells[0], t) || !std::isfinite(t))
      throw ParseError(path + " row " + std::to_string(row) +
                           ": first column is not a finite number",
                       row);
    if (!parse_double(cells[1], y) || !std::isfinite(y))
      throw ParseError(path + " row " + std::to_string(row) +
                           ": second column is not a finite number",
                       row);
    auto [it, inserted] = seen.emplace(t, row);
    if (!inserted)
      throw ParseError(path + " row " + std::to_string(row) +
                           ": duplicate t value " + format_double(t) +
                           " (first seen at row " + std::to_string(it->second) +
                           ")",
                       row);
    ts.push_back(t);
    ys.push_back(y);
    saw_data = true;
  }
  if (ts.empty()) throw ParseError(path + ": no data rows", row);

  Eigen::Map<const Eigen::VectorXd> tv(ts.data(), static_cast<Eigen::Index>(ts.size()));
  Eigen::Map<const Eigen::VectorXd> yv(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return Dataset::from_columns(fs::path(path).stem().string(), tv, yv);
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "t,y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i)
    out << format_double(data.X(i, 0)) << ',' << format_double(data.y[i])
        << '\n';
  if (!out) throw IoError("failed writing " + path);
}

namespace {

struct SplitSeries {
  Dataset train;          // computation coordinates
  Eigen::VectorXd hold_t;  // computation coordinates
  Eigen::VectorXd hold_y;
  Eigen::VectorXd grid;       // original units
  Eigen::MatrixXd grid_comp;  // computation coordinates
};

DepthSummary summarize_depth(const DepthEntry& entry) {
  DepthSummary s;
  s.depth = entry.depth;
  s.best_kernel = entry.best.text;
  s.best_bic = entry.best.bic;
  s.shared_nll = entry.shared_nll;
  s.full_nll = entry.full_nll;
  s.candidates = entry.candidates;
  return s;
}

TraceReport summarize_trace(const std::string& label, const SearchTrace& trace) {
  TraceReport t;
  t.label = label;
  t.aborted = trace.aborted;
  for (const DepthEntry& d : trace.depths) t.depths.push_back(summarize_depth(d));
  t.overfit_depth = overfit_diagnostic(trace);
  return t;
}

ComponentSeries to_series(std::string description, const Eigen::VectorXd& t,
                          const Eigen::VectorXd& mean,
                          const Eigen::VectorXd& var) {
  ComponentSeries s;
  s.description = std::move(description);
  s.t.assign(t.data(), t.data() + t.size());
  s.mean.assign(mean.data(), mean.data() + mean.size());
  s.var.assign(var.data(), var.data() + var.size());
  return s;
}

// Posterior, holdout RMSE and component decomposition for one series under
// its effective kernel.
void fill_predictions(DatasetReport& rep, const EffectiveKernel& eff,
                      const SplitSeries& split, const JitterPolicy& policy) {
  if (split.hold_t.size() > 0) {
    Eigen::MatrixXd Xh(split.hold_t.size(), 1);
    Xh.col(0) = split.hold_t;
    GpPosterior post = predict(eff.expr, eff.params, split.train, Xh, policy);
    rep.rmse_holdout = rmse(post.mean, split.hold_y);
  }

  GpPosterior full =
      predict(eff.expr, eff.params, split.train, split.grid_comp, policy);
  rep.posterior = to_series(describe(eff.expr), split.grid, full.mean, full.var);

  CanonicalForm cf = canonical_form(eff.expr);
  ParamVector cparams = cf.map_params(eff.params);
  ComponentDecomposition dec = decompose_posterior(cf.expr, cparams, split.train,
                                                   split.grid_comp, policy);
  for (const PosteriorComponent& c : dec.components)
    rep.components.push_back(to_series(c.description, split.grid, c.mean, c.var));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

RunReport run_search(const RunConfig& config) {
  auto t0 = std::chrono::steady_clock::now();

  if (config.inputs.empty()) throw ConfigError("no input files given");
  if (config.depth < 0) throw ConfigError("depth must be >= 0");
  if (config.holdout < 0) throw ConfigError("holdout must be >= 0");
  if (config.restarts < 1) throw ConfigError("restarts must be >= 1");
  if (config.max_iterations < 1) throw ConfigError("max-iterations must be >= 1");
  if (config.sm_components < 1) throw ConfigError("sm-components must be >= 1");
  if (config.grid_points < 2) throw ConfigError("grid-points must be >= 2");
  if (!(config.jitter_base > 0)) throw ConfigError("jitter-base must be > 0");

  std::vector<Dataset> raw;
  for (const std::string& path : config.inputs) raw.push_back(load_csv(path));
  for (size_t i = 0; i < raw.size(); ++i)
    for (size_t j = i + 1; j < raw.size(); ++j)
      if (raw[i].id == raw[j].id)
        throw ConfigError("two inputs share the id '" + raw[i].id +
                          "'; rename one file");

  for (const Dataset& d : raw)
    if (static_cast<long>(d.size()) <= config.holdout)
      throw ConfigError("series '" + d.id + "' has " +
                        std::to_string(d.size()) +
                        " points, not enough to withhold " +
                        std::to_string(config.holdout));

  // Optional affine map of the input axis onto [0, 1], shared by all series.
  double in_lo = raw.front().input_min();
  double in_hi = raw.front().input_max();
  for (const Dataset& d : raw) {
    in_lo = std::min(in_lo, d.input_min());
    in_hi = std::max(in_hi, d.input_max());
  }
  double in_scale = in_hi - in_lo;
  if (!(in_scale > 0)) in_scale = 1.0;
  auto to_comp = [&](double t) {
    return config.normalize_inputs ? (t - in_lo) / in_scale : t;
  };

  std::vector<SplitSeries> splits;
  for (const Dataset& d : raw) {
    SplitSeries s;
    Eigen::Index n_train = d.size() - config.holdout;
    Eigen::VectorXd tt(n_train), ty(n_train);
    for (Eigen::Index i = 0; i < n_train; ++i) {
      tt[i] = to_comp(d.X(i, 0));
      ty[i] = d.y[i];
    }
    s.train = Dataset::from_columns(d.id, tt, ty);
    s.hold_t.resize(config.holdout);
    s.hold_y.resize(config.holdout);
    for (int i = 0; i < config.holdout; ++i) {
      s.hold_t[i] = to_comp(d.X(n_train + i, 0));
      s.hold_y[i] = d.y[n_train + i];
    }
    s.grid.resize(config.grid_points);
    double lo = d.input_min();
    double hi = d.input_max();
    for (int i = 0; i < config.grid_points; ++i)
      s.grid[i] = lo + (hi - lo) * static_cast<double>(i) /
                           static_cast<double>(config.grid_points - 1);
    s.grid_comp.resize(config.grid_points, 1);
    for (int i = 0; i < config.grid_points; ++i)
      s.grid_comp(i, 0) = to_comp(s.grid[i]);
    splits.push_back(std::move(s));
  }

  SearchConfig scfg;
  scfg.opt.max_iterations = config.max_iterations;
  scfg.opt.restarts = config.restarts;
  scfg.opt.seed = config.seed;
  scfg.jitter.base_rel = config.jitter_base;
  scfg.sm_components = config.sm_components;
  GrammarRules grammar = GrammarRules::standard();

  RunReport report;
  report.config = config;
  for (const Dataset& d : raw) report.dataset_ids.push_back(d.id);

  long n_total = 0;
  for (const SplitSeries& s : splits) n_total += static_cast<long>(s.train.size());

  std::vector<Dataset> train_sets;
  for (const SplitSeries& s : splits) train_sets.push_back(s.train);

  if (config.mode == RunMode::Ckl) {
    double nll_sum = 0.0;
    int p_sum = 0;
    for (size_t j = 0; j < splits.size(); ++j) {
      SearchConfig one = scfg;
      one.opt.seed = derive_seed(config.seed, "series", j);
      SearchResult res =
          ckl_search(splits[j].train, grammar, config.depth, one);
      report.traces.push_back(summarize_trace(raw[j].id, res.trace));
      report.aborted = report.aborted || res.trace.aborted;
      report.max_jitter = std::max(report.max_jitter, res.best.max_jitter);

      DatasetReport rep;
      rep.id = raw[j].id;
      rep.n_train = splits[j].train.size();
      rep.n_holdout = config.holdout;
      rep.nll = res.best.total_nll;
      rep.kernel = res.best.text;
      rep.param_total = res.best.param_total;
      rep.bic_value = res.best.bic;
      ParamVector pv =
          ParamVector::from_unconstrained(res.best.expr, res.best.shared_params);
      rep.kernel_params = to_std(pv.natural());
      fill_predictions(rep, EffectiveKernel{res.best.expr, pv}, splits[j],
                       scfg.jitter);
      report.datasets.push_back(std::move(rep));

      nll_sum += res.best.total_nll;
      p_sum += res.best.param_total;
      if (splits.size() == 1) {
        report.best_kernel = res.best.text;
        report.best_params = to_std(res.best.shared_params);
        report.best_params_natural = to_std(pv.natural());
      }
    }
    report.total_nll = nll_sum;
    report.param_total = p_sum;
    report.bic_value = bic(nll_sum, p_sum, n_total);
  } else {
    ModelCandidate best;
    SearchTrace trace;
    if (config.mode == RunMode::Rkl) {
      SearchResult res = rkl_search(train_sets, grammar, config.depth, scfg);
      best = std::move(res.best);
      trace = std::move(res.trace);
    } else {
      SrklResult res = srkl_search(train_sets, grammar, config.depth, scfg);
      best = res.per_depth[static_cast<size_t>(res.best_index)];
      trace = std::move(res.trace);
      report.best_depth = res.best_index;
      report.selection_bic = best.selection_bic;
      for (const ModelCandidate& c : res.per_depth) {
        report.depth_kernels.push_back(c.text);
        report.max_jitter = std::max(report.max_jitter, c.max_jitter);
      }
    }
    report.traces.push_back(summarize_trace("joint", trace));
    report.aborted = trace.aborted;
    report.max_jitter = std::max(report.max_jitter, best.max_jitter);

    report.best_kernel = best.text;
    report.best_params = to_std(best.shared_params);
    report.best_params_natural = to_std(
        ParamVector::from_unconstrained(best.expr, best.shared_params).natural());
    report.param_total = best.param_total;
    report.total_nll = best.total_nll;
    report.bic_value = best.bic;

    for (size_t j = 0; j < splits.size(); ++j) {
      DatasetReport rep;
      rep.id = raw[j].id;
      rep.n_train = splits[j].train.size();
      rep.n_holdout = config.holdout;
      rep.nll = best.per_dataset_nll[static_cast<Eigen::Index>(j)];
      rep.b2 = std::exp(best.extras.scales.log_b2[static_cast<Eigen::Index>(j)]);
      rep.v2 = std::exp(best.extras.scales.log_v2[static_cast<Eigen::Index>(j)]);
      if (best.mode == ScaleMode::ScaleFactorsSm) {
        const Eigen::VectorXd& sm = best.extras.sm[j];
        rep.sm_params.reserve(static_cast<size_t>(sm.size()));
        for (Eigen::Index i = 0; i < sm.size(); ++i)
          rep.sm_params.push_back(std::exp(sm[i]));
      }
      EffectiveKernel eff = effective_kernel(best.expr, best.shared_params,
                                             best.mode, best.extras,
                                             static_cast<int>(j));
      fill_predictions(rep, eff, splits[j], scfg.jitter);
      report.datasets.push_back(std::move(rep));
    }
  }

  auto t1 = std::chrono::steady_clock::now();
  report.timing_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return report;
}

namespace {

ojson series_to_json(const ComponentSeries& s) {
  return ojson{{"description", s.description},
               {"t", s.t},
               {"mean", s.mean},
               {"var", s.var}};
}

ComponentSeries series_from_json(const ojson& j) {
  ComponentSeries s;
  s.description = j.at("description").get<std::string>();
  s.t = j.at("t").get<std::vector<double>>();
  s.mean = j.at("mean").get<std::vector<double>>();
  s.var = j.at("var").get<std::vector<double>>();
  return s;
}

template <typename T>
ojson opt_to_json(const std::optional<T>& v) {
  if (v) return ojson(*v);
  return ojson(nullptr);
}

template <typename T>
std::optional<T> opt_from_json(const ojson& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

ojson config_to_json(const RunConfig& c) {
  return ojson{{"mode", run_mode_name(c.mode)},
               {"depth", c.depth},
               {"holdout", c.holdout},
               {"sm_components", c.sm_components},
               {"restarts", c.restarts},
               {"max_iterations", c.max_iterations},
               {"seed", c.seed},
               {"jitter_base", c.jitter_base},
               {"normalize_inputs", c.normalize_inputs},
               {"grid_points", c.grid_points},
               {"inputs", c.inputs},
               {"out_dir", c.out_dir}};
}

RunConfig config_from_json(const ojson& j) {
  RunConfig c;
  c.mode = parse_run_mode(j.at("mode").get<std::string>());
  c.depth = j.at("depth").get<int>();
  c.holdout = j.at("holdout").get<int>();
  c.sm_components = j.at("sm_components").get<int>();
  c.restarts = j.at("restarts").get<int>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.jitter_base = j.at("jitter_base").get<double>();
  c.normalize_inputs = j.at("normalize_inputs").get<bool>();
  c.grid_points = j.at("grid_points").get<int>();
  c.inputs = j.at("inputs").get<std::vector<std::string>>();
  c.out_dir = j.at("out_dir").get<std::string>();
  return c;
}

ojson candidate_to_json(const CandidateSummary& c) {
  return ojson{{"kernel", c.text},
               {"param_total", c.param_total},
               {"nll", c.total_nll},
               {"bic", c.bic},
               {"selection_bic", c.selection_bic},
               {"failed", c.failed}};
}

CandidateSummary candidate_from_json(const ojson& j) {
  CandidateSummary c;
  c.text = j.at("kernel").get<std::string>();
  c.param_total = j.at("param_total").get<int>();
  c.total_nll = j.at("nll").get<double>();
  c.bic = j.at("bic").get<double>();
  c.selection_bic = j.at("selection_bic").get<double>();
  c.failed = j.at("failed").get<bool>();
  return c;
}

ojson trace_to_json(const TraceReport& t) {
  ojson depths = ojson::array();
  for (const DepthSummary& d : t.depths) {
    ojson cands = ojson::array();
    for (const CandidateSummary& c : d.candidates)
      cands.push_back(candidate_to_json(c));
    depths.push_back(ojson{{"depth", d.depth},
                           {"best_kernel", d.best_kernel},
                           {"best_bic", d.best_bic},
                           {"shared_nll", d.shared_nll},
                           {"full_nll", d.full_nll},
                           {"candidates", std::move(cands)}});
  }
  return ojson{{"label", t.label},
               {"aborted", t.aborted},
               {"overfit_depth", opt_to_json(t.overfit_depth)},
               {"depths", std::move(depths)}};
}

TraceReport trace_from_json(const ojson& j) {
  TraceReport t;
  t.label = j.at("label").get<std::string>();
  t.aborted = j.at("aborted").get<bool>();
  t.overfit_depth = opt_from_json<int>(j.at("overfit_depth"));
  for (const ojson& dj : j.at("depths")) {
    DepthSummary d;
    d.depth = dj.at("depth").get<int>();
    d.best_kernel = dj.at("best_kernel").get<std::string>();
    d.best_bic = dj.at("best_bic").get<double>();
    d.shared_nll = dj.at("shared_nll").get<double>();
    d.full_nll = dj.at("full_nll").get<double>();
    for (const ojson& cj : dj.at("candidates"))
      d.candidates.push_back(candidate_from_json(cj));
    t.depths.push_back(std::move(d));
  }
  return t;
}

ojson dataset_to_json(const DatasetReport& d) {
  ojson components = ojson::array();
  for (const ComponentSeries& c : d.components)
    components.push_back(series_to_json(c));
  return ojson{{"id", d.id},
               {"n_train", d.n_train},
               {"n_holdout", d.n_holdout},
               {"nll", d.nll},
               {"rmse_holdout", opt_to_json(d.rmse_holdout)},
               {"kernel", opt_to_json(d.kernel)},
               {"kernel_params", d.kernel_params},
               {"param_total", opt_to_json(d.param_total)},
               {"bic", opt_to_json(d.bic_value)},
               {"b2", opt_to_json(d.b2)},
               {"v2", opt_to_json(d.v2)},
               {"sm_params", d.sm_params},
               {"posterior", series_to_json(d.posterior)},
               {"components", std::move(components)}};
}

DatasetReport dataset_from_json(const ojson& j) {
  DatasetReport d;
  d.id = j.at("id").get<std::string>();
  d.n_train = j.at("n_train").get<long>();
  d.n_holdout = j.at("n_holdout").get<long>();
  d.nll = j.at("nll").get<double>();
  d.rmse_holdout = opt_from_json<double>(j.at("rmse_holdout"));
  d.kernel = opt_from_json<std::string>(j.at("kernel"));
  d.kernel_params = j.at("kernel_params").get<std::vector<double>>();
  d.param_total = opt_from_json<int>(j.at("param_total"));
  d.bic_value = opt_from_json<double>(j.at("bic"));
  d.b2 = opt_from_json<double>(j.at("b2"));
  d.v2 = opt_from_json<double>(j.at("v2"));
  d.sm_params = j.at("sm_params").get<std::vector<double>>();
  d.posterior = series_from_json(j.at("posterior"));
  for (const ojson& cj : j.at("components"))
    d.components.push_back(series_from_json(cj));
  return d;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
  ojson traces = ojson::array();
  for (const TraceReport& t : report.traces) traces.push_back(trace_to_json(t));
  ojson datasets = ojson::array();
  for (const DatasetReport& d : report.datasets)
    datasets.push_back(dataset_to_json(d));

  ojson j{{"schema", report.schema},
          {"config", config_to_json(report.config)},
          {"dataset_ids", report.dataset_ids},
          {"best_kernel", opt_to_json(report.best_kernel)},
          {"best_params", report.best_params},
          {"best_params_natural", report.best_params_natural},
          {"param_total", report.param_total},
          {"total_nll", report.total_nll},
          {"bic", report.bic_value},
          {"selection_bic", opt_to_json(report.selection_bic)},
          {"depth_kernels", report.depth_kernels},
          {"best_depth", opt_to_json(report.best_depth)},
          {"traces", std::move(traces)},
          {"datasets", std::move(datasets)},
          {"max_jitter", report.max_jitter},
          {"aborted", report.aborted},
          {"timing_ms", report.timing_ms}};
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad report JSON: ") + e.what());
  }
  try {
    RunReport r;
    r.schema = j.at("schema").get<int>();
    if (r.schema != 1)
      throw ConfigError("unsupported report schema " + std::to_string(r.schema));
    r.config = config_from_json(j.at("config"));
    r.dataset_ids = j.at("dataset_ids").get<std::vector<std::string>>();
    r.best_kernel = opt_from_json<std::string>(j.at("best_kernel"));
    r.best_params = j.at("best_params").get<std::vector<double>>();
    r.best_params_natural =
        j.at("best_params_natural").get<std::vector<double>>();
    r.param_total = j.at("param_total").get<int>();
    r.total_nll = j.at("total_nll").get<double>();
    r.bic_value = j.at("bic").get<double>();
    r.selection_bic = opt_from_json<double>(j.at("selection_bic"));
    r.depth_kernels = j.at("depth_kernels").get<std::vector<std::string>>();
    r.best_depth = opt_from_json<int>(j.at("best_depth"));
    for (const ojson& tj : j.at("traces"))
      r.traces.push_back(trace_from_json(tj));
    for (const ojson& dj : j.at("datasets"))
      r.datasets.push_back(dataset_from_json(dj));
    r.max_jitter = j.at("max_jitter").get<double>();
    r.aborted = j.at("aborted").get<bool>();
    r.timing_ms = j.at("timing_ms").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad report JSON: ") + e.what());
  }
}

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string band_csv(const ComponentSeries& s) {
  std::string out = "t,mean,lo,hi\n";
  for (size_t i = 0; i < s.t.size(); ++i) {
    double half = 2.0 * std::sqrt(std::max(0.0, s.var[i]));
    out += format_double(s.t[i]);
    out += ',';
    out += format_double(s.mean[i]);
    out += ',';
    out += format_double(s.mean[i] - half);
    out += ',';
    out += format_double(s.mean[i] + half);
    out += '\n';
  }
  return out;
}

}  // namespace

void write_report(const RunReport& report, const std::string& dir) {
  ensure_dir(dir);
  write_text_file((fs::path(dir) / "report.json").string(),
                  report_to_json(report));
}

void export_plot_data(const RunReport& report, const std::string& dir) {
  ensure_dir(dir);
  ojson index_datasets = ojson::array();
  for (const DatasetReport& d : report.datasets) {
    std::string full_name = d.id + "_full.csv";
    write_text_file((fs::path(dir) / full_name).string(), band_csv(d.posterior));
    ojson comps = ojson::array();
    for (size_t k = 0; k < d.components.size(); ++k) {
      std::string name = d.id + "_component_" + std::to_string(k) + ".csv";
      write_text_file((fs::path(dir) / name).string(),
                      band_csv(d.components[k]));
      comps.push_back(ojson{{"file", name},
                            {"description", d.components[k].description}});
    }
    index_datasets.push_back(ojson{{"id", d.id},
                                   {"full", full_name},
                                   {"description", d.posterior.description},
                                   {"components", std::move(comps)}});
  }
  ojson index{{"schema", report.schema}, {"datasets", std::move(index_datasets)}};
  write_text_file((fs::path(dir) / "index.json").string(), index.dump(2) + "\n");
}

SynthResult synth_experiment(const SynthConfig& config) {
  auto t0 = std::chrono::steady_clock::now();

  KernelExpr expr = parse_kernel(config.kernel_text);
  const int p = param_count(expr);
  if (config.true_params_natural.size() != p)
    throw ConfigError("kernel '" + config.kernel_text + "' takes " +
                      std::to_string(p) + " parameters, got " +
                      std::to_string(config.true_params_natural.size()));
  if (config.m_max < 1) throw ConfigError("m-max must be >= 1");
  if (config.trials < 1) throw ConfigError("trials must be >= 1");
  if (config.n_points < 2) throw ConfigError("n-points must be >= 2");
  if (config.max_iterations < 1) throw ConfigError("max-iterations must be >= 1");
  if (!(config.jitter_base > 0)) throw ConfigError("jitter-base must be > 0");

  ParamVector truth;
  try {
    truth = ParamVector::from_natural(expr, config.true_params_natural);
  } catch (const NumericError& e) {
    throw ConfigError(std::string("bad parameter values: ") + e.what());
  }

  JitterPolicy policy;
  policy.base_rel = config.jitter_base;

  Eigen::MatrixXd X(config.n_points, 1);
  for (int i = 0; i < config.n_points; ++i)
    X(i, 0) = static_cast<double>(i) / static_cast<double>(config.n_points - 1);

  std::vector<Dataset> all;
  for (int i = 0; i < config.m_max; ++i) {
    Eigen::VectorXd y = sample_prior(
        expr, truth, X, derive_seed(config.seed, "series", static_cast<std::uint64_t>(i)),
        policy);
    all.push_back(Dataset::from_columns("synth" + std::to_string(i), X.col(0), y));
  }

  // One shuffled order per trial; the size-m subset is its first m entries, so
  // subsets are nested as m grows within a trial.
  std::vector<std::vector<int>> orders;
  for (int trial = 0; trial < config.trials; ++trial) {
    std::vector<int> order(static_cast<size_t>(config.m_max));
    for (int i = 0; i < config.m_max; ++i) order[static_cast<size_t>(i)] = i;
    SeededRng rng(derive_seed(config.seed, "subset", static_cast<std::uint64_t>(trial)));
    for (int i = config.m_max - 1; i > 0; --i) {
      int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(k)]);
    }
    orders.push_back(std::move(order));
  }

  SynthResult result;
  result.config = config;
  for (int m = 1; m <= config.m_max; ++m) {
    SynthRow row;
    row.m = m;
    for (int trial = 0; trial < config.trials; ++trial) {
      std::vector<Dataset> subset;
      for (int i = 0; i < m; ++i)
        subset.push_back(all[static_cast<size_t>(orders[static_cast<size_t>(trial)][static_cast<size_t>(i)])]);

      JointLayout layout;
      layout.shared = p;
      layout.M = m;
      layout.mode = ScaleMode::None;
      Objective objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad) {
        try {
          JointNllGradient g = joint_nll_grad(expr, layout, v, subset, policy);
          grad = std::move(g.grad);
          return g.nll.total;
        } catch (const NumericError&) {
          return std::numeric_limits<double>::infinity();
        }
      };

      OptimizeConfig oc;
      oc.max_iterations = config.max_iterations;
      oc.seed = derive_seed(config.seed, "fit", static_cast<std::uint64_t>(m),
                            static_cast<std::uint64_t>(trial));
      OptimizeResult fit = minimize_cg(objective, truth.values, oc);
      row.errors.push_back((fit.best - truth.values).norm() /
                           std::sqrt(static_cast<double>(p)));
    }
    std::vector<double> sorted = row.errors;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    row.median_error = n % 2 == 1 ? sorted[n / 2]
                                  : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    result.rows.push_back(std::move(row));
  }

  auto t1 = std::chrono::steady_clock::now();
  result.timing_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return result;
}

void write_synth_result(const SynthResult& result, const std::string& dir) {
  ensure_dir(dir);

  std::vector<double> truth(result.config.true_params_natural.data(),
                            result.config.true_params_natural.data() +
                                result.config.true_params_natural.size());
  ojson rows = ojson::array();
  for (const SynthRow& r : result.rows)
    rows.push_back(ojson{{"m", r.m},
                         {"errors", r.errors},
                         {"median_error", r.median_error}});
  ojson j{{"schema", 1},
          {"config", ojson{{"kernel", result.config.kernel_text},
                           {"params", truth},
                           {"m_max", result.config.m_max},
                           {"trials", result.config.trials},
                           {"n_points", result.config.n_points},
                           {"seed", result.config.seed},
                           {"jitter_base", result.config.jitter_base},
                           {"max_iterations", result.config.max_iterations}}},
          {"rows", std::move(rows)},
          {"timing_ms", result.timing_ms}};
  write_text_file((fs::path(dir) / "synth.json").string(), j.dump(2) + "\n");

  std::string csv = "m,trial,error\n";
  for (const SynthRow& r : result.rows)
    for (size_t trial = 0; trial < r.errors.size(); ++trial) {
      csv += std::to_string(r.m);
      csv += ',';
      csv += std::to_string(trial);
      csv += ',';
      csv += format_double(r.errors[trial]);
      csv += '\n';
    }
  write_text_file((fs::path(dir) / "synth.csv").string(), csv);
}

}  // namespace autostat
