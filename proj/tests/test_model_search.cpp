#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "autostat/errors.hpp"
#include "autostat/kernel_text.hpp"
#include "autostat/model_search.hpp"
#include "helpers.hpp"

using namespace autostat;
using testutil::vecd;

namespace {

Eigen::VectorXd linspace(int n, double lo = 0.0, double hi = 1.0) {
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i)
    t[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return t;
}

// y = sin(2 pi f t) * amp + noise
Dataset sine_data(const std::string& id, int n, double f, double amp,
                  double noise_sd, std::uint64_t seed) {
  Eigen::VectorXd t = linspace(n);
  Eigen::VectorXd y(n);
  SeededRng rng(seed);
  for (int i = 0; i < n; ++i)
    y[i] = amp * std::sin(2.0 * testutil::kPi * f * t[i]) + noise_sd * rng.normal();
  return Dataset::from_columns(id, t, y);
}

SearchConfig fast_config(std::uint64_t seed) {
  SearchConfig cfg;
  cfg.opt.seed = seed;
  cfg.opt.restarts = 2;
  cfg.opt.max_iterations = 80;
  return cfg;
}

}  // namespace

TEST_CASE("bic matches published model scores") {
  CHECK(std::abs(bic(116.36, 7, 129) - 266.75) <= 0.02);
  CHECK(std::abs(bic(120.13, 10, 120) - 288.13) <= 0.02);
  CHECK(std::abs(bic(946.89, 49, 774) - 2219.71) <= 0.05);
  CHECK(std::abs(bic(988.15, 204, 774) - 3333.21) <= 0.30);

  CHECK_THROWS_AS(bic(1.0, 3, 0), std::invalid_argument);
  CHECK_THROWS_AS(bic(1.0, -1, 10), std::invalid_argument);
}

TEST_CASE("joint likelihood adds per-series terms") {
  SeededRng rng(31);
  KernelExpr shared = parse_kernel("SE + WN");
  Eigen::VectorXd sp = ParamVector::from_natural(shared, vecd({1.2, 0.4, 0.1})).values;

  std::vector<Dataset> data;
  for (int j = 0; j < 3; ++j) data.push_back(testutil::random_dataset(rng, 8 + j));

  JointNll whole = joint_nll(shared, sp, data, ScaleMode::None, JointExtras{});
  REQUIRE(whole.per_dataset.size() == 3);
  double sum = 0.0;
  for (int j = 0; j < 3; ++j) {
    ParamVector p = ParamVector::from_unconstrained(shared, sp);
    double single = nll(shared, p, data[j]).value;
    CHECK(whole.per_dataset[j] == doctest::Approx(single).epsilon(1e-12));
    sum += single;
  }
  CHECK(whole.total == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("zero offset and unit signal scale reduce to the plain kernel") {
  SeededRng rng(32);
  KernelExpr shared = parse_kernel("SE + WN");
  Eigen::VectorXd sp = ParamVector::from_natural(shared, vecd({0.9, 0.3, 0.2})).values;
  std::vector<Dataset> data{testutil::random_dataset(rng, 9),
                            testutil::random_dataset(rng, 7)};

  JointExtras extras;
  extras.scales.log_b2 = vecd({-800.0, -800.0});  // b^2 underflows to exactly 0
  extras.scales.log_v2 = vecd({0.0, 0.0});
  JointNll scaled = joint_nll(shared, sp, data, ScaleMode::ScaleFactors, extras);
  JointNll plain = joint_nll(shared, sp, data, ScaleMode::None, JointExtras{});
  CHECK(scaled.total == doctest::Approx(plain.total).epsilon(1e-10));
}

TEST_CASE("joint parameter accounting") {
  KernelExpr se = parse_kernel("SE");
  CHECK(joint_param_total(se, ScaleMode::None, 3, 0) == 2);
  CHECK(joint_param_total(se, ScaleMode::ScaleFactors, 3, 0) == 8);
  CHECK(joint_param_total(se, ScaleMode::ScaleFactorsSm, 3, 2) == 26);
  CHECK(joint_param_total(parse_kernel("SE + PER + WN"), ScaleMode::ScaleFactors,
                          2, 0) == 10);
}

TEST_CASE("packed joint vectors round-trip") {
  JointLayout layout;
  layout.shared = 3;
  layout.M = 2;
  layout.Q = 2;
  layout.mode = ScaleMode::ScaleFactorsSm;
  CHECK(layout.scale_count() == 4);
  CHECK(layout.sm_count() == 12);
  CHECK(layout.total() == 19);

  Eigen::VectorXd sp = vecd({0.1, -0.2, 0.3});
  JointExtras extras;
  extras.scales.log_b2 = vecd({1.0, 2.0});
  extras.scales.log_v2 = vecd({-1.0, -2.0});
  extras.sm = {vecd({1, 2, 3, 4, 5, 6}), vecd({7, 8, 9, 10, 11, 12})};

  Eigen::VectorXd packed = layout.pack(sp, extras);
  REQUIRE(packed.size() == 19);
  Eigen::VectorXd sp2;
  JointExtras back;
  layout.unpack(packed, sp2, back);
  CHECK((sp2 - sp).norm() == 0.0);
  CHECK((back.scales.log_b2 - extras.scales.log_b2).norm() == 0.0);
  CHECK((back.scales.log_v2 - extras.scales.log_v2).norm() == 0.0);
  REQUIRE(back.sm.size() == 2);
  CHECK((back.sm[1] - extras.sm[1]).norm() == 0.0);
}

TEST_CASE("joint gradient matches finite differences in every mode") {
  SeededRng rng(77);
  KernelExpr shared = parse_kernel("SE + WN");
  std::vector<Dataset> data{testutil::random_dataset(rng, 6),
                            testutil::random_dataset(rng, 7)};

  for (ScaleMode mode :
       {ScaleMode::None, ScaleMode::ScaleFactors, ScaleMode::ScaleFactorsSm}) {
    JointLayout layout;
    layout.shared = param_count(shared);
    layout.M = 2;
    layout.Q = mode == ScaleMode::ScaleFactorsSm ? 1 : 0;
    layout.mode = mode;

    Eigen::VectorXd x(layout.total());
    for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 0.5);

    JointNllGradient g = joint_nll_grad(shared, layout, x, data);
    REQUIRE(g.grad.size() == x.size());

    Eigen::VectorXd fd(x.size());
    for (int i = 0; i < x.size(); ++i) {
      double h = 1e-6 * std::max(1.0, std::abs(x[i]));
      Eigen::VectorXd hi = x, lo = x;
      hi[i] += h;
      lo[i] -= h;
      Eigen::VectorXd sp_hi, sp_lo;
      JointExtras ex_hi, ex_lo;
      layout.unpack(hi, sp_hi, ex_hi);
      layout.unpack(lo, sp_lo, ex_lo);
      double fh = joint_nll(shared, sp_hi, data, mode, ex_hi).total;
      double fl = joint_nll(shared, sp_lo, data, mode, ex_lo).total;
      fd[i] = (fh - fl) / (2.0 * h);
    }
    double denom = std::max(1.0, g.grad.norm());
    INFO("mode ", static_cast<int>(mode));
    CHECK((g.grad - fd).norm() / denom <= 2e-4);
  }
}

TEST_CASE("effective kernels spell out the per-series model") {
  KernelExpr shared = parse_kernel("SE");
  Eigen::VectorXd sp = ParamVector::from_natural(shared, vecd({2.0, 0.7})).values;

  JointExtras extras;
  extras.scales.log_b2 = vecd({std::log(0.25)});
  extras.scales.log_v2 = vecd({std::log(4.0)});
  extras.sm = {ParamVector::from_natural(KernelExpr::spectral_mixture(1),
                                         vecd({0.5, 1.5, 0.1}))
                   .values};

  EffectiveKernel full = effective_kernel(shared, sp, ScaleMode::ScaleFactorsSm,
                                          extras, 0);
  CHECK(describe(full.expr) == "CONST + CONST × SE + SM1");
  Eigen::VectorXd nat = full.params.natural();
  REQUIRE(nat.size() == 7);
  CHECK(nat[0] == doctest::Approx(0.25));
  CHECK(nat[1] == doctest::Approx(4.0));
  CHECK(nat[2] == doctest::Approx(2.0));
  CHECK(nat[3] == doctest::Approx(0.7));
  CHECK(nat[4] == doctest::Approx(0.5));

  EffectiveKernel bare = effective_kernel_shared_only(
      shared, sp, ScaleMode::ScaleFactorsSm, extras, 0);
  CHECK(describe(bare.expr) == "CONST + CONST × SE");
  CHECK(bare.params.size() == 4);

  EffectiveKernel none = effective_kernel(shared, sp, ScaleMode::None,
                                          JointExtras{}, 0);
  CHECK(describe(none.expr) == "SE");
}

TEST_CASE("searching pure noise keeps the noise kernel at depth zero") {
  SeededRng rng(3);
  Eigen::VectorXd t = linspace(25);
  Eigen::VectorXd y(25);
  for (int i = 0; i < 25; ++i) y[i] = rng.normal();
  Dataset data = Dataset::from_columns("noise", t, y);

  SearchResult r = ckl_search(data, GrammarRules::standard(), 0, fast_config(1));
  CHECK(r.best.text == "WN");
  CHECK(r.best.param_total == 1);
  REQUIRE(r.trace.depths.size() == 1);
  CHECK(r.trace.depths[0].candidates.size() == 1);
  CHECK(r.best.bic ==
        doctest::Approx(bic(r.best.total_nll, 1, 25)).epsilon(1e-12));
  CHECK_FALSE(r.trace.aborted);
}

TEST_CASE("a clean sinusoid pulls a periodic term into the kernel") {
  Dataset data = sine_data("sine", 48, 4.0, 1.0, 0.05, 12);
  SearchResult r = ckl_search(data, GrammarRules::standard(), 1, fast_config(1));
  REQUIRE(r.trace.depths.size() == 2);
  std::string canon = describe(canonicalize(r.best.expr));
  INFO("selected ", canon);
  CHECK(canon.find("PER") != std::string::npos);
  CHECK(r.best.bic < r.trace.depths[0].best.bic);

  // Depth winners enter the trace with consistent bookkeeping.
  for (const DepthEntry& d : r.trace.depths) {
    CHECK(d.best.bic ==
          doctest::Approx(bic(d.best.total_nll, d.best.param_total, 48))
              .epsilon(1e-12));
    double best_sel = d.best.selection_bic;
    for (const CandidateSummary& c : d.candidates)
      if (!c.failed) CHECK(best_sel <= c.selection_bic + 1e-9);
  }
}

TEST_CASE("searches are reproducible") {
  Dataset data = sine_data("sine", 36, 1.5, 1.0, 0.1, 5);
  SearchResult a = ckl_search(data, GrammarRules::standard(), 1, fast_config(9));
  SearchResult b = ckl_search(data, GrammarRules::standard(), 1, fast_config(9));
  CHECK(a.best.text == b.best.text);
  CHECK(a.best.bic == b.best.bic);
  CHECK((a.best.shared_params - b.best.shared_params).norm() == 0.0);
  REQUIRE(a.trace.depths.size() == b.trace.depths.size());
  for (size_t d = 0; d < a.trace.depths.size(); ++d) {
    const auto& ca = a.trace.depths[d].candidates;
    const auto& cb = b.trace.depths[d].candidates;
    REQUIRE(ca.size() == cb.size());
    for (size_t i = 0; i < ca.size(); ++i) {
      CHECK(ca[i].text == cb[i].text);
      CHECK(ca[i].bic == cb[i].bic);
    }
  }
}

TEST_CASE("a frozen-scale shared search over one series equals the plain search") {
  Dataset data = sine_data("s", 30, 1.0, 0.8, 0.1, 21);
  SearchConfig cfg = fast_config(4);
  SearchResult single = ckl_search(data, GrammarRules::standard(), 1, cfg);

  SearchConfig frozen = cfg;
  frozen.freeze_scales = true;
  SearchResult shared = rkl_search({data}, GrammarRules::standard(), 1, frozen);

  CHECK(single.best.text == shared.best.text);
  CHECK(single.best.bic == doctest::Approx(shared.best.bic).epsilon(1e-12));
  CHECK(single.best.param_total == shared.best.param_total);
}

TEST_CASE("the shared search scales one kernel across related series") {
  KernelExpr truth = parse_kernel("SE + WN");
  ParamVector tp = ParamVector::from_natural(truth, vecd({1.0, 0.2, 0.02}));
  Eigen::VectorXd t = linspace(40);
  std::vector<Dataset> data;
  int j = 0;
  for (double scale : {1.0, 3.0, 0.5}) {
    Eigen::VectorXd f = sample_prior(truth, tp, t, derive_seed(100, "series", j));
    data.push_back(Dataset::from_columns("s" + std::to_string(j), t, scale * f));
    ++j;
  }

  SearchResult r = rkl_search(data, GrammarRules::standard(), 1, fast_config(6));
  std::string canon = describe(canonicalize(r.best.expr));
  INFO("selected ", canon);
  CHECK(canon.find("SE") != std::string::npos);
  CHECK(r.best.param_total ==
        param_count(r.best.expr) + 2 * static_cast<int>(data.size()));
  CHECK(r.best.mode == ScaleMode::ScaleFactors);
  REQUIRE(r.best.extras.scales.size() == 3);
  REQUIRE(r.best.per_dataset_nll.size() == 3);
  CHECK(r.best.bic ==
        doctest::Approx(bic(r.best.total_nll, r.best.param_total, 120))
            .epsilon(1e-12));
}

TEST_CASE("the remainder search keeps one fitted model per depth") {
  KernelExpr truth = parse_kernel("SE + WN");
  ParamVector tp = ParamVector::from_natural(truth, vecd({1.0, 0.25, 0.02}));
  Eigen::VectorXd t = linspace(30);
  std::vector<Dataset> data;
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd f = sample_prior(truth, tp, t, derive_seed(7, "series", j));
    data.push_back(Dataset::from_columns("s" + std::to_string(j), t, f));
  }

  SearchConfig cfg = fast_config(13);
  cfg.sm_components = 2;
  SrklResult r = srkl_search(data, GrammarRules::standard(), 1, cfg);
  REQUIRE(r.per_depth.size() == 2);
  CHECK(r.best_index >= 0);
  CHECK(r.best_index < 2);

  long n_total = 60;
  for (const ModelCandidate& m : r.per_depth) {
    CHECK(m.mode == ScaleMode::ScaleFactorsSm);
    int pc = param_count(m.expr);
    CHECK(m.param_total == pc + 2 * 2 + 3 * 2 * 2);
    CHECK(m.shared_param_total == pc + 2 * 2);
    CHECK(m.bic ==
          doctest::Approx(bic(m.total_nll, m.param_total, n_total)).epsilon(1e-12));
    CHECK(m.selection_bic ==
          doctest::Approx(bic(m.shared_nll, m.shared_param_total, n_total))
              .epsilon(1e-12));
    REQUIRE(m.extras.sm.size() == 2);
    CHECK(m.extras.sm[0].size() == 6);
  }
  for (const ModelCandidate& m : r.per_depth)
    CHECK(r.per_depth[static_cast<size_t>(r.best_index)].bic <= m.bic + 1e-9);

  CHECK_THROWS_AS([&] {
    SearchConfig bad = cfg;
    bad.sm_components = 0;
    srkl_search(data, GrammarRules::standard(), 1, bad);
  }(), std::invalid_argument);
}

TEST_CASE("overfit diagnostic flags shared gains paired with full losses") {
  using V = std::vector<double>;
  CHECK(overfit_diagnostic(V{100, 90, 80, 70}, V{95, 85, 88, 92}) == 2);
  CHECK(overfit_diagnostic(V{100, 90, 80}, V{95, 85, 80}) == std::nullopt);
  CHECK(overfit_diagnostic(V{100, 100, 90}, V{95, 96, 94}) == std::nullopt);
  CHECK(overfit_diagnostic(V{50, 40, 45}, V{50, 41, 46}) == std::nullopt);
  CHECK(overfit_diagnostic(V{50, 40, 39}, V{50, 39, 41}) == 2);
  CHECK(overfit_diagnostic(V{10}, V{10}) == std::nullopt);
  CHECK_THROWS_AS(overfit_diagnostic(V{1, 2}, V{1}), std::invalid_argument);
}

TEST_CASE("hopeless data aborts the search cleanly") {
  Eigen::VectorXd t = linspace(6);
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) y[i] = (i % 2 ? 1.0 : -1.0) * 1e200;
  Dataset data = Dataset::from_columns("huge", t, y);
  CHECK_THROWS_AS(ckl_search(data, GrammarRules::standard(), 0, fast_config(1)),
                  NumericError);
}

TEST_CASE("a depth whose candidates all fail ends the search with a flag") {
  // One production that only offers a rank-one constant kernel, and a ridge
  // policy too weak to repair it: depth 0 (white noise) fits fine, depth 1
  // has nowhere to go.
  SeededRng rng(41);
  Dataset data = testutil::random_dataset(rng, 10);
  GrammarRules g;
  g.productions = {GrammarRules::Production::ReplaceConst};

  SearchConfig cfg = fast_config(2);
  cfg.jitter.base_rel = 1e-30;
  cfg.jitter.max_escalations = 0;

  SearchResult r = ckl_search(data, g, 1, cfg);
  CHECK(r.trace.aborted);
  CHECK(r.best.text == "WN");
  REQUIRE(r.trace.depths.size() == 1);  // the failed depth is not recorded
}
