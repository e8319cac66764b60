#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include "autostat/gp.hpp"
#include "autostat/kernel_rewrite.hpp"
#include "autostat/kernel_text.hpp"
#include "autostat/rng.hpp"

using namespace autostat;

namespace {

Dataset make_data(int n) {
  SeededRng rng(17);
  Eigen::VectorXd t(n), y(n);
  for (int i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i) / n + 0.1 * rng.uniform() / n;
    y[i] = rng.normal();
  }
  return Dataset::from_columns("bench", t, y);
}

ParamVector mid_params(const KernelExpr& e) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(param_count(e), -0.5);
  return ParamVector::from_unconstrained(e, v);
}

void BM_Gram(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  KernelExpr e = parse_kernel("SE × PER + WN");
  ParamVector p = mid_params(e);
  Dataset d = make_data(n);
  for (auto _ : state)
    benchmark::DoNotOptimize(build_covariance(e, p, d.X, d.X));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Gram)->Arg(32)->Arg(64)->Arg(128)->Complexity();

void BM_NllGrad(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  KernelExpr e = parse_kernel("SE + PER + WN");
  ParamVector p = mid_params(e);
  Dataset d = make_data(n);
  for (auto _ : state) benchmark::DoNotOptimize(nll_grad(e, p, d));
  state.SetComplexityN(n);
}
BENCHMARK(BM_NllGrad)->Arg(32)->Arg(64)->Arg(128)->Complexity();

void BM_Expand(benchmark::State& state) {
  KernelExpr e = parse_kernel("WN + SE × LIN + PER");
  GrammarRules g = GrammarRules::standard();
  for (auto _ : state) benchmark::DoNotOptimize(expand(e, g));
}
BENCHMARK(BM_Expand);

void BM_Canonicalize(benchmark::State& state) {
  KernelExpr e = parse_kernel("(WN + SE) × (PER + LIN) + CW(SE + WN, CONST)");
  for (auto _ : state) benchmark::DoNotOptimize(canonicalize(e));
}
BENCHMARK(BM_Canonicalize);

}  // namespace

BENCHMARK_MAIN();
