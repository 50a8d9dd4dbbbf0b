#include <benchmark/benchmark.h>

#include <random>

#include "qml/eikonal.hpp"
#include "qml/flow.hpp"
#include "qml/oscillatory.hpp"
#include "qml/quasimode.hpp"

using namespace qml;

namespace {

PhasePoint point(int n, double v) { return PhasePoint(Eigen::VectorXd::Constant(n, v), Eigen::VectorXd::Constant(n, -v)); }

void BM_SymbolEval(benchmark::State& st) {
  const auto p = parse_symbol("exp(x1 * xi2) * cos(x2 - xi1) + sqrt(2 + sin(x1 * x2)) / (3 + xi1^2)", 2);
  const PhasePoint z = point(2, 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(p(z));
}
BENCHMARK(BM_SymbolEval);

void BM_Jet(benchmark::State& st) {
  const auto p = parse_symbol("exp(x1 * xi2) * cos(x2 - xi1) + sqrt(2 + sin(x1 * x2)) / (3 + xi1^2)", 2);
  const PhasePoint z = point(2, 0.3);
  const int order = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(eval_jet(p, z, order));
}
BENCHMARK(BM_Jet)->DenseRange(1, 3);

void BM_Flow(benchmark::State& st) {
  const auto p = parse_symbol("xi1^2 + xi2^2 + 0.1 * sin(x1) * cos(x2) - 1", 2);
  for (auto _ : st) benchmark::DoNotOptimize(integrate_flow(p, point(2, 0.4), {0.0, 5.0}).max_drift);
}
BENCHMARK(BM_Flow);

void BM_FoldStencil(benchmark::State& st) {
  const ReducedSymbol a(builtin_symbol("model-fold", 2), 0.0);
  const std::vector<double> w{0.0, 0.0, 0.0};
  for (auto _ : st) benchmark::DoNotOptimize(fold_stencil_table(a, w).phi.size());
}
BENCHMARK(BM_FoldStencil);

void BM_SemiclassicalFT(benchmark::State& st) {
  GridAxis ax;
  ax.size = static_cast<int>(st.range(0));
  ax.spacing = 1.0 / ax.size;
  ax.origin = -0.5;
  GridFn f({ax});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  for (auto& v : f.values) v = cplx(N(rng), N(rng));
  for (auto _ : st) benchmark::DoNotOptimize(semiclassical_ft(f, 0.01, Direction::Forward).values.data());
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_SemiclassicalFT)->RangeMultiplier(4)->Range(1 << 8, 1 << 16)->Complexity(benchmark::oNLogN);

void BM_CorrelationApply(benchmark::State& st) {
  auto op = benchmark_operator(BenchmarkPhase::Cubic, static_cast<double>(st.range(0)), 0.75);
  std::vector<cplx> v(op->cols(), cplx(1.0, 0.0)), out;
  for (auto _ : st) {
    op->apply(v, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.counters["rows"] = static_cast<double>(op->rows());
}
BENCHMARK(BM_CorrelationApply)->RangeMultiplier(4)->Range(1 << 6, 1 << 12);

void BM_DenseApply(benchmark::State& st) {
  DenseOperator op = benchmark_dense(BenchmarkPhase::Cubic, 16.0, 0.75, static_cast<int>(st.range(0)));
  std::vector<cplx> v(op.cols(), cplx(1.0, 0.0)), out;
  for (auto _ : st) {
    op.apply(v, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_DenseApply)->RangeMultiplier(2)->Range(512, 2048);

void BM_OperatorNorm(benchmark::State& st) {
  for (auto _ : st) {
    auto op = benchmark_operator(BenchmarkPhase::Cubic, static_cast<double>(st.range(0)), 0.75);
    benchmark::DoNotOptimize(operator_norm(*op).norm);
  }
}
BENCHMARK(BM_OperatorNorm)->RangeMultiplier(4)->Range(1 << 6, 1 << 10)->Unit(benchmark::kMillisecond);

void BM_Quasimode(benchmark::State& st) {
  const double h = std::ldexp(1.0, -static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(build_model_quasimode(2, h).u_l2);
}
BENCHMARK(BM_Quasimode)->DenseRange(5, 9, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
