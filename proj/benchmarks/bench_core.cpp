#include <benchmark/benchmark.h>

#include <random>
#include <set>
#include <string>
#include <vector>

#include "elate/data.hpp"
#include "elate/dsl.hpp"
#include "elate/evaluators.hpp"
#include "elate/model.hpp"

namespace {

using namespace elate;

std::vector<double> normals(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

TimeFrame frame_of(std::size_t n) {
  std::mt19937_64 rng(1);
  std::vector<std::int64_t> ts(n);
  std::vector<std::string> labels(n);
  std::vector<std::string> groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = static_cast<std::int64_t>(i) * 86400;
    labels[i] = std::to_string(ts[i]);
    groups[i] = i % 3 == 0 ? "a" : "b";
  }
  std::vector<Column> cols{Column::make_numeric(normals(rng, n)), Column::make_numeric(normals(rng, n)),
                           Column::make_categorical(groups), Column::make_numeric(normals(rng, n))};
  return TimeFrame(std::move(ts), std::move(labels), {"x", "z", "g", "y"}, std::move(cols), "y", 1, {"g"});
}

void BM_DslExecute(benchmark::State& state) {
  const TimeFrame frame = frame_of(static_cast<std::size_t>(state.range(0)));
  const auto prog = dsl::compile(
      "let m = rolling_mean(lag(x, 1), 7, by=g)\n"
      "feature \"f\": (m - rolling_min(z, 14)) / (rolling_std(x, 30) + 1) + cumsum(diff(z, 1))\n",
      frame.feature_schema());
  for (auto _ : state) benchmark::DoNotOptimize(dsl::execute(prog, frame));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DslExecute)->Arg(1000)->Arg(100000);

model::Matrix design(std::size_t rows, std::size_t cols, std::vector<double>& y) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  model::Matrix x(rows, cols);
  y.assign(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) x(i, j) = d(rng);
    y[i] = x(i, 0) * x(i, 1 % cols) + (x(i, cols - 1) > 0 ? 1.0 : 0.0) + 0.1 * d(rng);
  }
  return x;
}

void BM_GbtFit(benchmark::State& state) {
  std::vector<double> y;
  const auto x = design(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), y);
  for (auto _ : state) benchmark::DoNotOptimize(model::fit_gbt(x, y));
}
BENCHMARK(BM_GbtFit)->Args({1000, 10})->Args({5000, 50})->Unit(benchmark::kMillisecond);

void BM_TreeShap(benchmark::State& state) {
  std::vector<double> y;
  const auto x = design(2000, static_cast<std::size_t>(state.range(0)), y);
  const auto m = model::fit_gbt(x, y);
  const auto fg = x.slice_rows(1900, 2000);
  for (auto _ : state) benchmark::DoNotOptimize(model::tree_shap(m, fg, x));
}
BENCHMARK(BM_TreeShap)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_MutualInfo(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = normals(rng, n);
  auto b = normals(rng, n);
  for (std::size_t i = 0; i < n; ++i) b[i] = 0.5 * a[i] + b[i];
  for (auto _ : state) benchmark::DoNotOptimize(eval::mi_score(a, b));
}
BENCHMARK(BM_MutualInfo)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Granger(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = normals(rng, n);
  const auto y = normals(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(eval::granger_test(x, y, 4));
}
BENCHMARK(BM_Granger)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
