#include <benchmark/benchmark.h>

#include <random>

#include "fairpipe/fairness.hpp"
#include "fairpipe/mitigation.hpp"
#include "fairpipe/pipeline.hpp"
#include "fairpipe/synthetic.hpp"
#include "fairpipe/tuner.hpp"

using namespace fairpipe;

namespace {

const Table& fixture_table() {
  static const Table t = make_biased_fixture();
  return t;
}

const PreparedData& fixture_data() {
  static const PreparedData data = [] {
    TaskConfig task;
    task.sensitive = "sex";
    task.target = "outcome";
    return prepare(fixture_table(), task);
  }();
  return data;
}

void BM_IngestCsv(benchmark::State& state) {
  const auto csv = to_csv(fixture_table());
  for (auto _ : state) benchmark::DoNotOptimize(ingest_csv(csv, "fixture"));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * csv.size()));
}
BENCHMARK(BM_IngestCsv)->Unit(benchmark::kMillisecond);

void BM_Analyze(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(analyze(fixture_table()));
}
BENCHMARK(BM_Analyze)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::vector<int> p(n), y(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = static_cast<int>(rng() % 2);
    y[i] = static_cast<int>(rng() % 2);
    a[i] = static_cast<int>(rng() % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_predictions(p, y, a));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Metrics)->Arg(1 << 10)->Arg(1 << 16);

void BM_TrainEpoch(benchmark::State& state) {
  const auto& dm = fixture_data().train;
  Objective obj(dm.features, 1e-4);
  obj.add_term(std::make_shared<WeightedBce>(dm.labels, std::nullopt));
  if (state.range(0)) obj.add_term(std::make_shared<GroupGapPenalty>(dm.labels, dm.groups, Metric::DP, 10.0));
  GradientDescent gd(obj, Eigen::VectorXd::Zero(obj.dim()), 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(gd.step());
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1);

void BM_TrainBaseline(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(train(fixture_data().train, {}));
}
BENCHMARK(BM_TrainBaseline)->Unit(benchmark::kMillisecond);

void BM_TuneResponder(benchmark::State& state) {
  Builder<double> b = [](double s) {
    EvalResult e;
    e.dp_diff = 0.2 / (1 + s);
    e.accuracy = 0.9;
    return std::pair{s, e};
  };
  const FairnessTarget target{Metric::DP, 0.05, 0.01};
  for (auto _ : state) benchmark::DoNotOptimize(tune<double>(b, target));
}
BENCHMARK(BM_TuneResponder);

void BM_TuneRejectOption(benchmark::State& state) {
  TaskConfig task;
  task.sensitive = "sex";
  task.target = "outcome";
  task.mitigation = Method::RejectOption;
  const auto spec = default_train_spec(task);
  const auto plain = train(fixture_data().train, spec);
  for (auto _ : state) benchmark::DoNotOptimize(run_fair(fixture_data(), task, spec, plain));
}
BENCHMARK(BM_TuneRejectOption)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
