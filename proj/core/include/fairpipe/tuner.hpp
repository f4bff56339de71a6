#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fairpipe/error.hpp"
#include "fairpipe/fairness.hpp"
#include "fairpipe/json_util.hpp"

namespace fairpipe {

struct FairnessTarget {
  Metric metric = Metric::DP;
  double threshold = 0.05;
  double tolerance = 0.01;

  void validate() const;
  bool in_band(double value) const;
};

enum class TuneStatus { Converged, BudgetExhausted, Infeasible };
std::string_view to_string(TuneStatus s);
TuneStatus tune_status_from_string(std::string_view s);

/// Phase-1 grid: geometric {0, 0.01, ..., 1000} or linear over [0, 0.5].
enum class StrengthGrid { Geometric, Linear };

std::vector<double> grid_points(StrengthGrid grid);

struct TuneEvaluation {
  double strength = 0.0;
  double val_metric = 0.0;
  double val_accuracy = 0.0;
};

struct TuningTrace {
  std::vector<TuneEvaluation> evaluations;
  std::size_t selected = 0;
  std::size_t budget_used = 0;
  std::size_t budget = 30;
  TuneStatus status = TuneStatus::BudgetExhausted;
  FairnessTarget target;

  const TuneEvaluation& selected_evaluation() const { return evaluations.at(selected); }
};

Json to_json(const TuningTrace& t);
TuningTrace trace_from_json(const Json& j);

struct TuneOptions {
  std::size_t budget = 30;
  StrengthGrid grid = StrengthGrid::Geometric;
  /// Concurrent phase-1 evaluations; 1 runs them sequentially.
  std::size_t max_parallel = 1;
  /// (evaluations done, budget)
  std::function<void(std::size_t, std::size_t)> on_progress;
  /// Called after each evaluation is appended to the trace, in trace order.
  std::function<void(const TuneEvaluation&)> on_evaluation;
};

struct Probe {
  double metric = 0.0;
  double accuracy = 0.0;
  /// Signed group gap whose absolute value is `metric`, when the metric has
  /// one (DP). A sign change between two strengths brackets a zero of the metric.
  std::optional<double> signed_gap;
};

/// Signed DP gap P(yhat=1 | a=1) - P(yhat=1 | a=0); empty for EO.
std::optional<double> signed_gap(const EvalResult& e, Metric m);

/// Grid bracketing then bisection on strength. When no grid pair brackets tau,
/// probes around the lowest metric seen until one does. `probe` receives the logical
/// evaluation index and the strength; phase-1 calls may run concurrently.
/// Exceptions from the probe are rethrown as BuilderFailure.
TuningTrace search(const std::function<Probe(std::size_t, double)>& probe, const FairnessTarget& target,
                   const TuneOptions& options = {});

template <class Candidate>
struct TuneResult {
  Candidate model;
  TuningTrace trace;
};

/// Builder maps a strength to a candidate model and its validation metrics.
template <class Candidate>
using Builder = std::function<std::pair<Candidate, EvalResult>(double)>;

template <class Candidate>
TuneResult<Candidate> tune(const Builder<Candidate>& builder, const FairnessTarget& target,
                           const TuneOptions& options = {}) {
  std::mutex mu;
  std::map<std::size_t, Candidate> built;
  auto trace = search(
      [&](std::size_t index, double strength) {
        auto [candidate, eval] = builder(strength);
        Probe p{eval.metric(target.metric), eval.accuracy, signed_gap(eval, target.metric)};
        std::lock_guard lock(mu);
        built.insert_or_assign(index, std::move(candidate));
        return p;
      },
      target, options);
  return {std::move(built.at(trace.selected)), std::move(trace)};
}

struct SweepRow {
  double threshold = 0.0;
  double achieved = 0.0;  // test-split metric of the selected model
  double accuracy = 0.0;  // test-split accuracy
  double deviation = 0.0;  // achieved - threshold
  TuneStatus status = TuneStatus::BudgetExhausted;
  TuningTrace trace;
};

/// One tune() per threshold; builder results are memoized by strength so the
/// shared phase-1 grid is trained once. `test_eval` scores the selected model
/// on the held-out split. Thresholds must be strictly increasing.
template <class Candidate>
std::vector<SweepRow> sweep(const Builder<Candidate>& builder, Metric metric, const std::vector<double>& thresholds,
                            double tolerance, const std::function<EvalResult(const Candidate&)>& test_eval,
                            TuneOptions options = {}) {
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (!(thresholds[i] > thresholds[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "sweep thresholds must be strictly increasing");
  std::mutex mu;
  std::map<double, std::pair<Candidate, EvalResult>> cache;
  Builder<Candidate> memo = [&](double s) {
    {
      std::lock_guard lock(mu);
      if (auto it = cache.find(s); it != cache.end()) return it->second;
    }
    auto result = builder(s);
    std::lock_guard lock(mu);
    return cache.emplace(s, std::move(result)).first->second;
  };
  std::vector<SweepRow> rows;
  for (double tau : thresholds) {
    FairnessTarget target{metric, tau, tolerance};
    target.validate();
    auto result = tune<Candidate>(memo, target, options);
    const auto test = test_eval(result.model);
    SweepRow row;
    row.threshold = tau;
    row.achieved = test.metric(metric);
    row.accuracy = test.accuracy;
    row.deviation = row.achieved - tau;
    row.status = result.trace.status;
    row.trace = std::move(result.trace);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// CSV with columns threshold,achieved_metric,accuracy,deviation,status.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Parses "start:stop:step" (inclusive stop, tolerant to float drift).
std::vector<double> parse_threshold_range(const std::string& spec);

}  // namespace fairpipe
