#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fairpipe/advisor.hpp"
#include "fairpipe/analysis.hpp"
#include "fairpipe/mitigation.hpp"
#include "fairpipe/model.hpp"
#include "fairpipe/preprocess.hpp"
#include "fairpipe/report.hpp"
#include "fairpipe/task.hpp"
#include "fairpipe/tuner.hpp"

namespace fairpipe {

/// Split, recipe and design matrices for one task on one table.
struct PreparedData {
  DatasetInfo dataset;
  SplitInfo split;
  Recipe recipe;
  DesignMatrix train;
  DesignMatrix val;
  DesignMatrix test;
  std::size_t dropped_rows = 0;
};

DatasetInfo dataset_info(const Table& t);

PreparedData prepare(const Table& t, const TaskConfig& task);

TrainSpec default_train_spec(const TaskConfig& task);

struct BaselineResult {
  LinearModel model;
  EvalResult validation;
  TestEvaluation test;
};

BaselineResult run_baseline(const PreparedData& data, const TrainSpec& spec, const EpochCallback& on_epoch = {});

struct FairRunOptions {
  std::size_t max_parallel = 1;
  std::function<void(std::size_t, std::size_t)> on_progress;
  std::function<void(const TuneEvaluation&)> on_evaluation;
  AdversarialSchedule schedule;
};

struct FairResult {
  FairModel model;
  TuningTrace trace;
  EvalResult validation;
  TestEvaluation test;
  std::vector<std::string> warnings;
};

StrengthGrid grid_for(Method m);

/// strength -> (FairModel, validation EvalResult) for the task's method.
Builder<FairModel> make_builder(const PreparedData& data, const TaskConfig& task, const TrainSpec& spec,
                                const LinearModel& plain, const AdversarialSchedule& schedule = {});

TestEvaluation evaluate_on_test(const PreparedData& data, const FairModel& m);

FairResult run_fair(const PreparedData& data, const TaskConfig& task, const TrainSpec& spec,
                    const LinearModel& plain, const FairRunOptions& options = {});

ComparisonReport assemble_report(const PreparedData& data, const TaskConfig& task, const BaselineResult& baseline,
                                 const FairResult& fair, const std::string& advisor_provider,
                                 std::vector<std::string> warnings = {});

std::vector<SweepRow> run_sweep(const PreparedData& data, const TaskConfig& task, const TrainSpec& spec,
                                const LinearModel& plain, const std::vector<double>& thresholds,
                                const FairRunOptions& options = {});

/// Headless end-to-end run: recommend (unless both attributes are given),
/// resolve, prepare, baseline, tune, report.
struct HeadlessOptions {
  AttributeOverrides overrides;
  std::optional<std::string> provider_profile;  // from `providers`; heuristic when empty
  const ProviderRegistry* providers = nullptr;
  FairRunOptions fair;
};

struct HeadlessResult {
  ComparisonReport report;
  TaskConfig task;
};

/// Fills task.sensitive / task.target via the advisor when they are empty.
HeadlessResult run_headless(const Table& t, TaskConfig task, const HeadlessOptions& options);

}  // namespace fairpipe
