#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fairpipe/fairness.hpp"
#include "fairpipe/json_util.hpp"
#include "fairpipe/mitigation.hpp"
#include "fairpipe/task.hpp"
#include "fairpipe/tuner.hpp"

namespace fairpipe {

/// A test-split evaluation tagged with the split it was computed on.
struct TestEvaluation {
  EvalResult result;
  std::string split_fingerprint;
};

struct DatasetInfo {
  std::string name;
  std::string fingerprint;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
};

struct SplitInfo {
  SplitSpec spec;
  std::string fingerprint;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::size_t test_rows = 0;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string recipe_fingerprint;
  std::string advisor_provider;
  std::string software_version;
  std::string prompt_template;
  std::vector<std::string> feature_names;
  std::string privileged_group;
  std::string positive_label;
  std::size_t dropped_rows = 0;  // masked target
};

struct Deltas {
  double accuracy_change = 0.0;  // fair - baseline
  double metric_change = 0.0;    // baseline - fair; positive = bias reduced
};

struct ComparisonReport {
  DatasetInfo dataset;
  SplitInfo split;
  TaskConfig task;
  EvalResult baseline;
  EvalResult fair;
  Deltas deltas;
  Method method = Method::Penalized;
  double strength = 0.0;
  std::optional<RejectRule> post_rule;
  TuningTrace trace;
  Provenance provenance;
  std::vector<std::string> warnings;
};

/// Assembles and validates the report. Throws SplitMismatch when the two
/// evaluations come from different splits, InvalidArgument on incomplete
/// provenance.
ComparisonReport build_report(const TestEvaluation& baseline, const TestEvaluation& fair, const TuningTrace& trace,
                              const TaskConfig& task, const Provenance& provenance, const DatasetInfo& dataset,
                              const SplitInfo& split, const FairModel& model,
                              std::vector<std::string> warnings = {});

Json to_json(const ComparisonReport& r);
ComparisonReport report_from_json(const Json& j);

std::string software_version();

}  // namespace fairpipe
