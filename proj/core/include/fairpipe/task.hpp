#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fairpipe/advisor.hpp"
#include "fairpipe/fairness.hpp"
#include "fairpipe/json_util.hpp"
#include "fairpipe/mitigation.hpp"
#include "fairpipe/tabular.hpp"
#include "fairpipe/tuner.hpp"

namespace fairpipe {

/// Everything a modeling run needs besides the data.
struct TaskConfig {
  std::string sensitive;
  std::string target;
  Metric metric = Metric::DP;
  double threshold = 0.05;
  double tolerance = 0.01;
  Method mitigation = Method::Penalized;
  std::uint64_t seed = 42;
  SplitSpec split;
  std::size_t budget = 30;
  std::optional<std::string> positive_label;
  std::optional<std::string> privileged_group;
  bool include_sensitive = false;

  /// Value checks that need no data. Throws InvalidArgument.
  void validate() const;
  /// Column checks against the dataset. Throws UnknownColumn, SameColumn, NonBinaryTarget.
  void validate_columns(const DistinctMap& distincts) const;

  FairnessTarget fairness_target() const { return {metric, threshold, tolerance}; }
};

Json to_json(const TaskConfig& c);
/// Missing optional fields take their defaults. Throws InvalidArgument on bad values.
TaskConfig task_from_json(const Json& j);

}  // namespace fairpipe
