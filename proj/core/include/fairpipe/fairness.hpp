#pragma once

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fairpipe/json_util.hpp"

namespace fairpipe {

enum class Metric { DP, EO };

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view s);  // "dp" / "eo", case-insensitive

/// Per-group confusion summary. Rates for an empty stratum are 0.
struct GroupRates {
  double positive_rate = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  std::size_t support = 0;
  std::size_t positives = 0;  // label 1 rows
  std::size_t negatives = 0;  // label 0 rows
};

struct EvalResult {
  double accuracy = 0.0;
  double dp_diff = 0.0;
  double eo_diff = 0.0;
  std::array<GroupRates, 2> group_rates{};  // index = group a
  /// Set when a group lacks one label value (that EO branch contributes 0).
  bool degenerate_stratum = false;

  double metric(Metric m) const { return m == Metric::DP ? dp_diff : eo_diff; }
};

Json to_json(const EvalResult& e);
EvalResult eval_from_json(const Json& j);

/// |P(yhat=1 | a=1) - P(yhat=1 | a=0)|. Throws SingleGroup.
double demographic_parity_diff(std::span<const int> preds, std::span<const int> groups);

/// max(|TPR1 - TPR0|, |FPR1 - FPR0|). A group with no rows of some label
/// contributes 0 to that branch and sets `degenerate` when non-null.
double equalized_odds_diff(std::span<const int> preds, std::span<const int> labels,
                           std::span<const int> groups, bool* degenerate = nullptr);

/// Everything computed from hard predictions.
EvalResult evaluate_predictions(std::span<const int> preds, std::span<const int> labels,
                                std::span<const int> groups);

/// preds = score >= threshold.
EvalResult evaluate(std::span<const double> scores, double threshold, std::span<const int> labels,
                    std::span<const int> groups);

std::vector<int> threshold_scores(std::span<const double> scores, double threshold = 0.5);
std::vector<int> to_binary(const Eigen::VectorXd& v);

/// Pluggable group-fairness metric. DP and EO ship; more can be registered.
class FairnessMetric {
 public:
  virtual ~FairnessMetric() = default;
  virtual std::string name() const = 0;
  virtual double compute(std::span<const int> preds, std::span<const int> labels,
                         std::span<const int> groups) const = 0;
};

void register_metric(std::unique_ptr<FairnessMetric> metric);
/// Throws InvalidArgument for an unknown name.
const FairnessMetric& find_metric(const std::string& name);
std::vector<std::string> metric_names();

}  // namespace fairpipe
