#include "fairpipe/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "fairpipe/error.hpp"

namespace fairpipe {

namespace {

struct Counts {
  // [group][label][pred]
  std::size_t c[2][2][2] = {};

  std::size_t group(int a) const { return c[a][0][0] + c[a][0][1] + c[a][1][0] + c[a][1][1]; }
  std::size_t pred_pos(int a) const { return c[a][0][1] + c[a][1][1]; }
};

Counts tally(std::span<const int> preds, std::span<const int> labels, std::span<const int> groups) {
  if (preds.size() != groups.size() || (!labels.empty() && labels.size() != preds.size()))
    throw Error(ErrorCode::DimensionMismatch, "prediction, label and group vectors differ in length");
  Counts k;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int a = groups[i] != 0, y = labels.empty() ? 0 : labels[i] != 0, p = preds[i] != 0;
    ++k.c[a][y][p];
  }
  if (k.group(0) == 0 || k.group(1) == 0)
    throw Error(ErrorCode::SingleGroup, "both groups must be present");
  return k;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double eo_from_counts(const Counts& k, bool* degenerate) {
  bool degen = false;
  double gap = 0.0;
  for (int y = 0; y < 2; ++y) {
    const auto n1 = k.c[1][y][0] + k.c[1][y][1];
    const auto n0 = k.c[0][y][0] + k.c[0][y][1];
    if (n1 == 0 || n0 == 0) {
      degen = true;
      continue;
    }
    // y=1 branch is the TPR gap, y=0 the FPR gap.
    gap = std::max(gap, std::abs(ratio(k.c[1][y][1], n1) - ratio(k.c[0][y][1], n0)));
  }
  if (degenerate) *degenerate = degen;
  return gap;
}

class DpMetric final : public FairnessMetric {
 public:
  std::string name() const override { return "dp"; }
  double compute(std::span<const int> preds, std::span<const int>, std::span<const int> groups) const override {
    return demographic_parity_diff(preds, groups);
  }
};

class EoMetric final : public FairnessMetric {
 public:
  std::string name() const override { return "eo"; }
  double compute(std::span<const int> preds, std::span<const int> labels,
                 std::span<const int> groups) const override {
    return equalized_odds_diff(preds, labels, groups);
  }
};

struct Registry {
  std::mutex mu;
  std::map<std::string, std::unique_ptr<FairnessMetric>> metrics;
  Registry() {
    metrics["dp"] = std::make_unique<DpMetric>();
    metrics["eo"] = std::make_unique<EoMetric>();
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

std::string_view to_string(Metric m) { return m == Metric::DP ? "dp" : "eo"; }

Metric metric_from_string(std::string_view s) {
  std::string l(s);
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (l == "dp") return Metric::DP;
  if (l == "eo") return Metric::EO;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(s) + "' (expected dp or eo)");
}

double demographic_parity_diff(std::span<const int> preds, std::span<const int> groups) {
  const auto k = tally(preds, {}, groups);
  return std::abs(ratio(k.pred_pos(1), k.group(1)) - ratio(k.pred_pos(0), k.group(0)));
}

double equalized_odds_diff(std::span<const int> preds, std::span<const int> labels,
                           std::span<const int> groups, bool* degenerate) {
  if (labels.size() != preds.size())
    throw Error(ErrorCode::DimensionMismatch, "labels and predictions differ in length");
  return eo_from_counts(tally(preds, labels, groups), degenerate);
}

EvalResult evaluate_predictions(std::span<const int> preds, std::span<const int> labels,
                                std::span<const int> groups) {
  if (labels.size() != preds.size())
    throw Error(ErrorCode::DimensionMismatch, "labels and predictions differ in length");
  const auto k = tally(preds, labels, groups);
  EvalResult e;
  std::size_t correct = 0;
  for (int a = 0; a < 2; ++a) {
    auto& g = e.group_rates[static_cast<std::size_t>(a)];
    g.support = k.group(a);
    g.positives = k.c[a][1][0] + k.c[a][1][1];
    g.negatives = k.c[a][0][0] + k.c[a][0][1];
    g.positive_rate = ratio(k.pred_pos(a), g.support);
    g.tpr = ratio(k.c[a][1][1], g.positives);
    g.fpr = ratio(k.c[a][0][1], g.negatives);
    correct += k.c[a][1][1] + k.c[a][0][0];
  }
  e.accuracy = ratio(correct, preds.size());
  e.dp_diff = std::abs(e.group_rates[1].positive_rate - e.group_rates[0].positive_rate);
  e.eo_diff = eo_from_counts(k, &e.degenerate_stratum);
  return e;
}

std::vector<int> threshold_scores(std::span<const double> scores, double threshold) {
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

EvalResult evaluate(std::span<const double> scores, double threshold, std::span<const int> labels,
                    std::span<const int> groups) {
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidArgument, "score outside [0,1]");
  const auto preds = threshold_scores(scores, threshold);
  return evaluate_predictions(preds, labels, groups);
}

std::vector<int> to_binary(const Eigen::VectorXd& v) {
  std::vector<int> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i] != 0.0 ? 1 : 0;
  return out;
}

Json to_json(const EvalResult& e) {
  Json groups = Json::array();
  for (int a = 0; a < 2; ++a) {
    const auto& g = e.group_rates[static_cast<std::size_t>(a)];
    groups.push_back({{"group", a},
                      {"positive_rate", round6(g.positive_rate)},
                      {"tpr", round6(g.tpr)},
                      {"fpr", round6(g.fpr)},
                      {"support", g.support},
                      {"label_positives", g.positives},
                      {"label_negatives", g.negatives}});
  }
  return {{"accuracy", round6(e.accuracy)},
          {"dp_diff", round6(e.dp_diff)},
          {"eo_diff", round6(e.eo_diff)},
          {"degenerate_stratum", e.degenerate_stratum},
          {"group_rates", groups}};
}

EvalResult eval_from_json(const Json& j) {
  EvalResult e;
  e.accuracy = j.at("accuracy").get<double>();
  e.dp_diff = j.at("dp_diff").get<double>();
  e.eo_diff = j.at("eo_diff").get<double>();
  e.degenerate_stratum = j.value("degenerate_stratum", false);
  for (const auto& g : j.at("group_rates")) {
    auto& r = e.group_rates[g.at("group").get<std::size_t>()];
    r.positive_rate = g.at("positive_rate").get<double>();
    r.tpr = g.at("tpr").get<double>();
    r.fpr = g.at("fpr").get<double>();
    r.support = g.at("support").get<std::size_t>();
    r.positives = g.value("label_positives", std::size_t{0});
    r.negatives = g.value("label_negatives", std::size_t{0});
  }
  return e;
}

void register_metric(std::unique_ptr<FairnessMetric> metric) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto name = metric->name();
  r.metrics[name] = std::move(metric);
}

const FairnessMetric& find_metric(const std::string& name) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto it = r.metrics.find(name);
  if (it == r.metrics.end()) throw Error(ErrorCode::InvalidArgument, "unknown metric '" + name + "'");
  return *it->second;
}

std::vector<std::string> metric_names() {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  std::vector<std::string> out;
  for (const auto& [k, v] : r.metrics) out.push_back(k);
  return out;
}

}  // namespace fairpipe
