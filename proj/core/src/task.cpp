#include "fairpipe/task.hpp"

#include <cmath>

#include "fairpipe/error.hpp"

namespace fairpipe {

void TaskConfig::validate() const {
  if (sensitive.empty()) throw Error(ErrorCode::InvalidArgument, "sensitive attribute is required");
  if (target.empty()) throw Error(ErrorCode::InvalidArgument, "target attribute is required");
  if (sensitive == target) throw Error(ErrorCode::SameColumn, "sensitive and target are both '" + target + "'");
  fairness_target().validate();
  split.validate();
  if (budget < 5) throw Error(ErrorCode::InvalidArgument, "budget must be at least 5");
}

void TaskConfig::validate_columns(const DistinctMap& distincts) const {
  AttributeOverrides o{sensitive, target};
  AttributeRecommendation none;
  resolve(o, none, distincts);
}

Json to_json(const TaskConfig& c) {
  Json j = {{"sensitive", c.sensitive},
            {"target", c.target},
            {"metric", to_string(c.metric)},
            {"threshold", round6(c.threshold)},
            {"tolerance", round6(c.tolerance)},
            {"mitigation", to_string(c.mitigation)},
            {"seed", c.seed},
            {"split",
             {{"train", round6(c.split.train_frac)},
              {"val", round6(c.split.val_frac)},
              {"test", round6(c.split.test_frac)}}},
            {"budget", c.budget},
            {"include_sensitive", c.include_sensitive}};
  j["positive_label"] = c.positive_label ? Json(*c.positive_label) : Json(nullptr);
  j["privileged_group"] = c.privileged_group ? Json(*c.privileged_group) : Json(nullptr);
  return j;
}

TaskConfig task_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "task config must be a JSON object");
  TaskConfig c;
  try {
    c.sensitive = j.at("sensitive").get<std::string>();
    c.target = j.at("target").get<std::string>();
    if (j.contains("metric")) c.metric = metric_from_string(j["metric"].get<std::string>());
    if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
    if (j.contains("tolerance")) c.tolerance = j["tolerance"].get<double>();
    if (j.contains("mitigation")) c.mitigation = method_from_string(j["mitigation"].get<std::string>());
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("split") && !j["split"].is_null()) {
      const auto& s = j["split"];
      c.split.train_frac = s.value("train", c.split.train_frac);
      c.split.val_frac = s.value("val", c.split.val_frac);
      c.split.test_frac = s.value("test", c.split.test_frac);
    }
    c.split.seed = c.seed;
    if (j.contains("budget")) c.budget = j["budget"].get<std::size_t>();
    if (j.contains("positive_label") && !j["positive_label"].is_null())
      c.positive_label = j["positive_label"].get<std::string>();
    if (j.contains("privileged_group") && !j["privileged_group"].is_null())
      c.privileged_group = j["privileged_group"].get<std::string>();
    if (j.contains("include_sensitive")) c.include_sensitive = j["include_sensitive"].get<bool>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed task config: ") + e.what());
  }
  return c;
}

}  // namespace fairpipe
