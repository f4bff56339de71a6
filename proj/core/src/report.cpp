#include "fairpipe/report.hpp"

#include "fairpipe/error.hpp"

#ifndef FAIRPIPE_VERSION
#define FAIRPIPE_VERSION "dev"
#endif

namespace fairpipe {

namespace {

EvalResult rounded(EvalResult e) {
  e.accuracy = round6(e.accuracy);
  e.dp_diff = round6(e.dp_diff);
  e.eo_diff = round6(e.eo_diff);
  for (auto& g : e.group_rates) {
    g.positive_rate = round6(g.positive_rate);
    g.tpr = round6(g.tpr);
    g.fpr = round6(g.fpr);
  }
  return e;
}

}  // namespace

std::string software_version() { return std::string("fairpipe ") + FAIRPIPE_VERSION; }

ComparisonReport build_report(const TestEvaluation& baseline, const TestEvaluation& fair, const TuningTrace& trace,
                              const TaskConfig& task, const Provenance& provenance, const DatasetInfo& dataset,
                              const SplitInfo& split, const FairModel& model, std::vector<std::string> warnings) {
  if (baseline.split_fingerprint != fair.split_fingerprint)
    throw Error(ErrorCode::SplitMismatch, "baseline evaluated on split " + baseline.split_fingerprint +
                                              ", fair model on " + fair.split_fingerprint);
  if (provenance.recipe_fingerprint.empty() || provenance.advisor_provider.empty() ||
      provenance.software_version.empty())
    throw Error(ErrorCode::InvalidArgument, "report provenance is incomplete");

  ComparisonReport r;
  r.dataset = dataset;
  r.split = split;
  r.task = task;
  r.baseline = rounded(baseline.result);
  r.fair = rounded(fair.result);
  r.deltas.accuracy_change = round6(r.fair.accuracy - r.baseline.accuracy);
  r.deltas.metric_change = round6(r.baseline.metric(task.metric) - r.fair.metric(task.metric));
  r.method = model.method;
  r.strength = model.strength;
  r.post_rule = model.post_rule;
  r.trace = trace;
  r.provenance = provenance;
  r.warnings = std::move(warnings);
  return r;
}

Json to_json(const ComparisonReport& r) {
  Json provenance = {{"seed", r.provenance.seed},
                     {"recipe_fingerprint", r.provenance.recipe_fingerprint},
                     {"advisor_provider", r.provenance.advisor_provider},
                     {"software_version", r.provenance.software_version},
                     {"prompt_template", r.provenance.prompt_template},
                     {"feature_names", r.provenance.feature_names},
                     {"privileged_group", r.provenance.privileged_group},
                     {"positive_label", r.provenance.positive_label},
                     {"dropped_rows", r.provenance.dropped_rows}};
  Json fair_model = {{"method", to_string(r.method)}, {"strength", round6(r.strength)}};
  fair_model["post_rule"] = r.post_rule ? Json{{"theta", round6(r.post_rule->theta)},
                                               {"favored_group", r.post_rule->favored_group}}
                                        : Json(nullptr);
  return {{"schema_version", 1},
          {"dataset",
           {{"name", r.dataset.name},
            {"fingerprint", r.dataset.fingerprint},
            {"n_rows", r.dataset.n_rows},
            {"n_cols", r.dataset.n_cols}}},
          {"split",
           {{"train_frac", round6(r.split.spec.train_frac)},
            {"val_frac", round6(r.split.spec.val_frac)},
            {"test_frac", round6(r.split.spec.test_frac)},
            {"seed", r.split.spec.seed},
            {"fingerprint", r.split.fingerprint},
            {"train_rows", r.split.train_rows},
            {"val_rows", r.split.val_rows},
            {"test_rows", r.split.test_rows}}},
          {"task", to_json(r.task)},
          {"baseline", to_json(r.baseline)},
          {"fair", to_json(r.fair)},
          {"deltas",
           {{"accuracy_change", round6(r.deltas.accuracy_change)},
            {"metric_change", round6(r.deltas.metric_change)}}},
          {"fair_model", fair_model},
          {"trace", to_json(r.trace)},
          {"provenance", provenance},
          {"warnings", r.warnings}};
}

ComparisonReport report_from_json(const Json& j) {
  ComparisonReport r;
  const auto& d = j.at("dataset");
  r.dataset = {d.at("name").get<std::string>(), d.at("fingerprint").get<std::string>(),
               d.at("n_rows").get<std::size_t>(), d.at("n_cols").get<std::size_t>()};
  const auto& s = j.at("split");
  r.split.spec.train_frac = s.at("train_frac").get<double>();
  r.split.spec.val_frac = s.at("val_frac").get<double>();
  r.split.spec.test_frac = s.at("test_frac").get<double>();
  r.split.spec.seed = s.at("seed").get<std::uint64_t>();
  r.split.fingerprint = s.at("fingerprint").get<std::string>();
  r.split.train_rows = s.at("train_rows").get<std::size_t>();
  r.split.val_rows = s.at("val_rows").get<std::size_t>();
  r.split.test_rows = s.at("test_rows").get<std::size_t>();
  r.task = task_from_json(j.at("task"));
  r.baseline = eval_from_json(j.at("baseline"));
  r.fair = eval_from_json(j.at("fair"));
  r.deltas.accuracy_change = j.at("deltas").at("accuracy_change").get<double>();
  r.deltas.metric_change = j.at("deltas").at("metric_change").get<double>();
  const auto& fm = j.at("fair_model");
  r.method = method_from_string(fm.at("method").get<std::string>());
  r.strength = fm.at("strength").get<double>();
  if (!fm.at("post_rule").is_null())
    r.post_rule = RejectRule{fm["post_rule"].at("theta").get<double>(), fm["post_rule"].at("favored_group").get<int>()};
  r.trace = trace_from_json(j.at("trace"));
  const auto& p = j.at("provenance");
  r.provenance.seed = p.at("seed").get<std::uint64_t>();
  r.provenance.recipe_fingerprint = p.at("recipe_fingerprint").get<std::string>();
  r.provenance.advisor_provider = p.at("advisor_provider").get<std::string>();
  r.provenance.software_version = p.at("software_version").get<std::string>();
  r.provenance.prompt_template = p.at("prompt_template").get<std::string>();
  r.provenance.feature_names = p.at("feature_names").get<std::vector<std::string>>();
  r.provenance.privileged_group = p.at("privileged_group").get<std::string>();
  r.provenance.positive_label = p.at("positive_label").get<std::string>();
  r.provenance.dropped_rows = p.at("dropped_rows").get<std::size_t>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

}  // namespace fairpipe
