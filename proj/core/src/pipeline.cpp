#include "fairpipe/pipeline.hpp"

#include <sstream>

#include "fairpipe/error.hpp"

namespace fairpipe {

DatasetInfo dataset_info(const Table& t) {
  return {t.name(), fingerprint(to_csv(t)), t.n_rows(), t.n_cols()};
}

PreparedData prepare(const Table& t, const TaskConfig& task) {
  task.validate();
  PreparedData data;
  data.dataset = dataset_info(t);

  SplitSpec spec = task.split;
  spec.seed = task.seed;
  auto parts = split(t, spec);
  data.split.spec = spec;
  data.split.train_rows = parts.train.n_rows();
  data.split.val_rows = parts.val.n_rows();
  data.split.test_rows = parts.test.n_rows();
  std::ostringstream key;
  key.precision(17);
  key << data.dataset.fingerprint << '|' << spec.train_frac << '|' << spec.val_frac << '|' << spec.test_frac << '|'
      << spec.seed;
  data.split.fingerprint = fingerprint(key.str());

  RecipeOptions ro;
  ro.positive_label = task.positive_label;
  ro.privileged_group = task.privileged_group;
  ro.include_sensitive = task.include_sensitive;
  data.recipe = fit_recipe(parts.train, task.sensitive, task.target, ro);
  data.train = apply_recipe(parts.train, data.recipe);
  data.val = apply_recipe(parts.val, data.recipe);
  data.test = apply_recipe(parts.test, data.recipe);
  data.dropped_rows = (parts.train.n_rows() - static_cast<std::size_t>(data.train.rows())) +
                      (parts.val.n_rows() - static_cast<std::size_t>(data.val.rows())) +
                      (parts.test.n_rows() - static_cast<std::size_t>(data.test.rows()));
  return data;
}

TrainSpec default_train_spec(const TaskConfig& task) {
  TrainSpec spec;
  spec.seed = task.seed;
  return spec;
}

namespace {

EvalResult evaluate_model(const FairModel& m, const DesignMatrix& dm) {
  const auto groups = to_binary(dm.groups);
  const auto labels = to_binary(dm.labels);
  return evaluate_predictions(predict(m, dm.features, groups), labels, groups);
}

FairModel as_plain(const LinearModel& m) {
  FairModel f;
  f.predictor = m;
  f.method = Method::Penalized;
  f.strength = 0.0;
  return f;
}

}  // namespace

BaselineResult run_baseline(const PreparedData& data, const TrainSpec& spec, const EpochCallback& on_epoch) {
  BaselineResult r;
  r.model = train(data.train, spec, {}, on_epoch);
  r.model.trained_on = data.recipe.fingerprint();
  const auto plain = as_plain(r.model);
  r.validation = evaluate_model(plain, data.val);
  r.test = {evaluate_model(plain, data.test), data.split.fingerprint};
  return r;
}

StrengthGrid grid_for(Method m) { return m == Method::RejectOption ? StrengthGrid::Linear : StrengthGrid::Geometric; }

Builder<FairModel> make_builder(const PreparedData& data, const TaskConfig& task, const TrainSpec& spec,
                                const LinearModel& plain, const AdversarialSchedule& schedule) {
  const std::string recipe_fp = data.recipe.fingerprint();
  return [&data, task, spec, plain, schedule, recipe_fp](double strength) {
    MitigationConfig cfg{task.mitigation, task.metric, strength};
    auto build = build_fair_model(data.train, data.val, cfg, spec, &plain, schedule);
    build.model.predictor.trained_on = recipe_fp;
    return std::make_pair(std::move(build.model), build.validation);
  };
}

TestEvaluation evaluate_on_test(const PreparedData& data, const FairModel& m) {
  return {evaluate_model(m, data.test), data.split.fingerprint};
}

FairResult run_fair(const PreparedData& data, const TaskConfig& task, const TrainSpec& spec,
                    const LinearModel& plain, const FairRunOptions& options) {
  TuneOptions to;
  to.budget = task.budget;
  to.grid = grid_for(task.mitigation);
  to.max_parallel = options.max_parallel;
  to.on_progress = options.on_progress;
  to.on_evaluation = options.on_evaluation;
  auto result = tune<FairModel>(make_builder(data, task, spec, plain, options.schedule), task.fairness_target(), to);

  FairResult r;
  r.model = std::move(result.model);
  r.trace = std::move(result.trace);
  r.validation = evaluate_model(r.model, data.val);
  r.test = evaluate_on_test(data, r.model);
  if (r.trace.status != TuneStatus::Converged)
    r.warnings.push_back(std::string("tuning ended with status ") + std::string(to_string(r.trace.status)));
  if (r.validation.degenerate_stratum)
    r.warnings.push_back("validation split has a group lacking one label value; EO branch scored 0");
  return r;
}

ComparisonReport assemble_report(const PreparedData& data, const TaskConfig& task, const BaselineResult& baseline,
                                 const FairResult& fair, const std::string& advisor_provider,
                                 std::vector<std::string> warnings) {
  Provenance p;
  p.seed = task.seed;
  p.recipe_fingerprint = data.recipe.fingerprint();
  p.advisor_provider = advisor_provider;
  p.software_version = software_version();
  p.prompt_template = kPromptTemplateVersion;
  p.feature_names = data.recipe.feature_names();
  p.privileged_group = data.recipe.privileged_group;
  p.positive_label = data.recipe.positive_label;
  p.dropped_rows = data.dropped_rows;
  for (const auto& w : fair.warnings) warnings.push_back(w);
  return build_report(baseline.test, fair.test, fair.trace, task, p, data.dataset, data.split, fair.model,
                      std::move(warnings));
}

std::vector<SweepRow> run_sweep(const PreparedData& data, const TaskConfig& task, const TrainSpec& spec,
                                const LinearModel& plain, const std::vector<double>& thresholds,
                                const FairRunOptions& options) {
  TuneOptions to;
  to.budget = task.budget;
  to.grid = grid_for(task.mitigation);
  to.max_parallel = options.max_parallel;
  to.on_progress = options.on_progress;
  to.on_evaluation = options.on_evaluation;
  std::function<EvalResult(const FairModel&)> test_eval = [&](const FairModel& m) {
    return evaluate_on_test(data, m).result;
  };
  return sweep<FairModel>(make_builder(data, task, spec, plain, options.schedule), task.metric, thresholds,
                          task.tolerance, test_eval, to);
}

HeadlessResult run_headless(const Table& t, TaskConfig task, const HeadlessOptions& options) {
  const auto distincts = distinct_map(t);
  std::string provider = "user";
  std::vector<std::string> warnings;
  if (options.overrides.sensitive) task.sensitive = *options.overrides.sensitive;
  if (options.overrides.target) task.target = *options.overrides.target;
  if (task.sensitive.empty() || task.target.empty()) {
    const auto analysis = analyze(t);
    AttributeRecommendation rec;
    if (options.provider_profile && options.providers) {
      auto [transport, retries] = options.providers->make(*options.provider_profile);
      rec = llm_recommend(analysis, distincts, *transport, retries);
    } else {
      rec = heuristic_recommend(analysis, distincts);
    }
    AttributeOverrides o;
    if (!task.sensitive.empty()) o.sensitive = task.sensitive;
    if (!task.target.empty()) o.target = task.target;
    const auto resolved = resolve(o, rec, distincts);
    task.sensitive = resolved.sensitive;
    task.target = resolved.target;
    provider = rec.provider;
    warnings = rec.warnings;
  }
  task.validate();
  task.validate_columns(distincts);

  const auto data = prepare(t, task);
  const auto spec = default_train_spec(task);
  const auto baseline = run_baseline(data, spec);
  const auto fair = run_fair(data, task, spec, baseline.model, options.fair);
  return {assemble_report(data, task, baseline, fair, provider, std::move(warnings)), task};
}

}  // namespace fairpipe
