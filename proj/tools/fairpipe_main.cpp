#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fairpipe/error.hpp"
#include "fairpipe/pipeline.hpp"
#include "fairpipe/service.hpp"
#include "fairpipe/synthetic.hpp"

using namespace fairpipe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct RunFlags {
  std::string data;
  std::string sensitive;
  std::string target;
  std::string metric = "dp";
  double threshold = 0.05;
  double tolerance = 0.01;
  std::string mitigation = "penalized";
  std::uint64_t seed = 42;
  std::size_t budget = 30;
  std::string positive_label;
  std::string privileged_group;
  bool include_sensitive = false;
  std::string provider;
  std::string providers_file;
  std::size_t jobs = 1;
  std::string out;
  bool quiet = false;
};

void add_task_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("data", f.data, "CSV dataset")->required()->check(CLI::ExistingFile);
  cmd->add_option("--sensitive", f.sensitive, "Sensitive attribute (recommended when omitted)");
  cmd->add_option("--target", f.target, "Binary target column (recommended when omitted)");
  cmd->add_option("--metric", f.metric, "Fairness metric")->check(CLI::IsMember({"dp", "eo"}, CLI::ignore_case));
  cmd->add_option("--tolerance", f.tolerance, "Tolerance band epsilon");
  cmd->add_option("--mitigation", f.mitigation, "Mitigation method")
      ->check(CLI::IsMember({"reweigh", "penalized", "adversarial", "reject"}, CLI::ignore_case));
  cmd->add_option("--seed", f.seed, "Split and training seed");
  cmd->add_option("--budget", f.budget, "Tuner evaluation budget");
  cmd->add_option("--positive-label", f.positive_label, "Target value treated as the positive class");
  cmd->add_option("--privileged-group", f.privileged_group, "Sensitive value treated as privileged");
  cmd->add_flag("--include-sensitive", f.include_sensitive, "Keep the sensitive column as a feature");
  cmd->add_option("--provider", f.provider, "Advisor profile name from --providers (heuristic when omitted)");
  cmd->add_option("--providers", f.providers_file, "Provider profiles JSON")->check(CLI::ExistingFile);
  cmd->add_option("-j,--jobs", f.jobs, "Concurrent grid evaluations")->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", f.quiet, "No progress output");
}

TaskConfig task_from_flags(const RunFlags& f) {
  TaskConfig task;
  task.sensitive = f.sensitive;
  task.target = f.target;
  task.metric = metric_from_string(f.metric);
  task.threshold = f.threshold;
  task.tolerance = f.tolerance;
  task.mitigation = method_from_string(f.mitigation);
  task.seed = f.seed;
  task.split.seed = f.seed;
  task.budget = f.budget;
  if (!f.positive_label.empty()) task.positive_label = f.positive_label;
  if (!f.privileged_group.empty()) task.privileged_group = f.privileged_group;
  task.include_sensitive = f.include_sensitive;
  return task;
}

Table load(const std::string& path) {
  auto text = read_text_file(path);
  return ingest_csv(text, std::filesystem::path(path).stem().string());
}

FairRunOptions run_options(const RunFlags& f) {
  FairRunOptions o;
  o.max_parallel = f.jobs;
  if (!f.quiet)
    o.on_evaluation = [](const TuneEvaluation& e) {
      std::cerr << "  strength " << e.strength << "  val_metric " << e.val_metric << "  val_accuracy "
                << e.val_accuracy << '\n';
    };
  return o;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  write_text_atomic(path, text);
}

int cmd_run(const RunFlags& f) {
  auto task = task_from_flags(f);
  task.fairness_target().validate();
  const auto table = load(f.data);
  HeadlessOptions opts;
  ProviderRegistry providers;
  if (!f.provider.empty()) {
    if (f.providers_file.empty()) throw Error(ErrorCode::InvalidArgument, "--provider needs --providers");
    providers = ProviderRegistry::from_file(f.providers_file);
    opts.provider_profile = f.provider;
    opts.providers = &providers;
  }
  opts.fair = run_options(f);
  const auto result = run_headless(table, task, opts);
  write_output(f.out, dump_stable(to_json(result.report)));
  const auto& r = result.report;
  if (!f.quiet) {
    std::cerr << "baseline: accuracy " << r.baseline.accuracy << "  " << to_string(task.metric) << ' '
              << r.baseline.metric(r.task.metric) << '\n'
              << "fair:     accuracy " << r.fair.accuracy << "  " << to_string(task.metric) << ' '
              << r.fair.metric(r.task.metric) << "  (" << to_string(r.method) << ", strength " << r.strength
              << ")\n"
              << "status:   " << to_string(r.trace.status) << '\n';
  }
  return r.trace.status == TuneStatus::Converged ? kExitOk : kExitNotConverged;
}

int cmd_sweep(const RunFlags& f, const std::string& thresholds) {
  const auto taus = parse_threshold_range(thresholds);
  auto task = task_from_flags(f);
  const auto table = load(f.data);
  if (task.sensitive.empty() || task.target.empty()) {
    const auto distincts = distinct_map(table);
    const auto rec = heuristic_recommend(analyze(table), distincts);
    AttributeOverrides o;
    if (!task.sensitive.empty()) o.sensitive = task.sensitive;
    if (!task.target.empty()) o.target = task.target;
    const auto resolved = resolve(o, rec, distincts);
    task.sensitive = resolved.sensitive;
    task.target = resolved.target;
  }
  if (!taus.empty()) task.threshold = taus.front();
  task.validate();
  task.validate_columns(distinct_map(table));
  const auto data = prepare(table, task);
  const auto spec = default_train_spec(task);
  const auto baseline = run_baseline(data, spec);
  auto opts = run_options(f);
  const auto rows = run_sweep(data, task, spec, baseline.model, taus, opts);
  write_output(f.out, sweep_csv(rows));
  const bool all = std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) {
    return r.status == TuneStatus::Converged;
  });
  return all ? kExitOk : kExitNotConverged;
}

Service* g_service = nullptr;

int cmd_serve(ServiceConfig cfg) {
  Service service(std::move(cfg));
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  std::cerr << "fairpipe serving on http://" << service.config().host << ':' << service.config().port
            << "  workspace " << service.config().workspace << '\n';
  const bool ok = service.listen();
  g_service = nullptr;
  return ok ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-constrained tabular modeling pipeline"};
  app.set_version_flag("--version", software_version());
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Recommend, train, tune and write a comparison report");
  add_task_flags(run, run_flags);
  run->add_option("--threshold", run_flags.threshold, "Fairness threshold tau");
  run->add_option("-o,--out", run_flags.out, "Report path (stdout when omitted)");

  RunFlags sweep_flags;
  std::string thresholds = "0.02:0.09:0.01";
  auto* sweep = app.add_subcommand("sweep", "Tune across a threshold range and write a CSV");
  add_task_flags(sweep, sweep_flags);
  sweep->add_option("--thresholds", thresholds, "start:stop:step (inclusive)");
  sweep->add_option("-o,--out", sweep_flags.out, "CSV path (stdout when omitted)");

  std::string analyze_data, analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Profile a dataset and print the analysis JSON");
  analyze_cmd->add_option("data", analyze_data, "CSV dataset")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("-o,--out", analyze_out, "Output path");

  std::string rec_data, rec_provider, rec_providers;
  auto* recommend = app.add_subcommand("recommend", "Recommend sensitive and target attributes");
  recommend->add_option("data", rec_data, "CSV dataset")->required()->check(CLI::ExistingFile);
  recommend->add_option("--provider", rec_provider, "Advisor profile name (heuristic when omitted)");
  recommend->add_option("--providers", rec_providers, "Provider profiles JSON")->check(CLI::ExistingFile);

  BiasedFixtureOptions synth_opts;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write the biased synthetic fixture as CSV");
  synth->add_option("--rows", synth_opts.rows, "Row count");
  synth->add_option("--seed", synth_opts.seed, "Generator seed");
  synth->add_option("--label-bias", synth_opts.label_bias, "Logit shift for the privileged group");
  synth->add_option("-o,--out", synth_out, "Output path");

  ServiceConfig serve_cfg = ServiceConfig::from_env();
  std::string serve_workspace, serve_static, serve_providers;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", serve_cfg.host, "Bind address");
  serve->add_option("--port", serve_cfg.port, "Port");
  serve->add_option("--workspace", serve_workspace, "Session directory root");
  serve->add_option("--static", serve_static, "Web UI assets served under /");
  serve->add_option("--providers", serve_providers, "Provider profiles JSON")->check(CLI::ExistingFile);
  serve->add_option("--workers", serve_cfg.workers, "Concurrent training jobs (0: min(cores, 4))");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*sweep) return cmd_sweep(sweep_flags, thresholds);
    if (*analyze_cmd) {
      write_output(analyze_out, dump_stable(to_json(analyze(load(analyze_data)))));
      return kExitOk;
    }
    if (*recommend) {
      const auto table = load(rec_data);
      const auto report = analyze(table);
      const auto distincts = distinct_map(table);
      AttributeRecommendation rec;
      if (rec_provider.empty()) {
        rec = heuristic_recommend(report, distincts);
      } else {
        if (rec_providers.empty()) throw Error(ErrorCode::InvalidArgument, "--provider needs --providers");
        auto [transport, retries] = ProviderRegistry::from_file(rec_providers).make(rec_provider);
        rec = llm_recommend(report, distincts, *transport, retries);
      }
      std::cout << dump_stable(to_json(rec));
      return kExitOk;
    }
    if (*synth) {
      write_output(synth_out, to_csv(make_biased_fixture(synth_opts)));
      return kExitOk;
    }
    if (*serve) {
      if (!serve_workspace.empty()) serve_cfg.workspace = serve_workspace;
      if (!serve_static.empty()) serve_cfg.static_dir = serve_static;
      if (!serve_providers.empty()) serve_cfg.providers_file = serve_providers;
      return cmd_serve(std::move(serve_cfg));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
