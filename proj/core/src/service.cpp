#include "fairpipe/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "fairpipe/analysis.hpp"
#include "fairpipe/error.hpp"
#include "fairpipe/pipeline.hpp"
#include "fairpipe/report.hpp"
#include "fairpipe/tabular.hpp"
#include "fairpipe/task.hpp"

namespace fairpipe {

namespace fs = std::filesystem;

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::Created: return "Created";
    case SessionState::DataLoaded: return "DataLoaded";
    case SessionState::Analyzed: return "Analyzed";
    case SessionState::Configured: return "Configured";
    case SessionState::BaselineDone: return "BaselineDone";
    case SessionState::FairDone: return "FairDone";
  }
  return "Unknown";
}

std::string_view to_string(JobKind k) { return k == JobKind::TrainBaseline ? "TrainBaseline" : "TrainFair"; }

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Queued: return "Queued";
    case JobStatus::Running: return "Running";
    case JobStatus::Done: return "Done";
    case JobStatus::Failed: return "Failed";
  }
  return "Unknown";
}

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

JobStatus job_status_from_string(const std::string& s) {
  if (s == "Queued") return JobStatus::Queued;
  if (s == "Running") return JobStatus::Running;
  if (s == "Done") return JobStatus::Done;
  return JobStatus::Failed;
}

// Artifacts that must all exist for each state, in state order.
const std::array<std::vector<std::string>, 6> kStateFiles = {{
    {"session.json"},
    {"dataset.csv"},
    {"analysis.json"},
    {"config.json"},
    {"recipe.json", "baseline.json"},
    {"fair.json", "trace.json", "report.json"},
}};

// Side artifacts owned by a state; removed together with it.
const std::array<std::vector<std::string>, 6> kSideFiles = {{
    {},
    {},
    {"recommendation.json"},
    {},
    {},
    {},
}};

std::string random_token() {
  std::random_device rd;
  std::uniform_int_distribution<std::uint64_t> dist;
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 2; ++i) {
    const std::uint64_t v = (static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ dist(rd);
    out.width(16);
    out.fill('0');
    out << v;
  }
  return out.str();
}

bool valid_token(const std::string& s) {
  return s.size() == 32 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

ApiResponse json_response(int status, const Json& body) { return {status, dump_stable(body)}; }

ApiResponse error_response(int status, std::string_view name, const std::string& message) {
  return json_response(status, {{"error", name}, {"message", message}});
}

// 400 ingest, 422 validation, 500 otherwise.
ApiResponse error_response(int status, const Error& e) {
  std::string message = e.what();
  const std::string prefix = std::string(e.name()) + ": ";
  if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
  return error_response(status, e.name(), message);
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/'))
    if (!part.empty()) out.push_back(part);
  return out;
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (auto v = env("FAIRPIPE_WORKSPACE")) c.workspace = *v;
  if (auto v = env("FAIRPIPE_HOST")) c.host = *v;
  if (auto v = env("FAIRPIPE_PORT")) c.port = std::stoi(*v);
  if (auto v = env("FAIRPIPE_MAX_UPLOAD")) c.max_upload_bytes = std::stoull(*v);
  if (auto v = env("FAIRPIPE_WORKERS")) c.workers = std::stoull(*v);
  if (auto v = env("FAIRPIPE_STATIC_DIR")) c.static_dir = fs::path(*v);
  if (auto v = env("FAIRPIPE_PROVIDERS")) c.providers_file = fs::path(*v);
  return c;
}

struct Job {
  std::string id;
  std::string session;
  JobKind kind = JobKind::TrainBaseline;
  JobStatus status = JobStatus::Queued;
  double progress = 0.0;
  std::string error;
  std::uint64_t generation = 0;
  std::size_t budget = 0;
  std::vector<TuneEvaluation> evaluations;
};

Json to_json(const Job& j) {
  Json evals = Json::array();
  for (const auto& e : j.evaluations)
    evals.push_back({{"strength", round6(e.strength)},
                     {"val_metric", round6(e.val_metric)},
                     {"val_accuracy", round6(e.val_accuracy)}});
  Json out = {{"job_id", j.id},
              {"session_id", j.session},
              {"kind", to_string(j.kind)},
              {"status", to_string(j.status)},
              {"progress", round6(j.progress)},
              {"evaluations", evals}};
  out["error"] = j.error.empty() ? Json(nullptr) : Json(j.error);
  if (j.kind == JobKind::TrainFair) out["budget"] = j.budget;
  return out;
}

struct Session {
  std::string id;
  fs::path dir;
  std::mutex mu;
  std::uint64_t generation = 0;  // bumped by every step that invalidates artifacts
};

struct Service::Impl {
  ServiceConfig config;
  ProviderRegistry providers;

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;

  std::mutex jobs_mu;
  std::condition_variable jobs_cv;
  std::condition_variable idle_cv;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::deque<std::shared_ptr<Job>> queue;
  std::size_t running = 0;
  bool stopping = false;
  std::vector<std::thread> workers;

  httplib::Server server;
  std::thread server_thread;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {
    fs::create_directories(config.workspace);
    if (config.providers_file) providers = ProviderRegistry::from_file(*config.providers_file);
    rehydrate();
    std::size_t n = config.workers;
    if (n == 0) n = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), 4);
    for (std::size_t i = 0; i < n; ++i) workers.emplace_back([this] { worker_loop(); });
  }

  ~Impl() {
    server.stop();
    if (server_thread.joinable()) server_thread.join();
    {
      std::lock_guard lock(jobs_mu);
      stopping = true;
    }
    jobs_cv.notify_all();
    for (auto& w : workers) w.join();
  }

  // ------------------------------------------------------------ persistence

  static SessionState state_of(const fs::path& dir) {
    int level = -1;
    for (std::size_t i = 0; i < kStateFiles.size(); ++i) {
      const bool all = std::all_of(kStateFiles[i].begin(), kStateFiles[i].end(),
                                   [&](const std::string& f) { return fs::exists(dir / f); });
      if (!all) break;
      level = static_cast<int>(i);
    }
    return static_cast<SessionState>(std::max(level, 0));
  }

  static std::vector<std::string> artifacts_of(const fs::path& dir) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i < kStateFiles.size(); ++i) {
      for (const auto& f : kStateFiles[i])
        if (fs::exists(dir / f)) out.push_back(f);
      for (const auto& f : kSideFiles[i])
        if (fs::exists(dir / f)) out.push_back(f);
    }
    return out;
  }

  // Removes every artifact of states after `keep`; the caller holds the session lock.
  static void invalidate_after(const fs::path& dir, SessionState keep) {
    for (std::size_t i = kStateFiles.size(); i-- > static_cast<std::size_t>(keep) + 1;) {
      for (const auto& f : kStateFiles[i]) fs::remove(dir / f);
      for (const auto& f : kSideFiles[i]) fs::remove(dir / f);
    }
  }

  void persist(const Job& job) {
    const auto dir = config.workspace / job.session / "jobs";
    fs::create_directories(dir);
    write_text_atomic(dir / (job.id + ".json"), dump_stable(to_json(job)));
  }

  void rehydrate() {
    for (const auto& entry : fs::directory_iterator(config.workspace)) {
      if (!entry.is_directory()) continue;
      const auto id = entry.path().filename().string();
      if (!valid_token(id) || !fs::exists(entry.path() / "session.json")) continue;
      auto s = std::make_shared<Session>();
      s->id = id;
      s->dir = entry.path();
      sessions.emplace(id, s);
      const auto jobs_dir = entry.path() / "jobs";
      if (!fs::exists(jobs_dir)) continue;
      for (const auto& jf : fs::directory_iterator(jobs_dir)) {
        if (jf.path().extension() != ".json") continue;
        try {
          const auto j = read_json_file(jf.path());
          auto job = std::make_shared<Job>();
          job->id = j.at("job_id").get<std::string>();
          job->session = id;
          job->kind = j.at("kind").get<std::string>() == "TrainFair" ? JobKind::TrainFair : JobKind::TrainBaseline;
          job->status = job_status_from_string(j.at("status").get<std::string>());
          job->progress = j.at("progress").get<double>();
          if (!j.at("error").is_null()) job->error = j["error"].get<std::string>();
          job->budget = j.value("budget", std::size_t{0});
          for (const auto& e : j.at("evaluations"))
            job->evaluations.push_back({e.at("strength").get<double>(), e.at("val_metric").get<double>(),
                                        e.at("val_accuracy").get<double>()});
          if (job->status == JobStatus::Queued || job->status == JobStatus::Running) {
            job->status = JobStatus::Failed;
            job->error = "interrupted by a service restart";
            persist(*job);
          }
          jobs.emplace(job->id, job);
        } catch (const std::exception&) {
          // Unreadable job records are ignored; session state comes from artifacts alone.
        }
      }
    }
  }

  std::shared_ptr<Session> find_session(const std::string& id) {
    std::lock_guard lock(sessions_mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  Json session_json(const Session& s) {
    Json jobs_json = Json::array();
    {
      std::lock_guard lock(jobs_mu);
      std::vector<std::shared_ptr<Job>> mine;
      for (const auto& [id, job] : jobs)
        if (job->session == s.id) mine.push_back(job);
      for (const auto& job : mine) jobs_json.push_back(to_json(*job));
    }
    return {{"session_id", s.id},
            {"state", to_string(state_of(s.dir))},
            {"artifacts", artifacts_of(s.dir)},
            {"jobs", jobs_json}};
  }

  // ------------------------------------------------------------ job queue

  std::string enqueue(Session& s, JobKind kind, std::size_t budget) {
    auto job = std::make_shared<Job>();
    job->id = random_token();
    job->session = s.id;
    job->kind = kind;
    job->generation = s.generation;
    job->budget = budget;
    persist(*job);
    {
      std::lock_guard lock(jobs_mu);
      jobs.emplace(job->id, job);
      queue.push_back(job);
    }
    jobs_cv.notify_one();
    return job->id;
  }

  void worker_loop() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(jobs_mu);
        jobs_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = queue.front();
        queue.pop_front();
        ++running;
      }
      run_job(*job);
      {
        std::lock_guard lock(jobs_mu);
        --running;
      }
      idle_cv.notify_all();
    }
  }

  void update(Job& job, const std::function<void(Job&)>& change) {
    Job snapshot;
    {
      std::lock_guard lock(jobs_mu);
      change(job);
      snapshot = job;
    }
    persist(snapshot);
  }

  void fail(Job& job, const std::string& message) {
    update(job, [&](Job& j) {
      j.status = JobStatus::Failed;
      j.error = message.empty() ? "unknown failure" : message;
    });
  }

  void run_job(Job& job) {
    auto session = find_session(job.session);
    if (!session) return fail(job, "session no longer exists");

    // Snapshot the inputs under the session lock, then train without it.
    std::string dataset_text, dataset_name;
    Json config_json, baseline_json;
    {
      std::lock_guard lock(session->mu);
      if (session->generation != job.generation) return fail(job, "superseded by a later step");
      try {
        dataset_text = read_text_file(session->dir / "dataset.csv");
        dataset_name = read_json_file(session->dir / "session.json").value("dataset_name", std::string("dataset"));
        config_json = read_json_file(session->dir / "config.json");
        if (job.kind == JobKind::TrainFair) baseline_json = read_json_file(session->dir / "baseline.json");
      } catch (const std::exception& e) {
        return fail(job, e.what());
      }
    }
    update(job, [](Job& j) { j.status = JobStatus::Running; });

    std::map<std::string, std::string> outputs;
    try {
      const auto table = ingest_csv(dataset_text, dataset_name);
      const auto task = task_from_json(config_json);
      const auto data = prepare(table, task);
      const auto spec = default_train_spec(task);
      if (job.kind == JobKind::TrainBaseline) {
        const auto epochs = static_cast<double>(spec.epochs);
        auto baseline = run_baseline(data, spec, [&](int epoch, double) {
          if ((epoch + 1) % 50 != 0) return;
          std::lock_guard lock(jobs_mu);
          job.progress = std::min(1.0, (epoch + 1) / epochs);
        });
        Json out = {{"model", to_json(baseline.model)},
                    {"validation", to_json(baseline.validation)},
                    {"test", to_json(baseline.test.result)},
                    {"split_fingerprint", baseline.test.split_fingerprint}};
        outputs["recipe.json"] = dump_stable(to_json(data.recipe));
        outputs["baseline.json"] = dump_stable(out);
      } else {
        BaselineResult baseline;
        baseline.model = model_from_json(baseline_json.at("model"));
        baseline.validation = eval_from_json(baseline_json.at("validation"));
        baseline.test = {eval_from_json(baseline_json.at("test")),
                         baseline_json.at("split_fingerprint").get<std::string>()};
        if (baseline.model.trained_on != data.recipe.fingerprint())
          throw Error(ErrorCode::SchemaMismatch, "baseline model was trained on a different recipe");
        FairRunOptions fo;
        fo.schedule = config.schedule;
        fo.on_evaluation = [&](const TuneEvaluation& e) {
          std::lock_guard lock(jobs_mu);
          job.evaluations.push_back(e);
          job.progress = std::min(1.0, static_cast<double>(job.evaluations.size()) /
                                           static_cast<double>(std::max<std::size_t>(task.budget, 1)));
        };
        const auto fair = run_fair(data, task, spec, baseline.model, fo);
        const std::string provider = config_json.value("advisor_provider", std::string("user"));
        std::vector<std::string> warnings;
        if (config_json.contains("advisor_warnings"))
          warnings = config_json["advisor_warnings"].get<std::vector<std::string>>();
        const auto report = assemble_report(data, task, baseline, fair, provider, std::move(warnings));
        Json fair_out = {{"model", to_json(fair.model)},
                         {"validation", to_json(fair.validation)},
                         {"test", to_json(fair.test.result)},
                         {"split_fingerprint", fair.test.split_fingerprint},
                         {"warnings", fair.warnings}};
        outputs["fair.json"] = dump_stable(fair_out);
        outputs["trace.json"] = dump_stable(to_json(fair.trace));
        outputs["report.json"] = dump_stable(to_json(report));
      }
    } catch (const std::exception& e) {
      return fail(job, e.what());
    }

    std::lock_guard lock(session->mu);
    if (session->generation != job.generation) return fail(job, "superseded by a later step");
    try {
      // report.json last so FairDone is only observable once everything is on disk.
      for (const auto& name : {"recipe.json", "baseline.json", "fair.json", "trace.json", "report.json"})
        if (auto it = outputs.find(name); it != outputs.end()) write_text_atomic(session->dir / name, it->second);
    } catch (const std::exception& e) {
      return fail(job, e.what());
    }
    update(job, [](Job& j) {
      j.status = JobStatus::Done;
      j.progress = 1.0;
    });
  }

  // ------------------------------------------------------------ endpoints

  ApiResponse create_session() {
    auto s = std::make_shared<Session>();
    s->id = random_token();
    s->dir = config.workspace / s->id;
    fs::create_directories(s->dir);
    write_text_atomic(s->dir / "session.json", dump_stable({{"session_id", s->id}, {"dataset_name", "dataset"}}));
    {
      std::lock_guard lock(sessions_mu);
      sessions.emplace(s->id, s);
    }
    return json_response(201, {{"session_id", s->id}, {"state", to_string(SessionState::Created)}});
  }

  static ApiResponse out_of_order(SessionState have, SessionState need) {
    return error_response(409, "OutOfOrder",
                          "step requires state " + std::string(to_string(need)) + ", session is " +
                              std::string(to_string(have)));
  }

  static ApiResponse artifact(const Session& s, const std::string& file, SessionState need) {
    const auto state = state_of(s.dir);
    if (state < need || !fs::exists(s.dir / file)) return out_of_order(state, need);
    return {200, read_text_file(s.dir / file)};
  }

  ApiResponse upload_dataset(Session& s, const ApiRequest& req) {
    std::string name = "dataset";
    if (auto it = req.query.find("name"); it != req.query.end() && !it->second.empty()) name = it->second;
    std::optional<Table> parsed;
    try {
      parsed = ingest_csv(req.body, name);
    } catch (const Error& e) {
      return error_response(400, e);
    }
    std::lock_guard lock(s.mu);
    ++s.generation;
    invalidate_after(s.dir, SessionState::Created);
    write_text_atomic(s.dir / "session.json", dump_stable({{"session_id", s.id}, {"dataset_name", name}}));
    write_text_atomic(s.dir / "dataset.csv", req.body);
    const Table& t = *parsed;
    Json columns = Json::array();
    for (std::size_t i = 0; i < t.n_cols(); ++i)
      columns.push_back({{"name", t.column(i).name()},
                         {"type", t.column(i).is_numeric() ? "numeric" : "categorical"},
                         {"missing", t.column(i).missing_count()}});
    return json_response(200, {{"state", to_string(state_of(s.dir))},
                               {"dataset", {{"name", name}, {"n_rows", t.n_rows()}, {"n_cols", t.n_cols()}}},
                               {"columns", columns}});
  }

  static Table load_table(const Session& s) {
    const auto meta = read_json_file(s.dir / "session.json");
    return ingest_csv(read_text_file(s.dir / "dataset.csv"), meta.value("dataset_name", std::string("dataset")));
  }

  ApiResponse run_analysis(Session& s) {
    std::lock_guard lock(s.mu);
    const auto state = state_of(s.dir);
    if (state < SessionState::DataLoaded) return out_of_order(state, SessionState::DataLoaded);
    const auto report = analyze(load_table(s));
    ++s.generation;
    invalidate_after(s.dir, SessionState::DataLoaded);
    const auto body = dump_stable(to_json(report));
    write_text_atomic(s.dir / "analysis.json", body);
    return {200, body};
  }

  ApiResponse recommendation(Session& s, const ApiRequest& req) {
    std::lock_guard lock(s.mu);
    const auto state = state_of(s.dir);
    if (state < SessionState::Analyzed) return out_of_order(state, SessionState::Analyzed);
    std::string provider = "heuristic";
    if (auto it = req.query.find("provider"); it != req.query.end() && !it->second.empty()) provider = it->second;
    const auto report = analysis_from_json(read_json_file(s.dir / "analysis.json"));
    const auto distincts = distinct_map(load_table(s));
    AttributeRecommendation rec;
    if (provider == "heuristic") {
      rec = heuristic_recommend(report, distincts);
    } else if (provider == "llm") {
      auto it = req.query.find("profile");
      if (it == req.query.end() || it->second.empty())
        return error_response(400, "InvalidArgument", "provider=llm needs a profile parameter");
      if (!providers.contains(it->second))
        return error_response(404, "UnknownProfile", "no provider profile named '" + it->second + "'");
      auto [transport, retries] = providers.make(it->second);
      rec = llm_recommend(report, distincts, *transport, retries);
    } else {
      return error_response(400, "InvalidArgument", "provider must be heuristic or llm");
    }
    const auto body = dump_stable(to_json(rec));
    write_text_atomic(s.dir / "recommendation.json", body);
    return {200, body};
  }

  ApiResponse put_config(Session& s, const ApiRequest& req) {
    Json j;
    try {
      j = Json::parse(req.body);
    } catch (const Json::exception& e) {
      return error_response(400, "InvalidArgument", std::string("body is not JSON: ") + e.what());
    }
    std::lock_guard lock(s.mu);
    const auto state = state_of(s.dir);
    if (state < SessionState::Analyzed) return out_of_order(state, SessionState::Analyzed);
    TaskConfig task;
    try {
      task = task_from_json(j);
      task.validate();
      task.validate_columns(distinct_map(load_table(s)));
    } catch (const Error& e) {
      return error_response(422, e);
    }
    // Attribution: the advisor gets credit only when the user kept its picks.
    std::string provider = "user";
    std::vector<std::string> warnings;
    if (fs::exists(s.dir / "recommendation.json")) {
      const auto rec = recommendation_from_json(read_json_file(s.dir / "recommendation.json"));
      if (!rec.sensitive.empty() && rec.sensitive.front().column == task.sensitive &&
          rec.target.column == task.target) {
        provider = rec.provider;
        warnings = rec.warnings;
      }
    }
    ++s.generation;
    invalidate_after(s.dir, SessionState::Analyzed);
    Json stored = to_json(task);
    stored["advisor_provider"] = provider;
    stored["advisor_warnings"] = warnings;
    write_text_atomic(s.dir / "config.json", dump_stable(stored));
    Json out = to_json(task);
    out["state"] = to_string(state_of(s.dir));
    return json_response(200, out);
  }

  ApiResponse start_baseline(Session& s) {
    std::lock_guard lock(s.mu);
    const auto state = state_of(s.dir);
    if (state < SessionState::Configured) return out_of_order(state, SessionState::Configured);
    ++s.generation;
    invalidate_after(s.dir, SessionState::Configured);
    return json_response(202, {{"job_id", enqueue(s, JobKind::TrainBaseline, 0)}});
  }

  // The optional body may retune mitigation fields that do not affect the baseline.
  ApiResponse start_fair(Session& s, const ApiRequest& req) {
    Json patch = Json::object();
    if (!req.body.empty()) {
      try {
        patch = Json::parse(req.body);
      } catch (const Json::exception& e) {
        return error_response(400, "InvalidArgument", std::string("body is not JSON: ") + e.what());
      }
      if (!patch.is_object()) return error_response(400, "InvalidArgument", "body must be a JSON object");
    }
    std::lock_guard lock(s.mu);
    const auto state = state_of(s.dir);
    if (state < SessionState::BaselineDone) return out_of_order(state, SessionState::BaselineDone);
    auto stored = read_json_file(s.dir / "config.json");
    static const std::vector<std::string> allowed = {"metric", "threshold", "tolerance", "mitigation", "budget"};
    for (const auto& [key, value] : patch.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        return error_response(422, "InvalidArgument", "field '" + key + "' changes the baseline; use PUT config");
      stored[key] = value;
    }
    TaskConfig task;
    try {
      task = task_from_json(stored);
      task.validate();
    } catch (const Error& e) {
      return error_response(422, e);
    }
    ++s.generation;
    invalidate_after(s.dir, SessionState::BaselineDone);
    write_text_atomic(s.dir / "config.json", dump_stable(stored));
    return json_response(202, {{"job_id", enqueue(s, JobKind::TrainFair, task.budget)}});
  }

  ApiResponse get_job(const Session& s, const std::string& job_id) {
    std::lock_guard lock(jobs_mu);
    auto it = jobs.find(job_id);
    if (it == jobs.end() || it->second->session != s.id)
      return error_response(404, "NotFound", "no job '" + job_id + "' in this session");
    return json_response(200, to_json(*it->second));
  }

  static ApiResponse trace_csv(const Session& s) {
    const auto state = state_of(s.dir);
    if (state < SessionState::FairDone) return out_of_order(state, SessionState::FairDone);
    const auto trace = trace_from_json(read_json_file(s.dir / "trace.json"));
    std::ostringstream out;
    out << "index,strength,val_metric,val_accuracy,selected\n";
    out.setf(std::ios::fixed);
    out.precision(6);
    for (std::size_t i = 0; i < trace.evaluations.size(); ++i) {
      const auto& e = trace.evaluations[i];
      out << i << ',' << e.strength << ',' << e.val_metric << ',' << e.val_accuracy << ','
          << (i == trace.selected ? 1 : 0) << '\n';
    }
    return {200, out.str(), "text/csv"};
  }

  ApiResponse route(const ApiRequest& req) {
    const auto parts = split_path(req.path);
    const auto& m = req.method;
    if (parts.size() < 2 || parts[0] != "api") return error_response(404, "NotFound", "no route " + req.path);

    if (parts.size() == 2 && parts[1] == "health" && m == "GET")
      return json_response(200, {{"status", "ok"}, {"version", software_version()}});
    if (parts.size() == 2 && parts[1] == "providers" && m == "GET") {
      Json profiles = providers.names();
      return json_response(200, {{"default", "heuristic"}, {"profiles", profiles}});
    }
    if (parts.size() == 2 && parts[1] == "metrics" && m == "GET")
      return json_response(200, {{"metrics", metric_names()}});
    if (parts[1] != "sessions") return error_response(404, "NotFound", "no route " + req.path);
    if (parts.size() == 2) {
      if (m == "POST") return create_session();
      return error_response(405, "MethodNotAllowed", m + " " + req.path);
    }

    auto session = find_session(parts[2]);
    if (!session) return error_response(404, "NotFound", "no session '" + parts[2] + "'");
    auto& s = *session;
    if (parts.size() == 3) {
      if (m == "GET") {
        std::lock_guard lock(s.mu);
        return json_response(200, session_json(s));
      }
      return error_response(405, "MethodNotAllowed", m + " " + req.path);
    }
    const auto& action = parts[3];
    if (parts.size() == 5 && action == "jobs" && m == "GET") return get_job(s, parts[4]);
    if (parts.size() != 4) return error_response(404, "NotFound", "no route " + req.path);

    if (action == "dataset" && m == "POST") return upload_dataset(s, req);
    if (action == "analyze" && m == "POST") return run_analysis(s);
    if (action == "recommendation" && m == "GET") return recommendation(s, req);
    if (action == "config" && m == "PUT") return put_config(s, req);
    if (action == "baseline" && m == "POST") return start_baseline(s);
    if (action == "fair" && m == "POST") return start_fair(s, req);

    std::lock_guard lock(s.mu);
    if (m == "GET") {
      if (action == "analysis") return artifact(s, "analysis.json", SessionState::Analyzed);
      if (action == "config") return artifact(s, "config.json", SessionState::Configured);
      if (action == "baseline") return artifact(s, "baseline.json", SessionState::BaselineDone);
      if (action == "fair") return artifact(s, "fair.json", SessionState::FairDone);
      if (action == "trace") return artifact(s, "trace.json", SessionState::FairDone);
      if (action == "trace.csv") return trace_csv(s);
      if (action == "report") return artifact(s, "report.json", SessionState::FairDone);
      if (action == "dataset") {
        const auto state = state_of(s.dir);
        if (state < SessionState::DataLoaded) return out_of_order(state, SessionState::DataLoaded);
        return {200, read_text_file(s.dir / "dataset.csv"), "text/csv"};
      }
    }
    return error_response(404, "NotFound", "no route " + m + " " + req.path);
  }

  void install_routes() {
    server.set_payload_max_length(config.max_upload_bytes);
    auto adapter = [this](const httplib::Request& r, httplib::Response& res) {
      ApiRequest req{r.method, r.path, {}, r.body};
      for (const auto& [k, v] : r.params) req.query.emplace(k, v);
      const auto out = handle(req);
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    const std::string pattern = R"(/api/.*)";
    server.Get(pattern, adapter);
    server.Post(pattern, adapter);
    server.Put(pattern, adapter);
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string name = res.status == 413 ? "PayloadTooLarge" : "HttpError";
      res.set_content(dump_stable({{"error", name}, {"message", httplib::status_message(res.status)}}),
                      "application/json");
    });
    if (config.static_dir) server.set_mount_point("/", config.static_dir->string());
  }

  ApiResponse handle(const ApiRequest& req) {
    try {
      return route(req);
    } catch (const Error& e) {
      return error_response(500, e);
    } catch (const std::exception& e) {
      return error_response(500, "Internal", e.what());
    }
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) { impl_->install_routes(); }

Service::~Service() = default;

ApiResponse Service::handle(const ApiRequest& request) { return impl_->handle(request); }

void Service::wait_idle() {
  std::unique_lock lock(impl_->jobs_mu);
  impl_->idle_cv.wait(lock, [&] { return impl_->queue.empty() && impl_->running == 0; });
}

bool Service::listen() { return impl_->server.listen(impl_->config.host, impl_->config.port); }

int Service::listen_background() {
  const int port = impl_->server.bind_to_any_port(impl_->config.host);
  if (port <= 0) throw Error(ErrorCode::Io, "could not bind " + impl_->config.host);
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() { impl_->server.stop(); }

const ServiceConfig& Service::config() const { return impl_->config; }

}  // namespace fairpipe
