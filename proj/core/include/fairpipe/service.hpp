#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "fairpipe/advisor.hpp"
#include "fairpipe/json_util.hpp"
#include "fairpipe/mitigation.hpp"

namespace fairpipe {

enum class SessionState { Created, DataLoaded, Analyzed, Configured, BaselineDone, FairDone };
std::string_view to_string(SessionState s);

enum class JobKind { TrainBaseline, TrainFair };
enum class JobStatus { Queued, Running, Done, Failed };
std::string_view to_string(JobKind k);
std::string_view to_string(JobStatus s);

struct ServiceConfig {
  std::filesystem::path workspace = "fairpipe-workspace";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_upload_bytes = 100ull * 1024 * 1024;
  std::size_t workers = 0;  // 0: min(cores, 4)
  std::optional<std::filesystem::path> static_dir;
  std::optional<std::filesystem::path> providers_file;
  AdversarialSchedule schedule;

  /// FAIRPIPE_WORKSPACE, FAIRPIPE_HOST, FAIRPIPE_PORT, FAIRPIPE_MAX_UPLOAD,
  /// FAIRPIPE_WORKERS, FAIRPIPE_STATIC_DIR, FAIRPIPE_PROVIDERS.
  static ServiceConfig from_env();
};

/// Transport-neutral request/response; the HTTP server is a thin adapter.
struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  Json json() const { return Json::parse(body); }
};

/// Session store, job queue and REST routing. Sessions live as directories
/// under the workspace; constructing a Service rehydrates them from disk.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ApiResponse handle(const ApiRequest& request);

  /// Blocks until the job queue is empty and no job is running.
  void wait_idle();

  /// Serves /api/* plus static assets until stop() is called.
  bool listen();
  /// Binds to an ephemeral port and serves on a background thread.
  int listen_background();
  void stop();

  const ServiceConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fairpipe
