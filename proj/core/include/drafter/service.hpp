#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "drafter/gateway.hpp"
#include "drafter/lexical_metrics.hpp"
#include "drafter/memory_index.hpp"
#include "drafter/planner.hpp"
#include "drafter/section_engine.hpp"
#include "drafter/types.hpp"

namespace drafter {

/// Runs background work (planning, generation). Tests use inline or manual
/// executors; the server uses a WorkerPool.
using Executor = std::function<void(std::function<void()>)>;

Executor inline_executor();

class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 2);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void submit(std::function<void()> task);
  /// Blocks until the queue is empty and no task is running.
  void drain();
  Executor executor();

 private:
  void loop();

  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<std::function<void()>> queue_;
  std::size_t running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

struct Job {
  std::string job_id;
  DocumentSpec spec;
  GenerationConfig config;
  SectionPlan plan;
  JobState state;
  std::optional<DraftDocument> draft;
  GenerationTrace trace;
  std::int64_t created_at_ms = 0;
  std::int64_t updated_at_ms = 0;
};

nlohmann::json job_view(const Job& job);

struct EvaluationResult {
  metrics::MetricReport metrics;
  /// Absent when no judge gateway is configured.
  std::optional<double> judge_score;
  std::string judge_error;
};

struct ServiceOptions {
  /// Append-only job logs live here; empty keeps everything in memory.
  std::filesystem::path data_dir;
  Executor executor;
  /// Milliseconds since the epoch; injectable for tests.
  std::function<std::int64_t()> clock;
};

/// The HITL workflow. Every state change goes through the job transition
/// relation and is appended to the job's log before it becomes visible.
class JobService {
 public:
  using TransitionObserver = std::function<void(const std::string& job_id, const JobState& from, const JobState& to)>;

  /// `gateway` may be null: job creation then fails with ProviderError.
  JobService(std::shared_ptr<Gateway> gateway, ServiceOptions options, std::shared_ptr<Gateway> judge = nullptr);
  ~JobService();

  /// Errors: InvalidSpec, ProviderError (no provider).
  std::string create_job(const DocumentSpec& spec, const GenerationConfig& config);
  /// Errors: NotFound.
  Job get_job(const std::string& job_id) const;
  std::vector<std::string> job_ids() const;
  /// Errors: NotFound, WrongState, PlanLocked, RevisionMismatch and the
  /// planner's edit errors.
  SectionPlan edit_plan(const std::string& job_id, const PlanEdit& edit, std::uint64_t expected_revision);
  /// Errors: NotFound, WrongState, EmptyPlan.
  void approve(const std::string& job_id);
  /// Errors: NotFound, WrongState.
  std::pair<DraftDocument, GenerationTrace> get_draft(const std::string& job_id) const;
  /// Errors: NotFound, WrongState, EmptyReferences.
  EvaluationResult evaluate(const std::string& job_id, const std::string& reference_text);

  /// Marks jobs that were mid-flight when the log was written as Failed.
  std::size_t fail_interrupted(const std::string& reason = "interrupted by restart");

  void set_transition_observer(TransitionObserver observer);

 private:
  struct Slot {
    mutable std::mutex mutex;
    Job job;
  };

  std::shared_ptr<Slot> slot(const std::string& job_id) const;
  void record(Slot& slot, nlohmann::json event);
  void transition(Slot& slot, const JobState& to);
  void replay();
  void run_planning(const std::shared_ptr<Slot>& slot);
  void run_generation(const std::shared_ptr<Slot>& slot);
  std::int64_t now() const;

  std::shared_ptr<Gateway> gateway_;
  std::shared_ptr<Gateway> judge_;
  ServiceOptions options_;
  MemoryIndex memory_;
  HashEmbedding embedder_;
  mutable std::shared_mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> jobs_;
  std::uint64_t next_id_ = 1;
  TransitionObserver observer_;
};

/// Applies one logged event to a job view; shared by live updates and
/// replay so both produce the same view.
void apply_job_event(Job& job, const nlohmann::json& event);

// ---------------------------------------------------------------------------
// HTTP

struct ApiResponse {
  int status = 200;
  std::string body;
};

int http_status_for(Errc code) noexcept;

/// Socket-free request dispatch; the HTTP server forwards to it.
///   POST  /jobs                 {spec, config?}           -> 201 {job_id}
///   GET   /jobs/{id}                                      -> job view
///   PATCH /jobs/{id}/plan       {expected_revision, edit} -> plan
///   POST  /jobs/{id}/approve                              -> 202 job view
///   GET   /jobs/{id}/draft                                -> {draft, trace}
///   POST  /jobs/{id}/evaluate   {reference}               -> metrics
/// Errors are {code, message}. A non-empty `auth_token` requires
/// "Authorization: Bearer <token>".
class ApiRouter {
 public:
  explicit ApiRouter(JobService& service, std::string auth_token = {});
  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body,
                     std::string_view authorization = {}) const;

 private:
  JobService& service_;
  std::string auth_token_;
};

/// Parses {"op": "rename"|"insert"|"remove"|"move", ...}.
PlanEdit parse_plan_edit(const nlohmann::json& j);

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir;
  /// Name of the environment variable holding the bearer token.
  std::string auth_token_env = "DRAFTER_AUTH_TOKEN";
  std::string provider_config_path;
};

/// DRAFTER_LISTEN (host:port), DRAFTER_DATA_DIR, DRAFTER_AUTH_TOKEN_ENV,
/// DRAFTER_PROVIDER_CONFIG. Unset variables keep `base` values.
ServiceSettings settings_from_env(ServiceSettings base = {});

class HttpServer {
 public:
  HttpServer(const ApiRouter& router);
  ~HttpServer();

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace drafter
