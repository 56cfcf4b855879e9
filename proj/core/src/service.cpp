#include "drafter/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "drafter/error.hpp"
#include "drafter/json_io.hpp"
#include "drafter/judge.hpp"
#include "drafter/text.hpp"

namespace drafter {

Executor inline_executor() {
  return [](std::function<void()> task) { task(); };
}

WorkerPool::WorkerPool(std::size_t workers) {
  for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) threads_.emplace_back([this] { loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::submit(std::function<void()> task) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(task));
  }
  wake_.notify_one();
}

void WorkerPool::drain() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [&] { return queue_.empty() && running_ == 0; });
}

Executor WorkerPool::executor() {
  return [this](std::function<void()> task) { submit(std::move(task)); };
}

void WorkerPool::loop() {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
      ++running_;
    }
    task();
    {
      std::lock_guard lock(mutex_);
      --running_;
    }
    idle_.notify_all();
  }
}

// ---------------------------------------------------------------------------

nlohmann::json job_view(const Job& job) {
  json j = {{"job_id", job.job_id},
            {"spec", job.spec},
            {"config", job.config},
            {"plan", job.plan},
            {"state", job.state},
            {"draft_available", job.draft.has_value()},
            {"created_at_ms", job.created_at_ms},
            {"updated_at_ms", job.updated_at_ms}};
  if (job.state.kind == JobState::Kind::Generating) {
    j["progress"] = {{"section_index", job.state.section_index}, {"section_count", job.state.section_count}};
  }
  return j;
}

void apply_job_event(Job& job, const nlohmann::json& event) {
  const auto type = require_string(event, "type");
  const auto at = require_field(event, "at").get<std::int64_t>();
  if (type == "created") {
    job = Job{};
    job.job_id = require_string(event, "job_id");
    job.spec = require_field(event, "spec").get<DocumentSpec>();
    job.config = require_field(event, "config").get<GenerationConfig>();
    job.created_at_ms = at;
  } else if (type == "state") {
    job.state = require_field(event, "state").get<JobState>();
  } else if (type == "plan") {
    job.plan = require_field(event, "plan").get<SectionPlan>();
  } else if (type == "draft") {
    job.draft = require_field(event, "draft").get<DraftDocument>();
    job.trace = require_field(event, "trace").get<GenerationTrace>();
  } else {
    throw Error(Errc::CorruptRecord, "unknown job event '" + type + "'");
  }
  job.updated_at_ms = at;
}

JobService::JobService(std::shared_ptr<Gateway> gateway, ServiceOptions options, std::shared_ptr<Gateway> judge)
    : gateway_(std::move(gateway)), judge_(std::move(judge)), options_(std::move(options)) {
  if (!options_.executor) options_.executor = inline_executor();
  if (!options_.data_dir.empty()) {
    std::filesystem::create_directories(options_.data_dir);
    replay();
  }
}

JobService::~JobService() = default;

std::int64_t JobService::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void JobService::set_transition_observer(TransitionObserver observer) { observer_ = std::move(observer); }

std::shared_ptr<JobService::Slot> JobService::slot(const std::string& job_id) const {
  std::shared_lock lock(jobs_mutex_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(Errc::NotFound, "no job '" + job_id + "'");
  return it->second;
}

void JobService::record(Slot& slot, nlohmann::json event) {
  event["at"] = now();
  if (!options_.data_dir.empty()) {
    const auto path = options_.data_dir / (slot.job.job_id + ".job.log");
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << event.dump() << '\n';
    out.flush();
    if (!out) throw Error(Errc::Unreadable, "cannot append to " + path.string());
  }
  apply_job_event(slot.job, event);
}

void JobService::transition(Slot& slot, const JobState& to) {
  const auto from = slot.job.state;
  if (!is_legal_transition(from, to)) {
    throw Error(Errc::IllegalTransition,
                std::string(to_string(from.kind)) + " -> " + std::string(to_string(to.kind)) + " for " + slot.job.job_id);
  }
  record(slot, {{"type", "state"}, {"state", to}});
  if (observer_) observer_(slot.job.job_id, from, to);
}

void JobService::replay() {
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 8 && name.ends_with(".job.log")) logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Unreadable, "cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
      if (!text::trim(line).empty()) lines.push_back(line);
    }
    auto slot = std::make_shared<Slot>();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      json event;
      try {
        event = json::parse(lines[i]);
      } catch (const json::exception&) {
        // A crash mid-append leaves a torn final line; anything earlier is damage.
        if (i + 1 == lines.size()) break;
        throw Error(Errc::CorruptRecord, path.string() + ": unparseable line " + std::to_string(i + 1));
      }
      if (i == 0 && event.value("type", "") != "created") {
        throw Error(Errc::CorruptRecord, path.string() + ": log does not start with a creation record");
      }
      apply_job_event(slot->job, event);
    }
    if (slot->job.job_id.empty()) continue;
    const auto& id = slot->job.job_id;
    if (id.rfind("job-", 0) == 0) {
      next_id_ = std::max<std::uint64_t>(next_id_, std::strtoull(id.c_str() + 4, nullptr, 10) + 1);
    }
    jobs_[id] = std::move(slot);
  }
}

std::string JobService::create_job(const DocumentSpec& spec, const GenerationConfig& config) {
  const auto check = validate_spec(spec);
  if (!check.ok()) {
    std::string why;
    for (auto v : check.violations) why += (why.empty() ? "" : ", ") + std::string(to_string(v));
    throw Error(Errc::InvalidSpec, why);
  }
  if (!gateway_) throw Error(Errc::ProviderError, "no model provider configured");

  auto slot = std::make_shared<Slot>();
  {
    std::unique_lock lock(jobs_mutex_);
    char id[32];
    std::snprintf(id, sizeof id, "job-%06llu", static_cast<unsigned long long>(next_id_++));
    std::lock_guard job_lock(slot->mutex);
    slot->job.job_id = id;
    record(*slot, {{"type", "created"}, {"job_id", id}, {"spec", spec}, {"config", config}});
    jobs_[id] = slot;
  }
  const auto job_id = slot->job.job_id;
  options_.executor([this, slot] { run_planning(slot); });
  return job_id;
}

void JobService::run_planning(const std::shared_ptr<Slot>& slot) {
  DocumentSpec spec;
  GenerationConfig config;
  {
    std::lock_guard lock(slot->mutex);
    if (slot->job.state.kind != JobState::Kind::PlanPending) return;
    spec = slot->job.spec;
    config = slot->job.config;
  }
  try {
    auto plan = generate_plan(spec, *gateway_, config);
    std::lock_guard lock(slot->mutex);
    if (slot->job.state.kind != JobState::Kind::PlanPending) return;
    record(*slot, {{"type", "plan"}, {"plan", plan}});
    transition(*slot, JobState::awaiting_approval());
  } catch (const Error& e) {
    std::lock_guard lock(slot->mutex);
    if (!slot->job.state.terminal()) transition(*slot, JobState::failed(e.what()));
  }
}

Job JobService::get_job(const std::string& job_id) const {
  const auto s = slot(job_id);
  std::lock_guard lock(s->mutex);
  return s->job;
}

std::vector<std::string> JobService::job_ids() const {
  std::shared_lock lock(jobs_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : jobs_) ids.push_back(id);
  return ids;
}

SectionPlan JobService::edit_plan(const std::string& job_id, const PlanEdit& edit, std::uint64_t expected_revision) {
  const auto s = slot(job_id);
  std::lock_guard lock(s->mutex);
  auto& job = s->job;
  if (job.state.kind != JobState::Kind::AwaitingApproval) {
    if (job.plan.approved) throw Error(Errc::PlanLocked, "plan of " + job_id + " is approved");
    throw Error(Errc::WrongState, job_id + " is " + std::string(to_string(job.state.kind)));
  }
  if (expected_revision != job.plan.revision) {
    throw Error(Errc::RevisionMismatch, "expected revision " + std::to_string(expected_revision) + ", current is " +
                                            std::to_string(job.plan.revision));
  }
  auto next = apply_edit(job.plan, edit);
  record(*s, {{"type", "plan"}, {"plan", next}});
  transition(*s, JobState::awaiting_approval());
  return job.plan;
}

namespace {

std::size_t generation_steps(const GenerationConfig& config, const SectionPlan& plan) {
  switch (config.mode) {
    case GenerationMode::LongPromptOnly: return 1;
    case GenerationMode::RetrievalOnly: return std::max<std::size_t>(1, config.retrieval_chunks);
    default: return plan.size();
  }
}

}  // namespace

void JobService::approve(const std::string& job_id) {
  const auto s = slot(job_id);
  {
    std::lock_guard lock(s->mutex);
    auto& job = s->job;
    if (job.state.kind != JobState::Kind::AwaitingApproval) {
      throw Error(Errc::WrongState, job_id + " is " + std::string(to_string(job.state.kind)));
    }
    auto approved = approve_plan(job.plan);
    record(*s, {{"type", "plan"}, {"plan", approved}});
    transition(*s, JobState::generating(0, generation_steps(job.config, job.plan)));
  }
  options_.executor([this, s] { run_generation(s); });
}

void JobService::run_generation(const std::shared_ptr<Slot>& slot) {
  DocumentSpec spec;
  SectionPlan plan;
  GenerationConfig config;
  std::string job_id;
  {
    std::lock_guard lock(slot->mutex);
    if (slot->job.state.kind != JobState::Kind::Generating) return;
    spec = slot->job.spec;
    plan = slot->job.plan;
    config = slot->job.config;
    job_id = slot->job.job_id;
  }

  GenerationTrace trace;
  PipelineHooks hooks;
  hooks.trace = &trace;
  hooks.on_section_start = [&](std::size_t i, std::size_t n) {
    std::lock_guard lock(slot->mutex);
    const auto target = JobState::generating(i, n);
    if (slot->job.state != target && !slot->job.state.terminal()) transition(*slot, target);
  };
  hooks.on_refining = [&] {
    std::lock_guard lock(slot->mutex);
    if (!slot->job.state.terminal()) transition(*slot, JobState::refining());
  };

  const MemoryHandle memory{memory_, embedder_, job_id};
  try {
    const auto draft = run_pipeline(spec, plan, *gateway_, memory, config, hooks);
    memory_.remove_job(job_id);
    std::lock_guard lock(slot->mutex);
    if (slot->job.state.terminal()) return;
    record(*slot, {{"type", "draft"}, {"draft", draft}, {"trace", trace}});
    transition(*slot, JobState::complete());
  } catch (const Error& e) {
    memory_.remove_job(job_id);
    std::lock_guard lock(slot->mutex);
    if (!slot->job.state.terminal()) transition(*slot, JobState::failed(e.what()));
  }
}

std::pair<DraftDocument, GenerationTrace> JobService::get_draft(const std::string& job_id) const {
  const auto s = slot(job_id);
  std::lock_guard lock(s->mutex);
  if (s->job.state.kind != JobState::Kind::Complete || !s->job.draft) {
    throw Error(Errc::WrongState, job_id + " is " + std::string(to_string(s->job.state.kind)));
  }
  return {*s->job.draft, s->job.trace};
}

EvaluationResult JobService::evaluate(const std::string& job_id, const std::string& reference_text) {
  const auto [draft, trace] = get_draft(job_id);
  if (text::trim(reference_text).empty()) throw Error(Errc::EmptyReferences, "reference text is empty");
  EvaluationResult out;
  out.metrics = metrics::score_pair(draft.assembled_text, reference_text);
  if (judge_) {
    DocumentSpec spec;
    {
      const auto s = slot(job_id);
      std::lock_guard lock(s->mutex);
      spec = s->job.spec;
    }
    try {
      const auto report = run_geval({JudgeCase{spec.description, reference_text, draft.assembled_text}}, *judge_);
      out.judge_score = report.cases.front().score;
    } catch (const Error& e) {
      out.judge_error = e.what();
    }
  }
  return out;
}

std::size_t JobService::fail_interrupted(const std::string& reason) {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::shared_lock lock(jobs_mutex_);
    for (const auto& [_, s] : jobs_) slots.push_back(s);
  }
  std::size_t failed = 0;
  for (const auto& s : slots) {
    std::lock_guard lock(s->mutex);
    const auto k = s->job.state.kind;
    if (k == JobState::Kind::PlanPending || k == JobState::Kind::Generating || k == JobState::Kind::Refining) {
      transition(*s, JobState::failed(reason));
      ++failed;
    }
  }
  return failed;
}

// ---------------------------------------------------------------------------
// Routing

int http_status_for(Errc code) noexcept {
  switch (code) {
    case Errc::NotFound:
      return 404;
    case Errc::RevisionMismatch:
    case Errc::PlanLocked:
    case Errc::WrongState:
    case Errc::AlreadyApproved:
    case Errc::IllegalTransition:
      return 409;
    case Errc::InvalidSpec:
    case Errc::InvalidRequest:
    case Errc::InvalidConfig:
      return 400;
    case Errc::EmptyPlan:
    case Errc::OutOfBounds:
    case Errc::DuplicateTitle:
    case Errc::InvalidTitle:
    case Errc::PlanTooLarge:
    case Errc::EmptyReferences:
    case Errc::EmptyText:
      return 422;
    case Errc::ProviderError:
    case Errc::ExhaustedRetries:
    case Errc::Timeout:
      return 503;
    default:
      return 500;
  }
}

PlanEdit parse_plan_edit(const nlohmann::json& j) {
  const auto op = require_string(j, "op");
  auto index = [&](const char* name) {
    const auto& v = require_field(j, name);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw Error(Errc::InvalidRequest, std::string("field '") + name + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  if (op == "rename") return edit::Rename{index("index"), require_string(j, "text")};
  if (op == "insert") return edit::Insert{index("index"), require_string(j, "text")};
  if (op == "remove") return edit::Remove{index("index")};
  if (op == "move") return edit::Move{index("from"), index("to")};
  throw Error(Errc::InvalidRequest, "unknown edit op '" + op + "'");
}

namespace {

ApiResponse json_response(int status, const json& body) { return {status, body.dump()}; }

ApiResponse error_response(int status, std::string_view code, std::string_view message) {
  return json_response(status, {{"code", code}, {"message", message}});
}

std::vector<std::string> split_path(std::string_view path) {
  const auto q = path.find('?');
  if (q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto end = slash == std::string_view::npos ? path.size() : slash;
    if (end > start) parts.emplace_back(path.substr(start, end - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return parts;
}

json parse_body(std::string_view body) {
  if (text::trim(body).empty()) return json::object();
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw Error(Errc::InvalidRequest, "body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidRequest, std::string("body is not JSON: ") + e.what());
  }
}

}  // namespace

ApiRouter::ApiRouter(JobService& service, std::string auth_token)
    : service_(service), auth_token_(std::move(auth_token)) {}

ApiResponse ApiRouter::handle(std::string_view method, std::string_view path, std::string_view body,
                              std::string_view authorization) const {
  if (!auth_token_.empty() && authorization != "Bearer " + auth_token_) {
    return error_response(401, "Unauthorized", "missing or wrong bearer token");
  }
  const auto parts = split_path(path);
  if (parts.empty() || parts[0] != "jobs" || parts.size() > 3) return error_response(404, "NotFound", "no such route");

  auto method_not_allowed = [&] { return error_response(405, "MethodNotAllowed", std::string(method) + " not allowed"); };

  try {
    if (parts.size() == 1) {
      if (method == "GET") return json_response(200, {{"jobs", service_.job_ids()}});
      if (method != "POST") return method_not_allowed();
      const auto req = parse_body(body);
      const auto spec = require_field(req, "spec").get<DocumentSpec>();
      GenerationConfig config;
      if (req.contains("config")) config = req.at("config").get<GenerationConfig>();
      const auto id = service_.create_job(spec, config);
      return json_response(201, {{"job_id", id}});
    }

    const auto& id = parts[1];
    if (parts.size() == 2) {
      if (method != "GET") return method_not_allowed();
      return json_response(200, job_view(service_.get_job(id)));
    }

    const auto& action = parts[2];
    if (action == "plan") {
      if (method != "PATCH") return method_not_allowed();
      const auto req = parse_body(body);
      const auto& rev = require_field(req, "expected_revision");
      if (!rev.is_number_integer() || rev.get<long long>() < 0) {
        throw Error(Errc::InvalidRequest, "expected_revision must be a non-negative integer");
      }
      const auto plan = service_.edit_plan(id, parse_plan_edit(require_field(req, "edit")), rev.get<std::uint64_t>());
      return json_response(200, json(plan));
    }
    if (action == "approve") {
      if (method != "POST") return method_not_allowed();
      service_.approve(id);
      return json_response(202, job_view(service_.get_job(id)));
    }
    if (action == "draft") {
      if (method != "GET") return method_not_allowed();
      const auto [draft, trace] = service_.get_draft(id);
      return json_response(200, {{"draft", draft}, {"trace", trace}});
    }
    if (action == "evaluate") {
      if (method != "POST") return method_not_allowed();
      const auto req = parse_body(body);
      const auto result = service_.evaluate(id, require_string(req, "reference"));
      json out = {{"metrics", result.metrics}};
      if (result.judge_score) {
        out["judge_score"] = *result.judge_score;
      } else if (!result.judge_error.empty()) {
        out["judge_score"] = nullptr;
        out["judge_error"] = result.judge_error;
      } else {
        out["judge_score"] = "absent";
      }
      return json_response(200, out);
    }
    return error_response(404, "NotFound", "no such route");
  } catch (const Error& e) {
    return error_response(http_status_for(e.code()), errc_name(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, errc_name(Errc::InvalidRequest), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

ServiceSettings settings_from_env(ServiceSettings base) {
  if (const char* listen = std::getenv("DRAFTER_LISTEN"); listen && *listen) {
    const std::string value(listen);
    const auto colon = value.rfind(':');
    if (colon == std::string::npos) throw Error(Errc::InvalidConfig, "DRAFTER_LISTEN must be host:port");
    base.host = value.substr(0, colon);
    try {
      base.port = std::stoi(value.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(Errc::InvalidConfig, "DRAFTER_LISTEN port is not a number");
    }
  }
  if (const char* dir = std::getenv("DRAFTER_DATA_DIR"); dir && *dir) base.data_dir = dir;
  if (const char* name = std::getenv("DRAFTER_AUTH_TOKEN_ENV"); name && *name) base.auth_token_env = name;
  if (const char* cfg = std::getenv("DRAFTER_PROVIDER_CONFIG"); cfg && *cfg) base.provider_config_path = cfg;
  return base;
}

}  // namespace drafter
