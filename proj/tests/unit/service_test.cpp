#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "drafter/service.hpp"
#include "support/test_support.hpp"

namespace drafter {
namespace {

using nlohmann::json;
using testing::mock_gateway;
using testing::sample_spec;
using testing::TempDir;

// Queues background tasks until the test runs them.
struct ManualExecutor {
  std::vector<std::function<void()>> tasks;

  Executor executor() {
    return [this](std::function<void()> t) { tasks.push_back(std::move(t)); };
  }
  void run_all() {
    while (!tasks.empty()) {
      auto batch = std::move(tasks);
      tasks.clear();
      for (auto& t : batch) t();
    }
  }
};

ServiceOptions inline_options(std::filesystem::path dir = {}) {
  ServiceOptions o;
  o.data_dir = std::move(dir);
  o.executor = inline_executor();
  std::shared_ptr<std::int64_t> tick = std::make_shared<std::int64_t>(1000);
  o.clock = [tick] { return (*tick)++; };
  return o;
}

json body_of(const ApiResponse& r) { return json::parse(r.body); }

json spec_body(const std::string& mode = "full") {
  const auto s = sample_spec();
  return {{"spec", {{"id", s.id}, {"title", s.title}, {"description", s.description}, {"category", s.category}}},
          {"config", {{"mode", mode}}}};
}

TEST(JobService, HappyPathThroughStates) {
  ManualExecutor exec;
  ServiceOptions options = inline_options();
  options.executor = exec.executor();
  JobService service(mock_gateway(), options);
  std::vector<std::pair<JobState::Kind, JobState::Kind>> seen;
  service.set_transition_observer([&](const std::string&, const JobState& from, const JobState& to) {
    seen.emplace_back(from.kind, to.kind);
  });

  const auto id = service.create_job(sample_spec(), GenerationConfig{});
  EXPECT_EQ(id, "job-000001");
  EXPECT_EQ(service.get_job(id).state.kind, JobState::Kind::PlanPending);
  EXPECT_ERRC(service.approve(id), Errc::WrongState);
  exec.run_all();
  auto job = service.get_job(id);
  ASSERT_EQ(job.state.kind, JobState::Kind::AwaitingApproval);
  EXPECT_EQ(job.plan.size(), 3u);
  EXPECT_ERRC(service.get_draft(id), Errc::WrongState);

  const auto plan = service.edit_plan(id, edit::Rename{1, "Powers Granted"}, 0);
  EXPECT_EQ(plan.revision, 1u);
  EXPECT_ERRC(service.edit_plan(id, edit::Remove{0}, 0), Errc::RevisionMismatch);

  service.approve(id);
  const auto generating = service.get_job(id).state;
  EXPECT_EQ(generating, JobState::generating(0, 3));
  EXPECT_ERRC(service.edit_plan(id, edit::Remove{0}, 1), Errc::PlanLocked);
  exec.run_all();
  job = service.get_job(id);
  ASSERT_EQ(job.state.kind, JobState::Kind::Complete);
  const auto [draft, trace] = service.get_draft(id);
  EXPECT_EQ(draft.sections.size(), 3u);
  EXPECT_EQ(draft.sections[1].title, "Powers Granted");
  EXPECT_FALSE(trace.calls.empty());

  using K = JobState::Kind;
  const std::vector<std::pair<K, K>> expected{{K::PlanPending, K::AwaitingApproval},
                                              {K::AwaitingApproval, K::AwaitingApproval},
                                              {K::AwaitingApproval, K::Generating},
                                              {K::Generating, K::Generating},
                                              {K::Generating, K::Generating},
                                              {K::Generating, K::Refining},
                                              {K::Refining, K::Complete}};
  EXPECT_EQ(seen, expected);
}

TEST(JobService, ErrorsAndFailures) {
  JobService service(mock_gateway(), inline_options());
  EXPECT_ERRC(service.get_job("job-404"), Errc::NotFound);
  auto bad = sample_spec();
  bad.title = " ";
  EXPECT_ERRC(service.create_job(bad, {}), Errc::InvalidSpec);

  JobService no_provider(nullptr, inline_options());
  EXPECT_ERRC(no_provider.create_job(sample_spec(), {}), Errc::ProviderError);

  MockScript prose;
  prose.default_template = "I would rather not.";
  JobService failing(mock_gateway(prose), inline_options());
  const auto id = failing.create_job(sample_spec(), {});
  const auto job = failing.get_job(id);
  EXPECT_EQ(job.state.kind, JobState::Kind::Failed);
  EXPECT_NE(job.state.reason.find("PlanningFailed"), std::string::npos);
}

TEST(JobService, RemovingAllTitlesBlocksApproval) {
  JobService service(mock_gateway(), inline_options());
  const auto id = service.create_job(sample_spec(), {});
  for (std::uint64_t rev = 0; rev < 3; ++rev) service.edit_plan(id, edit::Remove{0}, rev);
  EXPECT_ERRC(service.approve(id), Errc::EmptyPlan);
  EXPECT_EQ(service.get_job(id).state.kind, JobState::Kind::AwaitingApproval);
}

TEST(JobService, EvaluateWithAndWithoutJudge) {
  JobService plain(mock_gateway(), inline_options());
  const auto id = plain.create_job(sample_spec(), {});
  plain.approve(id);
  const auto r = plain.evaluate(id, "Background terms and signatures of the power of attorney.");
  EXPECT_GE(r.metrics.rouge_l.f1, 0.0);
  EXPECT_FALSE(r.judge_score.has_value());
  EXPECT_ERRC(plain.evaluate(id, "  "), Errc::EmptyReferences);

  MockScript js;
  js.rules = {{"legal text evaluation", "9"}};
  JobService judged(mock_gateway(), inline_options(), mock_gateway(js));
  const auto jid = judged.create_job(sample_spec(), {});
  judged.approve(jid);
  EXPECT_EQ(judged.evaluate(jid, "reference").judge_score, 9.0);
}

TEST(Persistence, ReplayReproducesJobViews) {
  TempDir dir;
  std::vector<json> before;
  std::pair<DraftDocument, GenerationTrace> draft_before;
  {
    JobService service(mock_gateway(), inline_options(dir.path()));
    const auto a = service.create_job(sample_spec(), {});
    service.edit_plan(a, edit::Insert{3, "Schedule"}, 0);
    service.approve(a);
    const auto b = service.create_job(sample_spec(), {});
    service.edit_plan(b, edit::Move{0, 2}, 0);
    draft_before = service.get_draft(a);
    for (const auto& id : service.job_ids()) before.push_back(job_view(service.get_job(id)));
  }
  JobService replayed(mock_gateway(), inline_options(dir.path()));
  std::vector<json> after;
  for (const auto& id : replayed.job_ids()) after.push_back(job_view(replayed.get_job(id)));
  EXPECT_EQ(before, after);
  EXPECT_EQ(replayed.get_draft("job-000001").first, draft_before.first);
  // New ids continue after the replayed ones.
  EXPECT_EQ(replayed.create_job(sample_spec(), {}), "job-000003");
}

TEST(Persistence, TornFinalLineToleratedEarlierDamageRejected) {
  TempDir dir;
  json before;
  {
    JobService service(mock_gateway(), inline_options(dir.path()));
    before = job_view(service.get_job(service.create_job(sample_spec(), {})));
  }
  const auto log = dir.path() / "job-000001.job.log";
  std::ofstream(log, std::ios::app) << R"({"type":"state","sta)";
  {
    JobService replayed(mock_gateway(), inline_options(dir.path()));
    EXPECT_EQ(job_view(replayed.get_job("job-000001")), before);
  }
  std::ofstream(log, std::ios::app) << "\n" << json{{"type", "state"}, {"state", {{"kind", "Failed"}}}, {"at", 1}}.dump() << "\n";
  EXPECT_ERRC(JobService(mock_gateway(), inline_options(dir.path())), Errc::CorruptRecord);
}

TEST(Persistence, FailInterruptedMarksInFlightJobs) {
  TempDir dir;
  {
    ManualExecutor exec;
    auto options = inline_options(dir.path());
    options.executor = exec.executor();
    JobService service(mock_gateway(), options);
    service.create_job(sample_spec(), {});  // left PlanPending
    const auto b = service.create_job(sample_spec(), {});
    exec.tasks.erase(exec.tasks.begin());
    exec.run_all();
    ASSERT_EQ(service.get_job(b).state.kind, JobState::Kind::AwaitingApproval);
    service.approve(b);  // left Generating
    service.create_job(sample_spec(), {});
    exec.tasks.clear();
  }
  JobService replayed(mock_gateway(), inline_options(dir.path()));
  EXPECT_EQ(replayed.get_job("job-000002").state.kind, JobState::Kind::Generating);
  EXPECT_EQ(replayed.fail_interrupted(), 3u);
  for (const auto& id : replayed.job_ids()) {
    const auto s = replayed.get_job(id).state;
    EXPECT_EQ(s.kind, JobState::Kind::Failed);
    EXPECT_EQ(s.reason, "interrupted by restart");
  }
  EXPECT_EQ(replayed.fail_interrupted(), 0u);
}

TEST(Concurrency, OneWinnerPerRevision) {
  JobService service(mock_gateway(), inline_options());
  const auto id = service.create_job(sample_spec(), {});
  for (int round = 0; round < 20; ++round) {
    const auto rev = service.get_job(id).plan.revision;
    std::atomic<int> wins{0}, conflicts{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        try {
          service.edit_plan(id, edit::Rename{0, "Title " + std::to_string(round) + "-" + std::to_string(t)}, rev);
          ++wins;
        } catch (const Error& e) {
          if (e.code() == Errc::RevisionMismatch) ++conflicts;
        }
      });
    }
    for (auto& t : threads) t.join();
    ASSERT_EQ(wins.load(), 1);
    ASSERT_EQ(conflicts.load(), 7);
    ASSERT_EQ(service.get_job(id).plan.revision, rev + 1);
  }
}

TEST(JobService, RandomOperationSequencesKeepInvariantsProperty) {
  TempDir dir;
  std::mt19937 rng(31);
  std::vector<json> live;
  {
    JobService service(mock_gateway(), inline_options(dir.path()));
    service.set_transition_observer([&](const std::string&, const JobState& from, const JobState& to) {
      ASSERT_TRUE(is_legal_transition(from, to));
    });
    std::vector<std::string> ids;
    for (int op = 0; op < 400; ++op) {
      const auto choice = rng() % 6;
      if (choice == 0 || ids.empty()) {
        GenerationConfig c;
        c.mode = static_cast<GenerationMode>(rng() % 4);
        ids.push_back(service.create_job(sample_spec(), c));
        continue;
      }
      const auto& id = ids[rng() % ids.size()];
      const auto job = service.get_job(id);
      try {
        switch (choice) {
          case 1: service.edit_plan(id, edit::Rename{rng() % 4, "Renamed " + std::to_string(op)}, job.plan.revision); break;
          case 2: service.edit_plan(id, edit::Insert{rng() % 5, "Inserted " + std::to_string(op)}, job.plan.revision); break;
          case 3: service.edit_plan(id, edit::Remove{rng() % 4}, job.plan.revision); break;
          case 4: service.edit_plan(id, edit::Move{rng() % 4, rng() % 4}, job.plan.revision + rng() % 2); break;
          default: service.approve(id); break;
        }
      } catch (const Error& e) {
        const auto c = e.code();
        ASSERT_TRUE(c == Errc::OutOfBounds || c == Errc::RevisionMismatch || c == Errc::PlanLocked ||
                    c == Errc::WrongState || c == Errc::EmptyPlan || c == Errc::DuplicateTitle || c == Errc::PlanTooLarge)
            << e.what();
        ASSERT_EQ(job_view(service.get_job(id)), job_view(job)) << "failed op changed state";
      }
      const auto after = service.get_job(id);
      if (after.plan.approved) ASSERT_NE(after.state.kind, JobState::Kind::AwaitingApproval);
      if (after.state.kind == JobState::Kind::Complete) ASSERT_TRUE(after.draft.has_value());
    }
    for (const auto& id : service.job_ids()) live.push_back(job_view(service.get_job(id)));
  }
  JobService replayed(mock_gateway(), inline_options(dir.path()));
  std::vector<json> again;
  for (const auto& id : replayed.job_ids()) again.push_back(job_view(replayed.get_job(id)));
  EXPECT_EQ(live, again);
}

TEST(WorkerPoolTest, RunsAllTasksAndDrains) {
  WorkerPool pool(3);
  std::atomic<int> done{0};
  for (int i = 0; i < 100; ++i) pool.submit([&] { ++done; });
  pool.drain();
  EXPECT_EQ(done.load(), 100);
}

TEST(WorkerPoolTest, ServiceCompletesInBackground) {
  WorkerPool pool(2);
  ServiceOptions options;
  options.executor = pool.executor();
  JobService service(mock_gateway(), options);
  const auto id = service.create_job(sample_spec(), {});
  pool.drain();
  service.approve(id);
  pool.drain();
  EXPECT_EQ(service.get_job(id).state.kind, JobState::Kind::Complete);
}

TEST(Router, FullFlowAndStatusCodes) {
  JobService service(mock_gateway(), inline_options());
  ApiRouter router(service);
  auto created = router.handle("POST", "/jobs", spec_body().dump());
  ASSERT_EQ(created.status, 201) << created.body;
  const auto id = body_of(created)["job_id"].get<std::string>();

  auto got = router.handle("GET", "/jobs/" + id, "");
  ASSERT_EQ(got.status, 200);
  EXPECT_EQ(body_of(got)["state"]["kind"], "AwaitingApproval");
  EXPECT_EQ(body_of(got)["plan"]["titles"].size(), 3u);

  auto edit = router.handle("PATCH", "/jobs/" + id + "/plan",
                            json{{"expected_revision", 0}, {"edit", {{"op", "rename"}, {"index", 0}, {"text", "Recitals"}}}}.dump());
  ASSERT_EQ(edit.status, 200) << edit.body;
  EXPECT_EQ(body_of(edit)["revision"], 1);
  auto stale = router.handle("PATCH", "/jobs/" + id + "/plan",
                             json{{"expected_revision", 0}, {"edit", {{"op", "remove"}, {"index", 0}}}}.dump());
  EXPECT_EQ(stale.status, 409);
  EXPECT_EQ(body_of(stale)["code"], "RevisionMismatch");
  auto oob = router.handle("PATCH", "/jobs/" + id + "/plan",
                           json{{"expected_revision", 1}, {"edit", {{"op", "remove"}, {"index", 9}}}}.dump());
  EXPECT_EQ(oob.status, 422);
  auto bad_op = router.handle("PATCH", "/jobs/" + id + "/plan",
                              json{{"expected_revision", 1}, {"edit", {{"op", "explode"}}}}.dump());
  EXPECT_EQ(bad_op.status, 400);
  EXPECT_EQ(router.handle("GET", "/jobs/" + id + "/draft", "").status, 409);

  auto approved = router.handle("POST", "/jobs/" + id + "/approve", "");
  ASSERT_EQ(approved.status, 202);
  EXPECT_EQ(body_of(approved)["state"]["kind"], "Complete");
  EXPECT_EQ(router.handle("POST", "/jobs/" + id + "/approve", "").status, 409);

  auto draft = router.handle("GET", "/jobs/" + id + "/draft", "");
  ASSERT_EQ(draft.status, 200);
  EXPECT_EQ(body_of(draft)["draft"]["sections"][0]["title"], "Recitals");
  EXPECT_TRUE(body_of(draft)["trace"].contains("calls"));

  auto eval = router.handle("POST", "/jobs/" + id + "/evaluate", R"({"reference":"Recitals and terms."})");
  ASSERT_EQ(eval.status, 200);
  EXPECT_TRUE(body_of(eval)["metrics"].contains("bleu"));
  EXPECT_EQ(body_of(eval)["judge_score"], "absent");
  EXPECT_EQ(router.handle("POST", "/jobs/" + id + "/evaluate", R"({"reference":""})").status, 422);

  EXPECT_EQ(body_of(router.handle("GET", "/jobs", ""))["jobs"].size(), 1u);
}

TEST(Router, RejectsBadRequests) {
  JobService service(mock_gateway(), inline_options());
  ApiRouter router(service);
  EXPECT_EQ(router.handle("GET", "/nothing", "").status, 404);
  EXPECT_EQ(router.handle("GET", "/jobs/job-999999", "").status, 404);
  EXPECT_EQ(router.handle("DELETE", "/jobs", "").status, 405);
  EXPECT_EQ(router.handle("POST", "/jobs/job-000001", "").status, 405);
  EXPECT_EQ(router.handle("POST", "/jobs", "not json").status, 400);
  EXPECT_EQ(router.handle("POST", "/jobs", "[1]").status, 400);
  EXPECT_EQ(router.handle("POST", "/jobs", R"({"config":{}})").status, 400);
  auto bad_mode = spec_body("sideways");
  EXPECT_EQ(router.handle("POST", "/jobs", bad_mode.dump()).status, 400);
  auto empty_title = spec_body();
  empty_title["spec"]["title"] = "";
  const auto r = router.handle("POST", "/jobs", empty_title.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(body_of(r)["code"], "InvalidSpec");
  const auto created = body_of(router.handle("POST", "/jobs", spec_body().dump()))["job_id"].get<std::string>();
  EXPECT_EQ(router.handle("PATCH", "/jobs/" + created + "/plan",
                          json{{"expected_revision", -1}, {"edit", {{"op", "remove"}, {"index", 0}}}}.dump())
                .status,
            400);
}

TEST(Router, BearerTokenRequired) {
  JobService service(mock_gateway(), inline_options());
  ApiRouter router(service, "s3cret");
  EXPECT_EQ(router.handle("GET", "/jobs", "").status, 401);
  EXPECT_EQ(router.handle("GET", "/jobs", "", "Bearer wrong").status, 401);
  EXPECT_EQ(router.handle("GET", "/jobs", "", "Bearer s3cret").status, 200);
}

TEST(Router, StatusMapping) {
  EXPECT_EQ(http_status_for(Errc::NotFound), 404);
  EXPECT_EQ(http_status_for(Errc::RevisionMismatch), 409);
  EXPECT_EQ(http_status_for(Errc::PlanLocked), 409);
  EXPECT_EQ(http_status_for(Errc::InvalidSpec), 400);
  EXPECT_EQ(http_status_for(Errc::EmptyPlan), 422);
  EXPECT_EQ(http_status_for(Errc::ExhaustedRetries), 503);
  EXPECT_EQ(http_status_for(Errc::CorruptRecord), 500);
}

TEST(Settings, FromEnvironment) {
  ::setenv("DRAFTER_LISTEN", "0.0.0.0:9123", 1);
  ::setenv("DRAFTER_DATA_DIR", "/tmp/drafter-data", 1);
  const auto s = settings_from_env();
  EXPECT_EQ(s.host, "0.0.0.0");
  EXPECT_EQ(s.port, 9123);
  EXPECT_EQ(s.data_dir, "/tmp/drafter-data");
  ::setenv("DRAFTER_LISTEN", "nope", 1);
  EXPECT_ERRC(settings_from_env(), Errc::InvalidConfig);
  ::unsetenv("DRAFTER_LISTEN");
  ::unsetenv("DRAFTER_DATA_DIR");
}

TEST(HttpServerTest, ServesOverRealSocket) {
  WorkerPool pool(2);
  ServiceOptions options;
  options.executor = pool.executor();
  JobService service(mock_gateway(), options);
  ApiRouter router(service, "tok");
  HttpServer server(router);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread serving([&] { server.serve(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  const httplib::Headers auth{{"Authorization", "Bearer tok"}};
  auto unauth = client.Get("/jobs");
  ASSERT_TRUE(unauth);
  EXPECT_EQ(unauth->status, 401);
  auto created = client.Post("/jobs", auth, spec_body().dump(), "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201) << created->body;
  const auto id = json::parse(created->body)["job_id"].get<std::string>();
  pool.drain();
  auto patched = client.Patch("/jobs/" + id + "/plan", auth,
                              json{{"expected_revision", 0}, {"edit", {{"op", "move"}, {"from", 0}, {"to", 2}}}}.dump(),
                              "application/json");
  ASSERT_TRUE(patched);
  EXPECT_EQ(patched->status, 200);
  auto approved = client.Post("/jobs/" + id + "/approve", auth, "", "application/json");
  ASSERT_TRUE(approved);
  EXPECT_EQ(approved->status, 202);
  pool.drain();
  auto draft = client.Get("/jobs/" + id + "/draft", auth);
  ASSERT_TRUE(draft);
  EXPECT_EQ(draft->status, 200);
  EXPECT_EQ(json::parse(draft->body)["draft"]["sections"][2]["title"], "Background");
  EXPECT_EQ(draft->get_header_value("Access-Control-Allow-Origin"), "*");

  server.stop();
  serving.join();
}

}  // namespace
}  // namespace drafter
