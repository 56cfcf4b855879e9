// drafter: command-line front end for planning, generation, de-identification,
// scoring, agreement statistics, ablation runs and the HTTP service.
//
// Exit codes: 0 ok, 1 usage, 2 bad input, 3 provider failure, 4 internal error.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "drafter/agreement.hpp"
#include "drafter/corpus.hpp"
#include "drafter/deid.hpp"
#include "drafter/error.hpp"
#include "drafter/gateway.hpp"
#include "drafter/json_io.hpp"
#include "drafter/judge.hpp"
#include "drafter/lexical_metrics.hpp"
#include "drafter/memory_index.hpp"
#include "drafter/planner.hpp"
#include "drafter/section_engine.hpp"
#include "drafter/service.hpp"
#include "drafter/text.hpp"

namespace {

using namespace drafter;

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kProvider = 3, kInternal = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::ProviderError:
    case Errc::Timeout:
    case Errc::ExhaustedRetries:
    case Errc::DetectorUnavailable:
    case Errc::PlanningFailed:
    case Errc::GenerationFailed:
    case Errc::SectionFailed:
    case Errc::AllCasesFailed:
      return kProvider;
    default:
      return kInput;
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Unreadable, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRecord, path + ": " + e.what());
  }
}

/// Calls `f` with each non-blank line's JSON value and its 1-based line number.
template <typename F>
void for_each_jsonl(const std::string& path, F&& f) {
  std::istringstream in(read_text(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedRecord, path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    f(j, line_no);
  }
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error(Errc::Unreadable, "cannot write " + path);
}

std::shared_ptr<Gateway> gateway_from(const std::string& provider_path) {
  std::string path = provider_path;
  if (path.empty()) {
    if (const char* env = std::getenv("DRAFTER_PROVIDER_CONFIG"); env && *env) path = env;
  }
  if (path.empty()) throw UsageError("a provider config is required (--provider or DRAFTER_PROVIDER_CONFIG)");
  return Gateway::from_config(load_provider_config(path));
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) line += "  ";
      line += r[c];
      if (c + 1 < r.size()) line.append(width[c] - r[c].size(), ' ');
    }
    out += text::rtrim(line) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation settings shared by plan, generate and experiment.

struct GenerationFlags {
  std::string config_path;
  std::optional<std::string> mode;
  std::optional<std::size_t> top_k;
  std::optional<std::size_t> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chunks;
  bool polish = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "Generation config JSON; flags override it");
    cmd.add_option("--mode", mode, "full|long|retrieval|structure");
    cmd.add_option("--top-k", top_k, "Summaries retrieved per section");
    cmd.add_option("--budget", budget, "Context token budget");
    cmd.add_option("--seed", seed, "Sampling seed");
    cmd.add_option("--chunks", chunks, "Passages in retrieval-only mode");
    cmd.add_flag("--polish", polish, "Run the final polish pass");
  }

  GenerationConfig resolve() const {
    GenerationConfig c;
    if (!config_path.empty()) c = read_json(config_path).get<GenerationConfig>();
    if (mode) {
      const auto m = parse_mode(*mode);
      if (!m) throw UsageError("unknown mode '" + *mode + "'");
      c.mode = *m;
    }
    if (top_k) c.top_k = *top_k;
    if (budget) c.context_token_budget = *budget;
    if (seed) c.seed = *seed;
    if (chunks) c.retrieval_chunks = *chunks;
    if (polish) c.llm_polish = true;
    return c;
  }
};

bool uses_plan(GenerationMode mode) {
  return mode == GenerationMode::FullWrapper || mode == GenerationMode::StructureOnly;
}

// ---------------------------------------------------------------------------

struct PlanCmd {
  std::string spec_path, provider, out;
  GenerationFlags flags;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("plan", "Propose section titles for a document spec");
    cmd->add_option("--spec", spec_path, "DocumentSpec JSON")->required();
    cmd->add_option("--provider", provider, "Provider config JSON");
    cmd->add_option("--out", out, "Write the plan JSON here");
    flags.attach(*cmd);
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto spec = read_json(spec_path).get<DocumentSpec>();
    auto gateway = gateway_from(provider);
    const auto plan = generate_plan(spec, *gateway, flags.resolve());
    std::cout << render_numbered(plan.texts()) << "\n";
    if (!out.empty()) write_output(out, json(plan).dump(2) + "\n");
  }
};

struct GenerateCmd {
  std::string spec_path, provider, plan_path, out;
  bool auto_approve = false;
  GenerationFlags flags;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("generate", "Generate a draft document");
    cmd->add_option("--spec", spec_path, "DocumentSpec JSON")->required();
    cmd->add_option("--provider", provider, "Provider config JSON");
    cmd->add_option("--plan", plan_path, "Reviewed plan JSON (titles array); implies approval");
    cmd->add_flag("--auto-approve", auto_approve, "Approve the proposed plan without review");
    cmd->add_option("--out", out, "Write draft and trace JSON here");
    flags.attach(*cmd);
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto spec = read_json(spec_path).get<DocumentSpec>();
    const auto config = flags.resolve();
    auto gateway = gateway_from(provider);

    SectionPlan plan;
    if (uses_plan(config.mode)) {
      if (!plan_path.empty()) {
        plan = approve_plan(make_plan(read_json(plan_path).get<SectionPlan>().texts()));
      } else if (auto_approve) {
        plan = approve_plan(generate_plan(spec, *gateway, config));
      } else {
        throw UsageError("this mode needs a plan: pass --plan or --auto-approve");
      }
    } else {
      plan.approved = true;
    }

    MemoryIndex memory;
    HashEmbedding embedder;
    GenerationTrace trace;
    PipelineHooks hooks;
    hooks.trace = &trace;
    const auto draft = run_pipeline(spec, plan, *gateway, {memory, embedder, spec.id}, config, hooks);
    if (out.empty()) {
      std::cout << draft.assembled_text << "\n";
    } else {
      write_output(out, json{{"draft", draft}, {"trace", trace}}.dump(2) + "\n");
    }
    std::cout << "model calls: " << gateway->stats().calls << "\n";
  }
};

struct DeidCmd {
  std::string in, out, detector_url;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("deid", "Redact entity spans in a JSONL batch");
    cmd->add_option("--in", in, "JSONL with id, text and optional spans")->required();
    cmd->add_option("--out", out, "Redacted JSONL")->required();
    cmd->add_option("--detector", detector_url, "Remote NER endpoint; default is the rule detector");
    cmd->callback([this] { run(); });
  }

  void run() {
    std::unique_ptr<deid::EntityDetector> detector;
    if (detector_url.empty()) {
      detector = std::make_unique<deid::RuleDetector>();
    } else {
      detector = std::make_unique<deid::RemoteDetector>(detector_url);
    }
    std::string output;
    std::map<std::string, std::size_t> counts;
    std::size_t records = 0, leaks = 0;
    for_each_jsonl(in, [&](const json& j, std::size_t line) {
      const auto text = require_string(j, "text");
      std::vector<deid::EntitySpan> spans;
      try {
        spans = j.contains("spans") ? j.at("spans").get<std::vector<deid::EntitySpan>>() : detector->detect(text);
        const auto redacted = deid::redact(text, spans);
        const auto report = deid::verify(text, spans, redacted);
        for (const auto& [label, n] : report.counts) counts[label] += n;
        leaks += report.residual_hits.size();
        json rec = {{"id", j.value("id", std::to_string(line))}, {"text", redacted}};
        output += rec.dump() + "\n";
        ++records;
      } catch (const Error& e) {
        if (e.code() == Errc::DetectorUnavailable) throw;
        throw Error(e.code(), in + " line " + std::to_string(line) + ": " + e.what());
      }
    });
    write_output(out, output);
    std::cout << "records: " << records << "\n";
    for (const auto& [label, n] : counts) std::cout << label << ": " << n << "\n";
    std::cout << "residual surfaces: " << leaks << "\n";
    if (leaks > 0) throw Error(Errc::InvalidRequest, "redaction left entity surfaces in the output");
  }
};

struct EvalCmd {
  std::string pairs, format = "table";

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "Score candidates against references");
    cmd->add_option("--pairs", pairs, "JSONL with candidate and reference")->required();
    cmd->add_option("--format", format, "table|records")->check(CLI::IsMember({"table", "records"}));
    cmd->callback([this] { run(); });
  }

  void run() {
    std::vector<std::vector<std::string>> rows{{"id", "RL-P", "RL-R", "RL-F1", "BLEU", "METEOR"}};
    std::string records;
    for_each_jsonl(pairs, [&](const json& j, std::size_t line) {
      const auto id = j.value("id", std::to_string(line));
      const auto r = metrics::score_pair(require_string(j, "candidate"), require_string(j, "reference"));
      rows.push_back({id, fixed(r.rouge_l.precision), fixed(r.rouge_l.recall), fixed(r.rouge_l.f1), fixed(r.bleu),
                      fixed(r.meteor) + (r.meteor_optimal ? "" : "~")});
      json rec = r;
      rec["id"] = id;
      records += rec.dump() + "\n";
    });
    std::cout << (format == "records" ? records : aligned(rows));
  }
};

struct JudgeCmd {
  std::string cases, provider, format = "table";
  int samples = 1;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("judge", "Score generated documents with the judge prompt");
    cmd->add_option("--cases", cases, "JSONL with doc_des, actual_document, generated_document")->required();
    cmd->add_option("--provider", provider, "Judge provider config JSON");
    cmd->add_option("--samples", samples, "Samples per case")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Seed of the first sample");
    cmd->add_option("--format", format, "table|records")->check(CLI::IsMember({"table", "records"}));
    cmd->callback([this] { run(); });
  }

  void run() {
    std::vector<JudgeCase> list;
    for_each_jsonl(cases, [&](const json& j, std::size_t) {
      list.push_back({require_string(j, "doc_des"), require_string(j, "actual_document"),
                      require_string(j, "generated_document")});
    });
    auto gateway = gateway_from(provider);
    JudgeOptions options;
    options.samples = samples;
    options.seed = seed;
    const auto report = run_geval(list, *gateway, options);
    if (format == "records") {
      std::cout << json(report).dump(2) << "\n";
      return;
    }
    std::vector<std::vector<std::string>> rows{{"case", "score", "note"}};
    for (const auto& c : report.cases) {
      rows.push_back({std::to_string(c.index), c.score ? fixed(*c.score, 2) : "-",
                      c.error ? c.error_message : (c.salvaged ? "salvaged" : "")});
    }
    std::cout << aligned(rows) << "mean: " << fixed(report.mean, 2) << " over " << report.scored << " case(s), "
              << report.failed << " failed\n";
  }
};

struct IaaCmd {
  std::string ratings, format = "table";

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("iaa", "Agreement statistics per (model, criterion)");
    cmd->add_option("--ratings", ratings, "CSV doc_id,model_id,rater_id,criterion,score")->required();
    cmd->add_option("--format", format, "table|records")->check(CLI::IsMember({"table", "records"}));
    cmd->callback([this] { run(); });
  }

  static json outcome_json(const iaa::StatOutcome& o) {
    json j = {{"value", o.value ? json(*o.value) : json(nullptr)}, {"flags", o.flags}};
    if (!o.error.empty()) j["error"] = o.error;
    return j;
  }

  void run() {
    const auto rows = iaa::evaluate_all(iaa::group_ratings(iaa::load_ratings_csv(ratings)));
    if (format == "table") {
      std::cout << iaa::format_table(rows);
      return;
    }
    for (const auto& r : rows) {
      json j = {{"model_id", r.model_id},
                {"criterion", r.criterion},
                {"items", r.items},
                {"raters", r.raters},
                {"fleiss_kappa", outcome_json(r.fleiss)},
                {std::string(iaa::kCohenVariant), outcome_json(r.cohen)},
                {std::string(iaa::kIccVariant), outcome_json(r.icc)},
                {std::string(iaa::kAlphaVariant), outcome_json(r.alpha)},
                {"pearson_mean_pairwise", outcome_json(r.pearson)}};
      std::cout << j.dump() << "\n";
    }
  }
};

struct ExperimentCmd {
  std::string corpus, configs, provider, judge, out, format = "table";
  std::optional<std::uint64_t> split_seed;
  std::size_t parallel = 2;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("experiment", "Run generation configs over a corpus and score them");
    cmd->add_option("--corpus", corpus, "Corpus JSONL")->required();
    cmd->add_option("--configs", configs, "JSON array of generation configs")->required();
    cmd->add_option("--provider", provider, "Generator provider config JSON");
    cmd->add_option("--judge", judge, "Judge provider config JSON; omit to skip judging");
    cmd->add_option("--split-seed", split_seed, "Evaluate only the held-out record of each category");
    cmd->add_option("--parallel", parallel, "Records processed concurrently")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out, "Write the JSON report here");
    cmd->add_option("--format", format, "table|records")->check(CLI::IsMember({"table", "records"}));
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto ingested = ingest(corpus);
    for (const auto& e : ingested.errors) std::cerr << corpus << " line " << e.line << ": " << e.message << "\n";
    auto records = ingested.records;
    if (split_seed) {
      auto split = split_one_per_category(records, *split_seed);
      for (const auto& c : split.singleton_categories) std::cerr << "category '" << c << "' has a single record\n";
      records = std::move(split.test);
    }
    const auto list = read_json(configs);
    if (!list.is_array()) throw Error(Errc::InvalidRequest, configs + ": expected a JSON array");
    std::vector<GenerationConfig> config_list;
    for (const auto& c : list) config_list.push_back(c.get<GenerationConfig>());

    auto gateway = gateway_from(provider);
    std::shared_ptr<Gateway> judge_gateway;
    ExperimentOptions options;
    options.parallel_records = parallel;
    if (!judge.empty()) {
      judge_gateway = Gateway::from_config(load_provider_config(judge));
      options.judge = judge_gateway.get();
    }
    const auto runs = run_experiment(records, config_list, *gateway, options);
    const auto report = experiment_report(runs);
    if (!out.empty()) write_output(out, report.dump(2) + "\n");
    std::cout << (format == "records" ? report.dump(2) + "\n" : format_experiment_table(runs));
  }
};

HttpServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeCmd {
  std::string config_path;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> data_dir;
  std::optional<std::string> provider;
  std::size_t workers = 2;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("serve", "Run the HTTP job service");
    cmd->add_option("--config", config_path, "Service config JSON");
    cmd->add_option("--host", host, "Listen address");
    cmd->add_option("--port", port, "Listen port; 0 picks a free one");
    cmd->add_option("--data-dir", data_dir, "Directory for job logs");
    cmd->add_option("--provider", provider, "Provider config JSON");
    cmd->add_option("--workers", workers, "Background workers")->check(CLI::PositiveNumber);
    cmd->callback([this] { run(); });
  }

  void run() {
    ServiceSettings settings;
    if (!config_path.empty()) {
      const auto j = read_json(config_path);
      settings.host = j.value("host", settings.host);
      settings.port = j.value("port", settings.port);
      settings.data_dir = j.value("data_dir", settings.data_dir.string());
      settings.auth_token_env = j.value("auth_token_env", settings.auth_token_env);
      settings.provider_config_path = j.value("provider_config", settings.provider_config_path);
    }
    settings = settings_from_env(settings);
    if (host) settings.host = *host;
    if (port) settings.port = *port;
    if (data_dir) settings.data_dir = *data_dir;
    if (provider) settings.provider_config_path = *provider;

    std::string token;
    if (const char* t = std::getenv(settings.auth_token_env.c_str()); t) token = t;

    WorkerPool pool(workers);
    ServiceOptions options;
    options.data_dir = settings.data_dir;
    options.executor = pool.executor();
    JobService service(gateway_from(settings.provider_config_path), options);
    if (const auto n = service.fail_interrupted(); n > 0) std::cerr << n << " interrupted job(s) marked Failed\n";
    ApiRouter router(service, token);
    HttpServer server(router);
    const int bound = server.bind(settings.host, settings.port);
    if (bound < 0) throw Error(Errc::InvalidConfig, "cannot bind " + settings.host + ":" + std::to_string(settings.port));
    std::cout << "listening on " << settings.host << ":" << bound << (token.empty() ? " (no auth)" : "") << std::endl;
    g_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    server.serve();
    g_server = nullptr;
    pool.drain();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"drafter: section-wise document drafting and evaluation"};
  app.require_subcommand(1);
  PlanCmd plan;
  GenerateCmd generate;
  DeidCmd deid_cmd;
  EvalCmd eval;
  JudgeCmd judge;
  IaaCmd iaa_cmd;
  ExperimentCmd experiment;
  ServeCmd serve;
  plan.attach(app);
  generate.attach(app);
  deid_cmd.attach(app);
  eval.attach(app);
  judge.attach(app);
  iaa_cmd.attach(app);
  experiment.attach(app);
  serve.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
