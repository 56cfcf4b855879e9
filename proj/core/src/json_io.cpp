#include "drafter/json_io.hpp"

#include "drafter/error.hpp"

namespace drafter {

const json& require_field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw Error(Errc::InvalidRequest, std::string("missing field '") + name + "'");
  return j.at(name);
}

std::string require_string(const json& j, const char* name) {
  const auto& v = require_field(j, name);
  if (!v.is_string()) throw Error(Errc::InvalidRequest, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

namespace {

template <typename T>
void optional_field(const json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::InvalidRequest, std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

void to_json(json& j, const DocumentSpec& v) {
  j = {{"id", v.id}, {"title", v.title}, {"description", v.description}, {"category", v.category}};
}

void from_json(const json& j, DocumentSpec& v) {
  if (!j.is_object()) throw Error(Errc::InvalidRequest, "spec must be an object");
  v.title = require_string(j, "title");
  v.description = require_string(j, "description");
  optional_field(j, "id", v.id);
  optional_field(j, "category", v.category);
}

void to_json(json& j, const SectionPlan& v) {
  j = {{"titles", v.texts()}, {"revision", v.revision}, {"approved", v.approved}};
}

void from_json(const json& j, SectionPlan& v) {
  std::vector<std::string> titles;
  std::uint64_t revision = 0;
  bool approved = false;
  optional_field(j, "titles", titles);
  optional_field(j, "revision", revision);
  optional_field(j, "approved", approved);
  v = make_plan(titles, revision);
  v.approved = approved;
}

void to_json(json& j, const SectionRecord& v) {
  j = {{"index", v.index},
       {"title", v.title},
       {"content", v.content},
       {"summary", v.summary},
       {"token_estimate", v.token_estimate}};
}

void from_json(const json& j, SectionRecord& v) {
  optional_field(j, "index", v.index);
  optional_field(j, "title", v.title);
  optional_field(j, "content", v.content);
  optional_field(j, "summary", v.summary);
  optional_field(j, "token_estimate", v.token_estimate);
}

void to_json(json& j, const GenerationConfig& v) {
  j = {{"mode", std::string(to_string(v.mode))},
       {"top_k", v.top_k},
       {"context_token_budget", v.context_token_budget},
       {"llm_polish", v.llm_polish},
       {"seed", v.seed},
       {"temperature", v.temperature},
       {"max_tokens", v.max_tokens},
       {"retrieval_chunks", v.retrieval_chunks},
       {"summary_max_words", v.summary_max_words}};
}

void from_json(const json& j, GenerationConfig& v) {
  if (!j.is_object()) throw Error(Errc::InvalidRequest, "config must be an object");
  if (j.contains("mode")) {
    const auto& m = j.at("mode");
    const auto mode = m.is_string() ? parse_mode(m.get<std::string>()) : std::nullopt;
    if (!mode) throw Error(Errc::InvalidRequest, "unknown generation mode " + m.dump());
    v.mode = *mode;
  }
  optional_field(j, "top_k", v.top_k);
  optional_field(j, "context_token_budget", v.context_token_budget);
  optional_field(j, "llm_polish", v.llm_polish);
  optional_field(j, "seed", v.seed);
  optional_field(j, "temperature", v.temperature);
  optional_field(j, "max_tokens", v.max_tokens);
  optional_field(j, "retrieval_chunks", v.retrieval_chunks);
  optional_field(j, "summary_max_words", v.summary_max_words);
}

void to_json(json& j, const DraftDocument& v) {
  j = {{"spec_id", v.spec_id},
       {"sections", v.sections},
       {"assembled_text", v.assembled_text},
       {"config", v.config},
       {"provenance", v.provenance}};
}

void from_json(const json& j, DraftDocument& v) {
  optional_field(j, "spec_id", v.spec_id);
  optional_field(j, "sections", v.sections);
  optional_field(j, "assembled_text", v.assembled_text);
  if (j.contains("config")) from_json(j.at("config"), v.config);
  optional_field(j, "provenance", v.provenance);
}

void to_json(json& j, const JobState& v) {
  j = {{"kind", std::string(to_string(v.kind))}};
  if (v.kind == JobState::Kind::Generating) {
    j["section_index"] = v.section_index;
    j["section_count"] = v.section_count;
  }
  if (v.kind == JobState::Kind::Failed) j["reason"] = v.reason;
}

void from_json(const json& j, JobState& v) {
  const auto kind = parse_state_kind(require_string(j, "kind"));
  if (!kind) throw Error(Errc::InvalidRequest, "unknown job state " + j.at("kind").dump());
  v = JobState{};
  v.kind = *kind;
  optional_field(j, "section_index", v.section_index);
  optional_field(j, "section_count", v.section_count);
  optional_field(j, "reason", v.reason);
}

void to_json(json& j, const GenerationTrace& v) {
  j = json::object();
  j["memory_queries"] = v.memory_queries;
  j["memory_upserts"] = v.memory_upserts;
  j["calls"] = json::array();
  for (const auto& c : v.calls) {
    json call = {{"template", c.template_id},
                 {"prompt_tokens", c.prompt_tokens},
                 {"response_tokens", c.response_tokens},
                 {"retrieved_ids", c.retrieved_ids}};
    call["section_index"] = c.section_index ? json(*c.section_index) : json(nullptr);
    j["calls"].push_back(std::move(call));
  }
}

void from_json(const json& j, GenerationTrace& v) {
  v = GenerationTrace{};
  optional_field(j, "memory_queries", v.memory_queries);
  optional_field(j, "memory_upserts", v.memory_upserts);
  if (!j.contains("calls")) return;
  for (const auto& c : j.at("calls")) {
    TraceCall call;
    optional_field(c, "template", call.template_id);
    optional_field(c, "prompt_tokens", call.prompt_tokens);
    optional_field(c, "response_tokens", call.response_tokens);
    optional_field(c, "retrieved_ids", call.retrieved_ids);
    if (c.contains("section_index") && !c.at("section_index").is_null()) {
      call.section_index = c.at("section_index").get<std::size_t>();
    }
    v.calls.push_back(std::move(call));
  }
}

void to_json(json& j, const CaseResult& v) {
  j = {{"index", v.index}, {"sample_scores", v.sample_scores}, {"salvaged", v.salvaged}};
  j["score"] = v.score ? json(*v.score) : json(nullptr);
  if (v.error) {
    j["error"] = {{"code", std::string(errc_name(*v.error))}, {"message", v.error_message}};
  }
}

void to_json(json& j, const GevalReport& v) {
  j = {{"cases", v.cases}, {"mean", v.mean}, {"scored", v.scored}, {"failed", v.failed}, {"salvaged", v.salvaged}};
}

namespace deid {

void to_json(nlohmann::json& j, const EntitySpan& v) { j = {{"start", v.start}, {"end", v.end}, {"label", v.label}}; }

void from_json(const nlohmann::json& j, EntitySpan& v) {
  try {
    v.start = j.at("start").get<std::size_t>();
    v.end = j.at("end").get<std::size_t>();
    v.label = j.at("label").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidRequest, std::string("bad span: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const DeidReport& v) {
  j = {{"counts", v.counts}, {"passed", v.passed}, {"residual_hits", nlohmann::json::array()}};
  for (const auto& h : v.residual_hits) j["residual_hits"].push_back({{"surface", h.surface}, {"position", h.position}});
}

}  // namespace deid

namespace metrics {

void to_json(nlohmann::json& j, const RougeL& v) {
  j = {{"precision", v.precision}, {"recall", v.recall}, {"f1", v.f1}};
}

void to_json(nlohmann::json& j, const MetricReport& v) {
  j = {{"rouge_l", v.rouge_l}, {"bleu", v.bleu}, {"meteor", v.meteor}, {"meteor_optimal", v.meteor_optimal}};
}

}  // namespace metrics

}  // namespace drafter
