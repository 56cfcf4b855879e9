#include "drafter/section_engine.hpp"

#include <algorithm>

#include "drafter/text.hpp"

namespace drafter {

namespace {

std::string first_words(std::string_view s, std::size_t n) {
  auto words = text::split_whitespace(s);
  if (words.size() > n) words.resize(n);
  return text::join(words, " ");
}

std::string clip_words(const std::string& s, std::size_t n) {
  return estimate_tokens(s) > n ? first_words(s, n) : s;
}

std::string retrieved_block(const std::vector<RetrievedSummary>& retrieved, std::string_view heading) {
  if (retrieved.empty()) return {};
  std::string out(heading);
  out += "\n";
  for (const auto& r : retrieved) out += "- " + r.title + ": " + r.summary + "\n";
  out += "\n";
  return out;
}

std::vector<std::string> ids_of(const std::vector<RetrievedSummary>& retrieved) {
  std::vector<std::string> ids;
  ids.reserve(retrieved.size());
  for (const auto& r : retrieved) ids.push_back(r.entry_id);
  return ids;
}

ChatRequest request_for(std::string prompt, std::string tag, const GenerationConfig& config) {
  auto req = make_user_request(std::move(prompt), std::move(tag));
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  req.seed = config.seed;
  return req;
}

std::string call(Gateway& gateway, ChatRequest req, std::optional<std::size_t> section,
                 const std::vector<std::string>& retrieved_ids, GenerationTrace* trace) {
  const auto prompt_tokens = estimate_tokens(req.prompt_text());
  auto tag = req.tag;
  auto resp = gateway.complete(req);
  if (trace) {
    trace->calls.push_back({std::move(tag), section, prompt_tokens, estimate_tokens(resp.text), retrieved_ids});
  }
  return std::move(resp.text);
}

// Top-k summaries of earlier sections, best first.
std::vector<RetrievedSummary> retrieve(const MemoryHandle& memory, const std::string& query, std::size_t k,
                                       GenerationTrace* trace) {
  std::vector<RetrievedSummary> out;
  if (trace) ++trace->memory_queries;
  for (auto& hit : memory.index.query(memory.job_id, query, k, memory.embedder)) {
    out.push_back({hit.entry.id(), hit.entry.section_index, hit.entry.title, hit.entry.summary, hit.score});
  }
  return out;
}

void fit_to_budget(SectionContext& ctx) {
  while (ctx.estimated_tokens() > ctx.budget_tokens && !ctx.retrieved.empty()) ctx.retrieved.pop_back();
  if (ctx.estimated_tokens() <= ctx.budget_tokens) return;

  const auto without_description = ctx.estimated_tokens() - estimate_tokens(ctx.description);
  if (without_description > ctx.budget_tokens) {
    throw Error(Errc::InvalidConfig, "context budget of " + std::to_string(ctx.budget_tokens) +
                                         " tokens cannot hold the titles alone");
  }
  ctx.description = first_words(ctx.description, ctx.budget_tokens - without_description);
}

void store_summary(const MemoryHandle& memory, const SectionRecord& record, GenerationTrace* trace) {
  MemoryEntry entry;
  entry.job_id = memory.job_id;
  entry.section_index = record.index;
  entry.title = record.title;
  entry.summary = record.summary;
  entry.embedding = embed(record.summary, memory.embedder);
  memory.index.upsert(std::move(entry));
  if (trace) ++trace->memory_upserts;
}

// Content + summary for one prompt, with the summarize fallback.
SectionRecord produce(Gateway& gateway, const GenerationConfig& config, const std::string& prompt,
                      const std::string& template_id, std::size_t index, const std::string& title,
                      const std::vector<std::string>& retrieved_ids, GenerationTrace* trace) {
  SectionRecord record;
  record.index = index;
  record.title = title;

  std::optional<ContentAndSummary> parts;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto reply = call(gateway, request_for(prompt, template_id, config), index, retrieved_ids, trace);
    parts = split_summary(reply);
    if (!parts) parts = ContentAndSummary{text::trim(reply), {}};
    if (!parts->content.empty()) break;
  }
  if (parts->content.empty()) throw Error(Errc::GenerationFailed, "model returned no content for '" + title + "'");

  record.content = std::move(parts->content);
  record.summary = std::move(parts->summary);
  if (record.summary.empty()) {
    const auto summary_prompt = render_template(
        "summarize", {{"summary_words", std::to_string(config.summary_max_words)},
                      {"section_title", title.empty() ? "passage " + std::to_string(index + 1) : title},
                      {"content", record.content}});
    record.summary = text::trim(call(gateway, request_for(summary_prompt, "summarize", config), index, {}, trace));
  }
  if (record.summary.empty()) record.summary = first_words(record.content, config.summary_max_words);
  record.summary = clip_words(record.summary, config.summary_max_words);
  record.token_estimate = estimate_tokens(record.content);
  return record;
}

DraftDocument run_long_prompt(const DocumentSpec& spec, Gateway& gateway, const GenerationConfig& config,
                              const PipelineHooks& hooks) {
  if (hooks.on_section_start) hooks.on_section_start(0, 1);
  const auto prompt = render_template("long_prompt", {{"title", trim(spec.title)}, {"description", trim(spec.description)}});
  std::string reply;
  try {
    reply = text::trim(call(gateway, request_for(prompt, "long_prompt", config), 0, {}, hooks.trace));
  } catch (const Error& e) {
    throw SectionFailure(0, e.what());
  }
  if (reply.empty()) throw SectionFailure(0, "model returned an empty document");
  if (hooks.on_refining) hooks.on_refining();

  DraftDocument draft;
  draft.spec_id = spec.id;
  draft.config = config;
  SectionRecord record;
  record.index = 0;
  record.title = trim(spec.title);
  record.content = reply;
  record.summary = first_words(reply, config.summary_max_words);
  record.token_estimate = estimate_tokens(reply);
  draft.sections.push_back(std::move(record));
  draft.provenance.emplace_back();
  draft.assembled_text = reply;
  return draft;
}

DraftDocument run_chunked(const DocumentSpec& spec, Gateway& gateway, const MemoryHandle& memory,
                          const GenerationConfig& config, const PipelineHooks& hooks) {
  DraftDocument draft;
  draft.spec_id = spec.id;
  draft.config = config;
  const auto n = std::max<std::size_t>(1, config.retrieval_chunks);
  const auto description = trim(spec.description);

  for (std::size_t i = 0; i < n; ++i) {
    if (hooks.on_section_start) hooks.on_section_start(i, n);
    try {
      SectionContext ctx;
      ctx.doc_title = trim(spec.title);
      ctx.description = description;
      ctx.section_index = i;
      ctx.section_title = "Passage " + std::to_string(i + 1) + " of " + std::to_string(n);
      ctx.budget_tokens = config.context_token_budget;
      if (i > 0 && config.top_k > 0) {
        ctx.retrieved = retrieve(memory, retrieval_query(ctx.section_title, description), config.top_k, hooks.trace);
      }
      fit_to_budget(ctx);

      const auto prompt = render_template(
          "chunk", {{"title", ctx.doc_title},
                    {"description", ctx.description},
                    {"retrieved_block", retrieved_block(ctx.retrieved, "Summaries of earlier passages:")},
                    {"chunk_number", std::to_string(i + 1)},
                    {"chunk_count", std::to_string(n)},
                    {"summary_words", std::to_string(config.summary_max_words)}});
      auto record = produce(gateway, config, prompt, "chunk", i, "", ids_of(ctx.retrieved), hooks.trace);
      store_summary(memory, record, hooks.trace);
      draft.provenance.push_back(ids_of(ctx.retrieved));
      draft.sections.push_back(std::move(record));
    } catch (const SectionFailure&) {
      throw;
    } catch (const Error& e) {
      throw SectionFailure(i, e.what());
    }
  }
  if (hooks.on_refining) hooks.on_refining();
  draft.assembled_text = refine_document(draft.sections, config, gateway, hooks.trace);
  return draft;
}

}  // namespace

std::size_t SectionContext::estimated_tokens() const {
  std::size_t total = estimate_tokens(doc_title) + estimate_tokens(description) + estimate_tokens(section_title);
  for (const auto& r : retrieved) total += estimate_tokens(r.title) + estimate_tokens(r.summary);
  return total;
}

std::size_t GenerationTrace::calls_with_template(std::string_view template_id) const {
  return static_cast<std::size_t>(
      std::count_if(calls.begin(), calls.end(), [&](const TraceCall& c) { return c.template_id == template_id; }));
}

std::string retrieval_query(std::string_view section_title, std::string_view description) {
  std::string q(section_title);
  q += "\n";
  q += description;
  return q;
}

SectionContext build_context(const DocumentSpec& spec, const SectionPlan& plan, std::size_t index,
                             const MemoryHandle& memory, const GenerationConfig& config, GenerationTrace* trace) {
  if (!plan.approved) throw Error(Errc::InvalidRequest, "plan must be approved before generation");
  if (index >= plan.size()) {
    throw Error(Errc::OutOfBounds, "section " + std::to_string(index) + " of " + std::to_string(plan.size()));
  }
  SectionContext ctx;
  ctx.doc_title = trim(spec.title);
  ctx.description = trim(spec.description);
  ctx.section_index = index;
  ctx.section_title = plan.titles[index].text;
  ctx.budget_tokens = config.context_token_budget;

  if (config.mode == GenerationMode::FullWrapper && index > 0 && config.top_k > 0) {
    ctx.retrieved = retrieve(memory, retrieval_query(ctx.section_title, ctx.description), config.top_k, trace);
  }
  fit_to_budget(ctx);
  return ctx;
}

std::optional<ContentAndSummary> split_summary(std::string_view reply) {
  constexpr std::string_view kMarker = "SUMMARY:";
  const auto pos = reply.rfind(kMarker);
  if (pos == std::string_view::npos) return std::nullopt;
  return ContentAndSummary{text::trim(reply.substr(0, pos)), text::trim(reply.substr(pos + kMarker.size()))};
}

SectionRecord generate_section(const SectionContext& context, Gateway& gateway, const GenerationConfig& config,
                               const MemoryHandle* memory, GenerationTrace* trace) {
  const auto prompt = render_template(
      "section", {{"title", context.doc_title},
                  {"description", context.description},
                  {"retrieved_block", retrieved_block(context.retrieved, "Summaries of related sections already written:")},
                  {"section_title", context.section_title},
                  {"summary_words", std::to_string(config.summary_max_words)}});
  auto record = produce(gateway, config, prompt, "section", context.section_index, context.section_title,
                        ids_of(context.retrieved), trace);
  if (memory && config.retrieval_enabled()) store_summary(*memory, record, trace);
  return record;
}

DraftDocument run_pipeline(const DocumentSpec& spec, const SectionPlan& plan, Gateway& gateway,
                           const MemoryHandle& memory, const GenerationConfig& config, const PipelineHooks& hooks) {
  if (config.retrieval_enabled()) memory.index.remove_job(memory.job_id);

  switch (config.mode) {
    case GenerationMode::LongPromptOnly:
      return run_long_prompt(spec, gateway, config, hooks);
    case GenerationMode::RetrievalOnly:
      return run_chunked(spec, gateway, memory, config, hooks);
    case GenerationMode::FullWrapper:
    case GenerationMode::StructureOnly:
      break;
  }

  if (!plan.approved) throw Error(Errc::InvalidRequest, "plan must be approved before generation");
  if (plan.titles.empty()) throw Error(Errc::EmptyPlan, "approved plan has no sections");

  DraftDocument draft;
  draft.spec_id = spec.id;
  draft.config = config;
  const auto n = plan.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (hooks.on_section_start) hooks.on_section_start(i, n);
    try {
      const auto ctx = build_context(spec, plan, i, memory, config, hooks.trace);
      draft.sections.push_back(generate_section(ctx, gateway, config, &memory, hooks.trace));
      draft.provenance.push_back(ids_of(ctx.retrieved));
    } catch (const Error& e) {
      throw SectionFailure(i, e.what());
    }
  }
  if (hooks.on_refining) hooks.on_refining();
  draft.assembled_text = refine_document(draft.sections, config, gateway, hooks.trace);
  return draft;
}

std::string assemble_sections(const std::vector<SectionRecord>& sections) {
  std::string out;
  std::size_t number = 0;
  for (const auto& s : sections) {
    std::string block;
    if (!s.title.empty()) block = std::to_string(++number) + ". " + s.title;
    const auto body = text::rtrim(s.content);
    if (!body.empty()) {
      if (!block.empty()) block += "\n\n";
      block += body;
    }
    if (block.empty()) continue;
    if (!out.empty()) out += "\n\n";
    out += block;
  }
  return text::rtrim(out);
}

bool headings_in_order(std::string_view doc, const std::vector<SectionRecord>& sections) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= doc.size()) {
    auto end = doc.find('\n', pos);
    if (end == std::string_view::npos) end = doc.size();
    auto line = doc.substr(pos, end - pos);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }

  std::size_t number = 0;
  std::size_t last_line = 0;
  bool first = true;
  for (const auto& s : sections) {
    if (s.title.empty()) continue;
    const auto heading = std::to_string(++number) + ". " + s.title;
    std::size_t hits = 0;
    std::size_t at = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i] == heading) {
        ++hits;
        at = i;
      }
    }
    if (hits != 1) return false;
    if (!first && at <= last_line) return false;
    first = false;
    last_line = at;
  }
  return true;
}

std::string refine_document(const std::vector<SectionRecord>& sections, const GenerationConfig& config,
                            Gateway& gateway, GenerationTrace* trace) {
  auto assembled = assemble_sections(sections);
  if (!config.llm_polish) return assembled;
  try {
    const auto prompt = render_template("polish", {{"document", assembled}});
    auto polished = text::rtrim(text::trim(call(gateway, request_for(prompt, "polish", config), std::nullopt, {}, trace)));
    if (!polished.empty() && headings_in_order(polished, sections)) return polished;
  } catch (const Error&) {
    // Fall through to the deterministic assembly.
  }
  return assembled;
}

}  // namespace drafter
