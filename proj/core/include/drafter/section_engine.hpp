#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "drafter/error.hpp"
#include "drafter/gateway.hpp"
#include "drafter/memory_index.hpp"
#include "drafter/types.hpp"

namespace drafter {

/// Where a job's section summaries live.
struct MemoryHandle {
  MemoryIndex& index;
  EmbeddingProvider& embedder;
  std::string job_id;
};

struct RetrievedSummary {
  std::string entry_id;
  std::size_t section_index = 0;
  std::string title;
  std::string summary;
  double score = 0.0;
};

/// Everything the model sees for one section besides the fixed template.
/// `estimated_tokens()` counts the title, description, section title and
/// retrieved pairs and never exceeds `budget_tokens`.
struct SectionContext {
  std::string doc_title;
  std::string description;
  std::size_t section_index = 0;
  std::string section_title;
  std::vector<RetrievedSummary> retrieved;
  std::size_t budget_tokens = 0;

  std::size_t estimated_tokens() const;
};

struct TraceCall {
  std::string template_id;
  std::optional<std::size_t> section_index;
  std::size_t prompt_tokens = 0;
  std::size_t response_tokens = 0;
  std::vector<std::string> retrieved_ids;
};

/// Machine-readable record of one run, consumed by the context inspector.
struct GenerationTrace {
  std::vector<TraceCall> calls;
  std::size_t memory_queries = 0;
  std::size_t memory_upserts = 0;

  std::size_t calls_with_template(std::string_view template_id) const;
};

/// Raised by run_pipeline when one section cannot be produced.
class SectionFailure : public Error {
 public:
  SectionFailure(std::size_t index, const std::string& reason)
      : Error(Errc::SectionFailed, "section " + std::to_string(index) + ": " + reason), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Retrieval query for one section: its title, a newline, then the spec
/// description.
std::string retrieval_query(std::string_view section_title, std::string_view description);

/// Builds the context for plan position `index`. Retrieval runs only when the
/// mode enables it and the index is past the first section; summaries over
/// budget are dropped lowest score first, and only then is the description
/// shortened.
SectionContext build_context(const DocumentSpec& spec, const SectionPlan& plan, std::size_t index,
                             const MemoryHandle& memory, const GenerationConfig& config,
                             GenerationTrace* trace = nullptr);

/// Splits a reply at the last "SUMMARY:" marker. Returns nullopt when the
/// marker is absent.
struct ContentAndSummary {
  std::string content;
  std::string summary;
};
std::optional<ContentAndSummary> split_summary(std::string_view reply);

/// One call for content plus summary; a dedicated summarize call if the
/// marker is missing. When `memory` is given and the mode enables retrieval
/// the summary is embedded and upserted. Throws Error(GenerationFailed) if
/// content stays empty after one retry.
SectionRecord generate_section(const SectionContext& context, Gateway& gateway, const GenerationConfig& config,
                               const MemoryHandle* memory = nullptr, GenerationTrace* trace = nullptr);

struct PipelineHooks {
  /// Called before section i of n starts.
  std::function<void(std::size_t i, std::size_t n)> on_section_start;
  /// Called once all sections exist, before refinement.
  std::function<void()> on_refining;
  GenerationTrace* trace = nullptr;
};

/// Runs the configured mode end to end. Throws SectionFailure.
DraftDocument run_pipeline(const DocumentSpec& spec, const SectionPlan& plan, Gateway& gateway,
                           const MemoryHandle& memory, const GenerationConfig& config, const PipelineHooks& hooks = {});

/// "1. Title\n\nbody" blocks joined by blank lines; untitled sections emit
/// their body only.
std::string assemble_sections(const std::vector<SectionRecord>& sections);

/// True when, for every titled section i, the line "<i+1>. <title>" occurs
/// exactly once and these lines appear in section order.
bool headings_in_order(std::string_view text, const std::vector<SectionRecord>& sections);

/// Deterministic assembly, optionally followed by one polish call whose
/// output is kept only if headings_in_order still holds.
std::string refine_document(const std::vector<SectionRecord>& sections, const GenerationConfig& config,
                            Gateway& gateway, GenerationTrace* trace = nullptr);

}  // namespace drafter
