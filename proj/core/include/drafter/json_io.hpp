#pragma once

#include <json.hpp>

#include "drafter/deid.hpp"
#include "drafter/judge.hpp"
#include "drafter/lexical_metrics.hpp"
#include "drafter/section_engine.hpp"
#include "drafter/types.hpp"

// nlohmann::json conversions for the wire and report formats. Parsing
// throws Error(InvalidRequest) on a missing or mistyped field.
namespace drafter {

using json = nlohmann::json;

void to_json(json& j, const DocumentSpec& v);
void from_json(const json& j, DocumentSpec& v);

void to_json(json& j, const SectionPlan& v);
/// Rebuilds through make_plan, so titles are re-validated.
void from_json(const json& j, SectionPlan& v);

void to_json(json& j, const SectionRecord& v);
void from_json(const json& j, SectionRecord& v);

/// Missing fields keep their defaults; unknown modes are rejected.
void to_json(json& j, const GenerationConfig& v);
void from_json(const json& j, GenerationConfig& v);

void to_json(json& j, const DraftDocument& v);
void from_json(const json& j, DraftDocument& v);

void to_json(json& j, const JobState& v);
void from_json(const json& j, JobState& v);

void to_json(json& j, const GenerationTrace& v);
void from_json(const json& j, GenerationTrace& v);
void to_json(json& j, const CaseResult& v);
void to_json(json& j, const GevalReport& v);

/// Field access helpers used by the parsers.
const json& require_field(const json& j, const char* name);
std::string require_string(const json& j, const char* name);

namespace deid {
void to_json(nlohmann::json& j, const EntitySpan& v);
void from_json(const nlohmann::json& j, EntitySpan& v);
void to_json(nlohmann::json& j, const DeidReport& v);
}  // namespace deid

namespace metrics {
void to_json(nlohmann::json& j, const RougeL& v);
void to_json(nlohmann::json& j, const MetricReport& v);
}  // namespace metrics

}  // namespace drafter
