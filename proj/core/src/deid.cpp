#include "drafter/deid.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include <json.hpp>

#include "drafter/error.hpp"
#include "drafter/text.hpp"
#include "http_client.hpp"

namespace drafter::deid {

using json = nlohmann::json;

bool valid_label(std::string_view label) noexcept {
  if (label.empty()) return false;
  return std::all_of(label.begin(), label.end(), [](char c) { return (c >= 'A' && c <= 'Z') || c == '_'; });
}

void check_spans(std::string_view text, const std::vector<EntitySpan>& spans) {
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > text.size()) {
      throw Error(Errc::SpanOutOfRange, "span [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                                            ") invalid for text of " + std::to_string(text.size()) + " bytes");
    }
    if (!valid_label(s.label)) throw Error(Errc::SpanOutOfRange, "label '" + s.label + "' is not [A-Z_]+");
  }
}

std::vector<EntitySpan> normalize_spans(std::vector<EntitySpan> spans) {
  std::sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
    if (a.length() != b.length()) return a.length() > b.length();
    if (a.start != b.start) return a.start < b.start;
    return a.label < b.label;
  });
  std::vector<EntitySpan> kept;
  for (auto& s : spans) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(),
                                      [&](const EntitySpan& k) { return s.start < k.end && k.start < s.end; });
    if (!overlaps) kept.push_back(std::move(s));
  }
  std::sort(kept.begin(), kept.end(), [](const EntitySpan& a, const EntitySpan& b) { return a.start < b.start; });
  return kept;
}

std::string redact(std::string_view text, std::vector<EntitySpan> spans) {
  check_spans(text, spans);
  const auto kept = normalize_spans(std::move(spans));
  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  for (const auto& s : kept) {
    out.append(text.substr(cursor, s.start - cursor));
    out += "[" + s.label + "]";
    cursor = s.end;
  }
  out.append(text.substr(cursor));
  return out;
}

// ---------------------------------------------------------------------------

struct RuleDetector::Patterns {
  std::regex iso_date{R"(\b\d{4}-\d{2}-\d{2}\b)"};
  std::regex numeric_date{R"(\b\d{1,2}[/.]\d{1,2}[/.]\d{2,4}\b)"};
  std::regex day_month_year{
      R"(\b\d{1,2}(?:st|nd|rd|th)?\s+(?:day\s+of\s+)?(?:January|February|March|April|May|June|July|August|September|October|November|December),?\s+\d{4}\b)"};
  std::regex month_day_year{
      R"(\b(?:January|February|March|April|May|June|July|August|September|October|November|December)\s+\d{1,2}(?:st|nd|rd|th)?,?\s+\d{4}\b)"};
  std::regex email{R"([A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,})"};
  std::regex phone{R"((?:\+\d{1,3}[ \-]?)?(?:\(\d{2,4}\)[ \-]?)?(?:\d{3,5}[ \-]?\d{3}[ \-]?\d{3,4}|\d{5}[ \-]?\d{5})\b)"};
  std::regex person{
      R"(\b(?:Mr|Mrs|Ms|Dr|Shri|Smt|Miss)\.?\s+((?:[A-Z][a-z]+|[A-Z]\.)(?:\s+(?:[A-Z][a-z]+|[A-Z]\.)){0,3}))"};
};

RuleDetector::RuleDetector() : patterns_(std::make_unique<Patterns>()) {}
RuleDetector::~RuleDetector() = default;

namespace {

void collect(std::string_view text, const std::regex& re, const char* label, int group, std::vector<EntitySpan>& out,
             bool digits_guard = false) {
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  for (std::cregex_iterator it(begin, end, re), last; it != last; ++it) {
    const auto& m = *it;
    if (!m[group].matched) continue;
    auto start = static_cast<std::size_t>(m.position(group));
    auto stop = start + static_cast<std::size_t>(m.length(group));
    if (digits_guard) {
      // Reject matches glued to more digits, e.g. inside a long account number.
      if (start > 0 && (std::isdigit(static_cast<unsigned char>(text[start - 1])) || text[start - 1] == '+')) continue;
      if (stop < text.size() && std::isdigit(static_cast<unsigned char>(text[stop]))) continue;
    }
    while (stop > start && (text[stop - 1] == ' ' || text[stop - 1] == '-')) --stop;
    if (stop > start) out.push_back({start, stop, label});
  }
}

}  // namespace

std::vector<EntitySpan> RuleDetector::detect(std::string_view text) {
  std::vector<EntitySpan> found;
  collect(text, patterns_->iso_date, "DATE", 0, found);
  collect(text, patterns_->numeric_date, "DATE", 0, found);
  collect(text, patterns_->day_month_year, "DATE", 0, found);
  collect(text, patterns_->month_day_year, "DATE", 0, found);
  collect(text, patterns_->email, "EMAIL", 0, found);
  collect(text, patterns_->phone, "PHONE", 0, found, true);
  collect(text, patterns_->person, "PERSON", 1, found);
  // A phone pattern may also match digits the date patterns claimed.
  return normalize_spans(std::move(found));
}

RemoteDetector::RemoteDetector(std::string url, int timeout_ms) : url_(std::move(url)), timeout_ms_(timeout_ms) {}

std::vector<EntitySpan> RemoteDetector::detect(std::string_view text) {
  const json body{{"text", std::string(text)}};
  const auto res = detail::http_post_json(url_, body.dump(), {}, timeout_ms_);
  if (res.transport_failed) throw Error(Errc::DetectorUnavailable, url_ + ": " + res.error);
  if (res.status != 200) throw Error(Errc::DetectorUnavailable, url_ + ": HTTP " + std::to_string(res.status));

  const auto code_points = text::decode_utf8(text).size();
  std::vector<EntitySpan> spans;
  try {
    const auto reply = json::parse(res.body);
    for (const auto& s : reply.at("spans")) {
      const auto start_cp = s.at("start").get<std::size_t>();
      const auto end_cp = s.at("end").get<std::size_t>();
      if (start_cp >= end_cp || end_cp > code_points) {
        throw Error(Errc::SpanOutOfRange, "detector span [" + std::to_string(start_cp) + ", " + std::to_string(end_cp) +
                                              ") invalid for text of " + std::to_string(code_points) + " code points");
      }
      spans.push_back({text::byte_offset_of_codepoint(text, start_cp), text::byte_offset_of_codepoint(text, end_cp),
                       s.at("label").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(Errc::DetectorUnavailable, url_ + ": malformed response: " + e.what());
  }
  check_spans(text, spans);
  return spans;
}

std::vector<EntitySpan> detect_entities(std::string_view text, EntityDetector& detector) {
  if (text.empty()) return {};
  auto spans = detector.detect(text);
  check_spans(text, spans);
  std::stable_sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  return spans;
}

DeidReport verify(std::string_view original, const std::vector<EntitySpan>& spans, std::string_view redacted,
                  std::size_t min_len) {
  DeidReport report;
  std::set<std::string> surfaces;
  for (const auto& s : spans) {
    ++report.counts[s.label];
    if (s.end > original.size() || s.start >= s.end) continue;
    auto surface = std::string(original.substr(s.start, s.length()));
    if (text::decode_utf8(surface).size() >= min_len) surfaces.insert(std::move(surface));
  }
  for (const auto& surface : surfaces) {
    for (auto pos = redacted.find(surface); pos != std::string_view::npos; pos = redacted.find(surface, pos + 1)) {
      report.residual_hits.push_back({surface, pos});
    }
  }
  std::sort(report.residual_hits.begin(), report.residual_hits.end(),
            [](const ResidualHit& a, const ResidualHit& b) { return a.position < b.position; });
  report.passed = report.residual_hits.empty();
  return report;
}

}  // namespace drafter::deid
