#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace drafter::deid {

/// Half-open byte range [start, end) of UTF-8 text with an uppercase label.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string label;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

bool valid_label(std::string_view label) noexcept;

/// Throws Error(SpanOutOfRange) for an empty/inverted span, one past the end
/// of the text, or a label outside [A-Z_]+.
void check_spans(std::string_view text, const std::vector<EntitySpan>& spans);

/// Resolves overlaps: longer span wins, equal lengths go to the earlier
/// start, contained spans are dropped. Result is sorted by start and
/// pairwise disjoint.
std::vector<EntitySpan> normalize_spans(std::vector<EntitySpan> spans);

/// Replaces every surviving span with "[LABEL]". Text outside spans is
/// copied byte for byte.
std::string redact(std::string_view text, std::vector<EntitySpan> spans);

class EntityDetector {
 public:
  virtual ~EntityDetector() = default;
  virtual std::vector<EntitySpan> detect(std::string_view text) = 0;
};

/// Pattern-based fallback: ISO, numeric and written dates (DATE), e-mail
/// addresses (EMAIL), phone numbers (PHONE) and honorific-prefixed
/// capitalized names such as "Mr. Rahul Verma" (PERSON, name only).
class RuleDetector final : public EntityDetector {
 public:
  RuleDetector();
  ~RuleDetector() override;
  std::vector<EntitySpan> detect(std::string_view text) override;

 private:
  struct Patterns;
  std::unique_ptr<Patterns> patterns_;
};

/// Client for an external NER service.
///   request:  {"text": "..."}
///   response: {"spans": [{"start": s, "end": e, "label": "PERSON"}, ...]}
/// Offsets on the wire are Unicode code point indices (what most NER
/// toolkits report); they are converted to byte offsets here.
class RemoteDetector final : public EntityDetector {
 public:
  explicit RemoteDetector(std::string url, int timeout_ms = 30000);
  std::vector<EntitySpan> detect(std::string_view text) override;

 private:
  std::string url_;
  int timeout_ms_;
};

/// Runs the detector and returns its spans sorted by start (overlaps kept).
/// Transport failures surface as Error(DetectorUnavailable).
std::vector<EntitySpan> detect_entities(std::string_view text, EntityDetector& detector);

struct ResidualHit {
  std::string surface;
  std::size_t position = 0;
};

struct DeidReport {
  std::map<std::string, std::size_t> counts;
  std::vector<ResidualHit> residual_hits;
  bool passed = true;
};

/// Searches `redacted` for the original surface of every span at least
/// `min_len` code points long (case-sensitive). passed == no hits.
DeidReport verify(std::string_view original, const std::vector<EntitySpan>& spans, std::string_view redacted,
                  std::size_t min_len = 3);

}  // namespace drafter::deid
