#include "drafter/planner.hpp"

#include <unordered_set>

#include "drafter/error.hpp"
#include "drafter/text.hpp"

namespace drafter {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_blank(char c) { return c == ' ' || c == '\t'; }

// Returns the text after a list marker, or npos-like false when the line has
// no recognized marker.
bool strip_marker(std::string_view line, std::string_view& rest) {
  std::size_t i = 0;
  while (i < line.size() && is_blank(line[i])) ++i;
  line.remove_prefix(i);
  if (line.empty()) return false;

  std::size_t k = 0;
  if (is_digit(line[0])) {
    while (k < line.size() && is_digit(line[k])) ++k;
    if (k >= line.size() || (line[k] != '.' && line[k] != ')')) return false;
    ++k;
  } else if (line[0] == '-' || line[0] == '*') {
    k = 1;
  } else if (line[0] == '#') {
    while (k < line.size() && line[k] == '#') ++k;
  } else {
    return false;
  }
  if (k < line.size() && !is_blank(line[k])) return false;
  rest = line.substr(k);
  return true;
}

std::string strip_emphasis(std::string s) {
  for (std::string_view mark : {"**", "__"}) {
    if (s.size() >= 2 * mark.size() && s.starts_with(mark) && s.ends_with(mark)) {
      s = text::trim(s.substr(mark.size(), s.size() - 2 * mark.size()));
    }
  }
  return s;
}

std::string clip_title(const std::string& s) {
  auto cps = text::decode_utf8(s);
  if (cps.size() <= kMaxTitleLength) return s;
  cps.resize(kMaxTitleLength);
  return text::trim(text::encode_utf8(cps));
}

std::string category_line(const DocumentSpec& spec) {
  const auto category = trim(spec.category);
  return category.empty() ? std::string() : "Document category: " + category + "\n";
}

}  // namespace

std::vector<std::string> parse_titles(std::string_view raw) {
  std::vector<std::string> titles;
  std::unordered_set<std::string> seen;
  std::size_t pos = 0;
  while (pos <= raw.size() && titles.size() < kMaxPlanTitles) {
    auto end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view rest;
    if (strip_marker(raw.substr(pos, end - pos), rest)) {
      auto title = clip_title(strip_emphasis(text::trim(rest)));
      if (!title.empty() && seen.insert(title_key(title)).second) titles.push_back(std::move(title));
    }
    pos = end + 1;
  }
  return titles;
}

std::string render_numbered(const std::vector<std::string>& titles) {
  std::string out;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + titles[i];
  }
  return out;
}

SectionPlan generate_plan(const DocumentSpec& spec, Gateway& gateway, const GenerationConfig& config) {
  const auto validation = validate_spec(spec);
  if (!validation.ok()) {
    throw Error(Errc::InvalidSpec, std::string(to_string(validation.violations.front())));
  }
  const Bindings bindings{
      {"title", trim(spec.title)},
      {"description", trim(spec.description)},
      {"category_line", category_line(spec)},
  };

  for (const char* template_id : {"plan", "plan_strict"}) {
    auto request = make_user_request(render_template(template_id, bindings), template_id);
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.seed = config.seed;
    const auto titles = parse_titles(gateway.complete(request).text);
    if (!titles.empty()) return make_plan(titles, 0);
  }
  throw Error(Errc::PlanningFailed, "model output contained no list of section titles after a strict retry");
}

SectionPlan apply_edit(const SectionPlan& plan, const PlanEdit& e) {
  if (plan.approved) throw Error(Errc::PlanLocked, "plan is approved and can no longer be edited");
  auto titles = plan.texts();
  const auto n = titles.size();
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::OutOfBounds, what);
  };

  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, edit::Rename>) {
          check(op.index < n, "rename index " + std::to_string(op.index) + " >= " + std::to_string(n));
          titles[op.index] = op.text;
        } else if constexpr (std::is_same_v<T, edit::Insert>) {
          check(op.index <= n, "insert index " + std::to_string(op.index) + " > " + std::to_string(n));
          titles.insert(titles.begin() + static_cast<std::ptrdiff_t>(op.index), op.text);
        } else if constexpr (std::is_same_v<T, edit::Remove>) {
          check(op.index < n, "remove index " + std::to_string(op.index) + " >= " + std::to_string(n));
          titles.erase(titles.begin() + static_cast<std::ptrdiff_t>(op.index));
        } else {
          check(op.from < n && op.to < n, "move indices out of range");
          auto moved = std::move(titles[op.from]);
          titles.erase(titles.begin() + static_cast<std::ptrdiff_t>(op.from));
          titles.insert(titles.begin() + static_cast<std::ptrdiff_t>(op.to), std::move(moved));
        }
      },
      e);

  return make_plan(titles, plan.revision + 1);
}

SectionPlan approve_plan(const SectionPlan& plan) {
  if (plan.approved) throw Error(Errc::AlreadyApproved, "plan already approved");
  if (plan.titles.empty()) throw Error(Errc::EmptyPlan, "cannot approve an empty plan");
  auto out = plan;
  out.approved = true;
  return out;
}

}  // namespace drafter
