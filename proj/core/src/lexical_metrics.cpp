#include "drafter/lexical_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "drafter/error.hpp"
#include "drafter/text.hpp"

namespace drafter::metrics {

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.tokens.push_back(std::move(current));
    current.clear();
  };
  for (char32_t cp : text::decode_utf8(text)) {
    if (text::is_space(cp)) {
      flush();
    } else if (text::is_punct(cp)) {
      flush();
      std::string p;
      text::append_utf8(p, cp);
      out.tokens.push_back(std::move(p));
    } else {
      text::append_utf8(current, text::to_lower(cp));
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// ROUGE-L

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  const auto& x = a.tokens;
  const auto& y = b.tokens;
  if (x.empty() || y.empty()) return 0;
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

RougeL rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  const auto l = static_cast<double>(lcs_length(candidate, reference));
  RougeL r;
  r.precision = candidate.empty() ? 0.0 : l / static_cast<double>(candidate.size());
  r.recall = reference.empty() ? 0.0 : l / static_cast<double>(reference.size());
  const double sum = r.precision + r.recall;
  r.f1 = sum == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / sum;
  return r;
}

// ---------------------------------------------------------------------------
// BLEU

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const TokenSeq& seq, std::size_t n) {
  NgramCounts counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<std::string>(seq.tokens.begin() + static_cast<long>(i),
                                      seq.tokens.begin() + static_cast<long>(i + n))];
  }
  return counts;
}

}  // namespace

double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
  if (references.empty()) throw Error(Errc::EmptyReferences, "bleu needs at least one reference");
  const std::size_t c = candidate.size();
  if (c == 0) return 0.0;
  const std::size_t max_n = std::min<std::size_t>(4, c);

  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand = ngrams(candidate, n);
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [g, cnt] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], cnt);
    }
    std::size_t clipped = 0;
    std::size_t total = 0;
    for (const auto& [g, cnt] : cand) {
      total += cnt;
      const auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(cnt, it->second);
    }
    double p;
    if (clipped == 0) {
      if (n == 1) return 0.0;
      p = 1.0 / (2.0 * static_cast<double>(total));
    } else {
      p = static_cast<double>(clipped) / static_cast<double>(total);
    }
    log_sum += std::log(p);
  }

  std::size_t r = references.front().size();
  for (const auto& ref : references) {
    const auto d_new = ref.size() > c ? ref.size() - c : c - ref.size();
    const auto d_old = r > c ? r - c : c - r;
    if (d_new < d_old || (d_new == d_old && ref.size() < r)) r = ref.size();
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

// ---------------------------------------------------------------------------
// METEOR
//
// The number of exact and stem matches in an optimal alignment depends only
// on token counts: per surface form, exact = min(cand, ref); per stem class,
// stem = min(leftover cand, leftover ref). The search then only has to place
// that many matches so as to minimize chunks. Depth-first over candidate
// positions, O(1) feasibility checks against the required counts, options
// ordered so the first leaf is a good greedy alignment, branch and bound on
// the chunk count.

namespace {

class MeteorSearch {
 public:
  MeteorSearch(const TokenSeq& cand, const TokenSeq& ref, std::uint64_t budget) : budget_(budget) {
    std::unordered_map<std::string, int> surface_ids;
    std::unordered_map<std::string, int> stem_ids;
    auto intern = [&](const std::string& tok) {
      auto [it, inserted] = surface_ids.emplace(tok, static_cast<int>(surface_ids.size()));
      if (inserted) {
        auto [sit, _] = stem_ids.emplace(porter_stem(tok), static_cast<int>(stem_ids.size()));
        surface_class_.push_back(sit->second);
      }
      return it->second;
    };
    for (const auto& t : cand.tokens) c_.push_back(intern(t));
    for (const auto& t : ref.tokens) r_.push_back(intern(t));

    const auto ns = surface_class_.size();
    const auto nk = stem_ids.size();
    a_.assign(ns, 0);
    b_.assign(ns, 0);
    for (int s : c_) ++a_[static_cast<std::size_t>(s)];
    for (int s : r_) ++b_[static_cast<std::size_t>(s)];
    e_.assign(ns, 0);
    sc_.assign(nk, 0);
    sr_.assign(nk, 0);
    t_.assign(nk, 0);
    for (std::size_t s = 0; s < ns; ++s) {
      e_[s] = std::min(a_[s], b_[s]);
      exact_total_ += static_cast<std::size_t>(e_[s]);
      const auto k = static_cast<std::size_t>(surface_class_[s]);
      sc_[k] += a_[s] - e_[s];
      sr_[k] += b_[s] - e_[s];
    }
    for (std::size_t k = 0; k < nk; ++k) {
      t_[k] = std::min(sc_[k], sr_[k]);
      stem_total_ += static_cast<std::size_t>(t_[k]);
    }
    need_ = static_cast<long>(exact_total_ + stem_total_);

    ref_by_surface_.resize(ns);
    for (std::size_t j = 0; j < r_.size(); ++j) ref_by_surface_[static_cast<std::size_t>(r_[j])].push_back(j);
    used_.assign(r_.size(), 0);
    mapping_.assign(c_.size(), -1);
  }

  MeteorAlignment run() {
    MeteorAlignment out;
    out.exact_matches = exact_total_;
    out.stem_matches = stem_total_;
    if (need_ == 0) {
      out.mapping.assign(c_.size(), -1);
      return out;
    }
    dfs(0, 0);
    out.chunks = best_chunks_;
    out.optimal = !exhausted_;
    out.mapping = best_mapping_;
    return out;
  }

 private:
  std::size_t cls(int surface) const { return static_cast<std::size_t>(surface_class_[static_cast<std::size_t>(surface)]); }

  // Exact-match run length starting at (i, j), used only for ordering.
  std::size_t run_length(std::size_t i, std::size_t j) const {
    std::size_t n = 0;
    while (i + n < c_.size() && j + n < r_.size() && n < 8 && cls(c_[i + n]) == cls(r_[j + n])) ++n;
    return n;
  }

  void dfs(std::size_t i, std::size_t chunks) {
    if (stop_) return;
    if (++nodes_ > budget_ && best_chunks_ != kNone) {
      exhausted_ = true;
      stop_ = true;
      return;
    }
    if (need_ == 0) {
      if (chunks < best_chunks_) {
        best_chunks_ = chunks;
        best_mapping_ = mapping_;
        // One chunk is the floor; nothing can beat it.
        if (chunks == 1) stop_ = true;
      }
      return;
    }
    if (i == c_.size()) return;
    const bool prev_matched = i > 0 && mapping_[i - 1] >= 0;
    const std::size_t lower = chunks + (prev_matched ? 0 : 1);
    if (lower >= best_chunks_) return;

    const int s = c_[i];
    const auto su = static_cast<std::size_t>(s);
    const auto k = cls(s);

    struct Option {
      std::size_t j;
      bool exact;
      bool extends;
      std::size_t run;
    };
    std::vector<Option> options;
    if (e_[su] > 0) {
      for (std::size_t j : ref_by_surface_[su]) {
        if (!used_[j]) options.push_back({j, true, false, 0});
      }
    }
    // Stem match: this token must be surplus for its surface, the reference
    // token surplus for its own.
    if (t_[k] > 0 && a_[su] - 1 >= e_[su]) {
      for (std::size_t j = 0; j < r_.size(); ++j) {
        const int rs = r_[j];
        if (used_[j] || rs == s || cls(rs) != k) continue;
        const auto rsu = static_cast<std::size_t>(rs);
        if (b_[rsu] - 1 < e_[rsu]) continue;
        options.push_back({j, false, false, 0});
      }
    }
    for (auto& o : options) {
      o.extends = prev_matched && static_cast<long>(o.j) == mapping_[i - 1] + 1;
      o.run = run_length(i, o.j);
    }
    std::stable_sort(options.begin(), options.end(), [](const Option& x, const Option& y) {
      if (x.extends != y.extends) return x.extends;
      return x.run > y.run;
    });

    for (const auto& o : options) {
      const auto rsu = static_cast<std::size_t>(r_[o.j]);
      used_[o.j] = 1;
      mapping_[i] = static_cast<long>(o.j);
      --a_[su];
      --b_[rsu];
      --need_;
      if (o.exact) {
        --e_[su];
      } else {
        --t_[k];
        --sc_[k];
        --sr_[k];
      }
      dfs(i + 1, chunks + (o.extends ? 0 : 1));
      if (o.exact) {
        ++e_[su];
      } else {
        ++t_[k];
        ++sc_[k];
        ++sr_[k];
      }
      ++need_;
      ++b_[rsu];
      ++a_[su];
      mapping_[i] = -1;
      used_[o.j] = 0;
      if (stop_) return;
    }

    // Leave candidate i unmatched if the remaining counts still allow it.
    if (a_[su] - 1 >= e_[su] && sc_[k] - 1 >= t_[k]) {
      --a_[su];
      --sc_[k];
      dfs(i + 1, chunks);
      ++sc_[k];
      ++a_[su];
    }
  }

  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::uint64_t budget_;
  std::uint64_t nodes_ = 0;
  bool exhausted_ = false;
  bool stop_ = false;

  std::vector<int> c_, r_;
  std::vector<int> surface_class_;
  // a_/b_: candidate tokens from the cursor on / unused reference tokens, per
  // surface. e_: exact matches still owed per surface. sc_/sr_: per-class
  // surplus beyond the owed exact matches. t_: stem matches still owed.
  std::vector<int> a_, b_, e_, sc_, sr_, t_;
  std::size_t exact_total_ = 0;
  std::size_t stem_total_ = 0;
  long need_ = 0;
  std::vector<std::vector<std::size_t>> ref_by_surface_;
  std::vector<char> used_;
  std::vector<long> mapping_;
  std::size_t best_chunks_ = kNone;
  std::vector<long> best_mapping_;
};

}  // namespace

MeteorAlignment meteor_align(const TokenSeq& candidate, const TokenSeq& reference, const MeteorParams& params) {
  return MeteorSearch(candidate, reference, params.search_budget).run();
}

double meteor_from_counts(std::size_t matches, std::size_t chunks, std::size_t candidate_len,
                          std::size_t reference_len, const MeteorParams& params) {
  if (matches == 0 || candidate_len == 0 || reference_len == 0) return 0.0;
  const double m = static_cast<double>(matches);
  const double p = m / static_cast<double>(candidate_len);
  const double r = m / static_cast<double>(reference_len);
  const double fmean = p * r / (params.alpha * p + (1.0 - params.alpha) * r);
  const double penalty = params.gamma * std::pow(static_cast<double>(chunks) / m, params.beta);
  return fmean * (1.0 - penalty);
}

double meteor(const TokenSeq& candidate, const TokenSeq& reference, const MeteorParams& params) {
  const auto a = meteor_align(candidate, reference, params);
  return meteor_from_counts(a.matches(), a.chunks, candidate.size(), reference.size(), params);
}

MetricReport score_pair(std::string_view candidate_text, std::string_view reference_text) {
  const auto cand = tokenize(candidate_text);
  const auto ref = tokenize(reference_text);
  MetricReport report;
  report.rouge_l = rouge_l(cand, ref);
  report.bleu = bleu(cand, {ref});
  const auto align = meteor_align(cand, ref);
  report.meteor = meteor_from_counts(align.matches(), align.chunks, cand.size(), ref.size());
  report.meteor_optimal = align.optimal;
  return report;
}

}  // namespace drafter::metrics
