#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace drafter::metrics {

struct TokenSeq {
  std::vector<std::string> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

/// Shared tokenizer: lowercases (simple Unicode mapping), splits on
/// whitespace and emits every punctuation character as its own token.
TokenSeq tokenize(std::string_view text);

/// Porter (1980) suffix stripper for lowercase ASCII words; anything else
/// is returned unchanged.
std::string porter_stem(std::string_view word);

struct RougeL {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);
RougeL rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

/// Sentence BLEU, n = 1..min(4, |candidate|) with uniform weights, clipped
/// precision, brevity penalty against the closest reference length (shorter
/// on ties). Zero precisions for n > 1 become 1 / (2 * candidate n-grams).
/// Throws Error(EmptyReferences).
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references);

struct MeteorParams {
  double alpha = 0.9;
  double beta = 3.0;
  double gamma = 0.5;
  /// Alignment search nodes before settling for the best alignment found.
  std::uint64_t search_budget = 200'000;
};

struct MeteorAlignment {
  std::size_t exact_matches = 0;
  std::size_t stem_matches = 0;
  std::size_t chunks = 0;
  /// false when the search budget ran out; chunks is then an upper bound.
  bool optimal = true;
  /// candidate index -> reference index, or -1.
  std::vector<long> mapping;

  std::size_t matches() const noexcept { return exact_matches + stem_matches; }
};

/// One-to-one alignment that maximizes exact matches, then stem matches on
/// what is left, and among those minimizes the number of chunks.
MeteorAlignment meteor_align(const TokenSeq& candidate, const TokenSeq& reference, const MeteorParams& params = {});

/// Fmean * (1 - gamma * (chunks / matches)^beta), Fmean = PR / (alpha P + (1 - alpha) R).
double meteor_from_counts(std::size_t matches, std::size_t chunks, std::size_t candidate_len,
                          std::size_t reference_len, const MeteorParams& params = {});
double meteor(const TokenSeq& candidate, const TokenSeq& reference, const MeteorParams& params = {});

struct MetricReport {
  RougeL rouge_l;
  double bleu = 0.0;
  double meteor = 0.0;
  bool meteor_optimal = true;
};

MetricReport score_pair(std::string_view candidate_text, std::string_view reference_text);

}  // namespace drafter::metrics
