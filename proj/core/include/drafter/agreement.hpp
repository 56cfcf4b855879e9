#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace drafter::iaa {

/// N items x R raters of 1..10 scores. A missing cell is std::nullopt.
class RatingMatrix {
 public:
  /// rows[i][r] is rater r's score for item i. Throws Error(InvalidMatrix)
  /// unless N >= 2, R >= 2, rows are equally long and scores are in 1..10.
  explicit RatingMatrix(std::vector<std::vector<std::optional<int>>> rows, std::string criterion = {},
                        std::vector<std::string> rater_ids = {}, std::vector<std::string> item_ids = {});
  static RatingMatrix complete(const std::vector<std::vector<int>>& rows, std::string criterion = {});

  std::size_t items() const noexcept { return rows_.size(); }
  std::size_t raters() const noexcept { return rater_ids_.size(); }
  const std::optional<int>& at(std::size_t item, std::size_t rater) const { return rows_[item][rater]; }
  bool has_missing() const noexcept;
  const std::string& criterion() const noexcept { return criterion_; }
  const std::vector<std::string>& rater_ids() const noexcept { return rater_ids_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }

 private:
  std::vector<std::vector<std::optional<int>>> rows_;
  std::string criterion_;
  std::vector<std::string> rater_ids_;
  std::vector<std::string> item_ids_;
};

/// A statistic plus any convention that was applied to produce it.
struct Statistic {
  double value = 0.0;
  std::vector<std::string> flags;
};

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

/// Throws Error(MissingCells). One category everywhere yields 1.0, flagged.
Statistic fleiss_kappa(const RatingMatrix& m);

/// Unweighted Cohen's kappa for every rater pair, averaged. A pair whose
/// expected agreement is 1 counts as 1 when it also agrees perfectly and is
/// excluded otherwise; pairs with no shared category are flagged.
Statistic cohens_kappa_mean_pairwise(const RatingMatrix& m);
double cohens_kappa(const std::vector<int>& a, const std::vector<int>& b);

/// ICC(2,1), two-way random effects, absolute agreement, single rater.
/// All cells equal yields 1.0; a zero denominator yields NaN. Both flagged.
Statistic icc_2_1(const RatingMatrix& m);

/// Interval-distance alpha over the coincidence matrix; missing cells
/// allowed. Items with fewer than two ratings are dropped and flagged.
/// Throws Error(NoPairableValues). D_e = 0 yields 1.0, flagged.
Statistic krippendorff_alpha_interval(const RatingMatrix& m);

/// Mean Pearson r over rater pairs. Throws Error(ZeroVarianceRater).
Statistic pearson_mean_pairwise(const RatingMatrix& m);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Ratings files and reports

struct RatingRow {
  std::string doc_id;
  std::string model_id;
  std::string rater_id;
  std::string criterion;
  int score = 0;
};

/// Comma-separated with header doc_id,model_id,rater_id,criterion,score
/// (any column order). Throws Error(MalformedRecord) with the line number.
std::vector<RatingRow> parse_ratings_csv(std::string_view csv);
std::vector<RatingRow> load_ratings_csv(const std::string& path);

struct RatingGroup {
  std::string model_id;
  std::string criterion;
  RatingMatrix matrix;
};

/// One matrix per (model_id, criterion), items and raters sorted by id.
/// Throws Error(MalformedRecord) on a duplicate rating.
std::vector<RatingGroup> group_ratings(const std::vector<RatingRow>& rows);

struct StatOutcome {
  std::optional<double> value;
  std::vector<std::string> flags;
  std::string error;
};

struct AgreementRow {
  std::string model_id;
  std::string criterion;
  std::size_t items = 0;
  std::size_t raters = 0;
  StatOutcome fleiss;
  StatOutcome cohen;
  StatOutcome icc;
  StatOutcome alpha;
  StatOutcome pearson;
};

AgreementRow evaluate_group(const RatingGroup& group);
std::vector<AgreementRow> evaluate_all(const std::vector<RatingGroup>& groups);

/// Aligned table, one row per (model, criterion), one column per statistic.
std::string format_table(const std::vector<AgreementRow>& rows);

/// Labels used in reports for the chosen variants.
inline constexpr std::string_view kCohenVariant = "cohen_kappa_mean_pairwise";
inline constexpr std::string_view kIccVariant = "icc(2,1)";
inline constexpr std::string_view kAlphaVariant = "krippendorff_alpha_interval";

}  // namespace drafter::iaa
