#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "drafter/agreement.hpp"
#include "oracles/oracles.hpp"
#include "support/test_support.hpp"

namespace drafter::iaa {
namespace {

using Grid = std::vector<std::vector<int>>;

// 0 in a grid marks a missing cell.
RatingMatrix with_missing(const Grid& g) {
  std::vector<std::vector<std::optional<int>>> rows;
  for (const auto& r : g) {
    auto& row = rows.emplace_back();
    for (int v : r) row.push_back(v == 0 ? std::nullopt : std::optional<int>(v));
  }
  return RatingMatrix(rows);
}

Grid random_grid(std::mt19937& rng, std::size_t n, std::size_t r, int lo = 1, int hi = 10) {
  Grid g(n, std::vector<int>(r));
  for (auto& row : g) {
    for (auto& v : row) v = lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1));
  }
  return g;
}

bool has_zero_variance_rater(const Grid& g) {
  for (std::size_t c = 0; c < g[0].size(); ++c) {
    bool constant = true;
    for (const auto& row : g) constant = constant && row[c] == g[0][c];
    if (constant) return true;
  }
  return false;
}

bool has_flag(const Statistic& s, std::string_view needle) {
  return std::any_of(s.flags.begin(), s.flags.end(), [&](const std::string& f) { return f.find(needle) != std::string::npos; });
}

TEST(Matrix, Validation) {
  EXPECT_ERRC(RatingMatrix::complete({{1, 2}}), Errc::InvalidMatrix);
  EXPECT_ERRC(RatingMatrix::complete({{1}, {2}}), Errc::InvalidMatrix);
  EXPECT_ERRC(RatingMatrix::complete({{1, 2}, {3}}), Errc::InvalidMatrix);
  EXPECT_ERRC(RatingMatrix::complete({{1, 11}, {3, 4}}), Errc::InvalidMatrix);
  EXPECT_ERRC(RatingMatrix::complete({{0, 1}, {3, 4}}), Errc::InvalidMatrix);
  const auto m = RatingMatrix::complete({{1, 2}, {3, 4}}, "completeness");
  EXPECT_EQ(m.items(), 2u);
  EXPECT_EQ(m.raters(), 2u);
  EXPECT_EQ(m.rater_ids(), (std::vector<std::string>{"r1", "r2"}));
  EXPECT_FALSE(m.has_missing());
  EXPECT_TRUE(with_missing({{1, 0}, {3, 4}}).has_missing());
}

TEST(Fleiss, Examples) {
  EXPECT_DOUBLE_EQ(fleiss_kappa(RatingMatrix::complete({{3, 3, 3}, {7, 7, 7}, {9, 9, 9}})).value, 1.0);
  const Grid anti{{1, 2}, {2, 1}};
  const auto k = fleiss_kappa(RatingMatrix::complete(anti));
  EXPECT_NEAR(k.value, oracle::fleiss(anti), 1e-12);
  EXPECT_LT(k.value, 0.0);
  const auto one = fleiss_kappa(RatingMatrix::complete({{5, 5}, {5, 5}}));
  EXPECT_DOUBLE_EQ(one.value, 1.0);
  EXPECT_FALSE(one.flags.empty());
  EXPECT_ERRC(fleiss_kappa(with_missing({{1, 0}, {2, 2}})), Errc::MissingCells);
}

TEST(Cohen, Examples) {
  EXPECT_DOUBLE_EQ(cohens_kappa_mean_pairwise(RatingMatrix::complete({{1, 1, 1}, {4, 4, 4}, {8, 8, 8}})).value, 1.0);
  std::mt19937 rng(2);
  const auto g = random_grid(rng, 10, 3);
  const double pairs = (oracle::cohen_pair(g, 0, 1) + oracle::cohen_pair(g, 0, 2) + oracle::cohen_pair(g, 1, 2)) / 3;
  EXPECT_NEAR(cohens_kappa_mean_pairwise(RatingMatrix::complete(g)).value, pairs, 1e-12);
  EXPECT_ERRC(cohens_kappa_mean_pairwise(with_missing({{1, 0}, {2, 2}})), Errc::MissingCells);
}

TEST(Cohen, ZeroOverlapPairIsFlagged) {
  // Rater 1 uses only {1,2}, rater 2 only {8,9}: no shared category.
  const auto s = cohens_kappa_mean_pairwise(RatingMatrix::complete({{1, 8}, {2, 9}, {1, 9}}));
  EXPECT_TRUE(has_flag(s, "no shared category")) << (s.flags.empty() ? "" : s.flags[0]);
  EXPECT_LE(s.value, 0.0);
}

TEST(Cohen, ConstantIdenticalPairCountsAsOne) {
  EXPECT_DOUBLE_EQ(cohens_kappa({4, 4, 4}, {4, 4, 4}), 1.0);
  const auto s = cohens_kappa_mean_pairwise(RatingMatrix::complete({{4, 4}, {4, 4}}));
  EXPECT_DOUBLE_EQ(s.value, 1.0);
}

TEST(Icc, Examples) {
  EXPECT_DOUBLE_EQ(icc_2_1(RatingMatrix::complete({{2, 2, 2}, {5, 5, 5}, {9, 9, 9}})).value, 1.0);
  std::mt19937 rng(3);
  const auto g = random_grid(rng, 10, 3);
  EXPECT_NEAR(icc_2_1(RatingMatrix::complete(g)).value, oracle::icc21(g), 1e-12);
  const auto flat = icc_2_1(RatingMatrix::complete({{6, 6}, {6, 6}, {6, 6}}));
  EXPECT_DOUBLE_EQ(flat.value, 1.0);
  EXPECT_FALSE(flat.flags.empty());
  EXPECT_ERRC(icc_2_1(with_missing({{1, 0}, {2, 2}})), Errc::MissingCells);
}

TEST(Icc, ZeroDenominatorIsNaNAndFlagged) {
  const auto s = icc_2_1(RatingMatrix::complete({{1, 2}, {2, 1}}));
  EXPECT_TRUE(std::isnan(s.value));
  EXPECT_TRUE(has_flag(s, "undefined"));
}

TEST(Krippendorff, Examples) {
  EXPECT_DOUBLE_EQ(krippendorff_alpha_interval(RatingMatrix::complete({{1, 1}, {5, 5}, {9, 9}})).value, 1.0);
  const Grid one_missing{{3, 4, 0}, {5, 5, 6}, {8, 7, 8}, {2, 2, 3}};
  EXPECT_NEAR(krippendorff_alpha_interval(with_missing(one_missing)).value, oracle::krippendorff_interval(one_missing), 1e-12);
  const auto same = krippendorff_alpha_interval(RatingMatrix::complete({{4, 4}, {4, 4}}));
  EXPECT_DOUBLE_EQ(same.value, 1.0);
  EXPECT_FALSE(same.flags.empty());
}

TEST(Krippendorff, SparseItemsDroppedOrRejected) {
  const Grid sparse{{3, 0, 0}, {5, 5, 6}, {8, 7, 8}};
  const auto s = krippendorff_alpha_interval(with_missing(sparse));
  EXPECT_NEAR(s.value, oracle::krippendorff_interval(sparse), 1e-12);
  EXPECT_FALSE(s.flags.empty());
  EXPECT_ERRC(krippendorff_alpha_interval(with_missing({{3, 0}, {0, 5}})), Errc::NoPairableValues);
}

TEST(Pearson, Examples) {
  EXPECT_DOUBLE_EQ(pearson_mean_pairwise(RatingMatrix::complete({{1, 1}, {4, 4}, {8, 8}})).value, 1.0);
  EXPECT_NEAR(pearson({1, 4, 8, 10}, {10, 7, 3, 1}), -1.0, 1e-12);
  std::mt19937 rng(5);
  Grid g;
  do {
    g = random_grid(rng, 10, 3);
  } while (has_zero_variance_rater(g));
  EXPECT_NEAR(pearson_mean_pairwise(RatingMatrix::complete(g)).value, oracle::pearson_mean(g), 1e-12);
  try {
    pearson_mean_pairwise(RatingMatrix::complete({{1, 5}, {2, 5}, {3, 5}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroVarianceRater);
    EXPECT_NE(std::string(e.what()).find("r2"), std::string::npos);
  }
}

TEST(AllStatistics, MatchOraclesOnRandomMatricesProperty) {
  std::mt19937 rng(2025);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    const std::size_t r = 2 + rng() % 4;
    // Narrow ranges make agreement and degenerate cases common.
    const int lo = 1 + static_cast<int>(rng() % 5);
    const int hi = std::min(10, lo + static_cast<int>(rng() % 6));
    const auto g = random_grid(rng, n, r, lo, hi);
    const auto m = RatingMatrix::complete(g);

    ASSERT_NEAR(fleiss_kappa(m).value, oracle::fleiss(g), 1e-9);
    const auto icc = icc_2_1(m).value;
    const auto icc_want = oracle::icc21(g);
    if (std::isfinite(icc_want)) {
      ASSERT_NEAR(icc, icc_want, 1e-9);
    } else {
      ASSERT_TRUE(std::isnan(icc));
    }
    ASSERT_NEAR(krippendorff_alpha_interval(m).value, oracle::krippendorff_interval(g), 1e-9);
    ASSERT_NEAR(cohens_kappa_mean_pairwise(m).value, oracle::cohen_mean(g), 1e-9);
    if (!has_zero_variance_rater(g)) {
      ASSERT_NEAR(pearson_mean_pairwise(m).value, oracle::pearson_mean(g), 1e-9);
    }
    for (double v : {fleiss_kappa(m).value, cohens_kappa_mean_pairwise(m).value, krippendorff_alpha_interval(m).value}) {
      ASSERT_LE(v, 1.0 + 1e-12);
    }
  }
}

TEST(AllStatistics, KrippendorffMatchesOracleWithMissingProperty) {
  std::mt19937 rng(77);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    const std::size_t r = 2 + rng() % 4;
    auto g = random_grid(rng, n, r);
    for (auto& row : g) {
      for (auto& v : row) {
        if (rng() % 4 == 0) v = 0;
      }
    }
    const auto code = DRAFTER_CAUGHT_ERRC(krippendorff_alpha_interval(with_missing(g)));
    if (code) {
      ASSERT_EQ(code, Errc::NoPairableValues);
      continue;
    }
    ASSERT_NEAR(krippendorff_alpha_interval(with_missing(g)).value, oracle::krippendorff_interval(g), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 150);
}

TEST(AllStatistics, UnanimousNonConstantIsOneProperty) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    const std::size_t r = 2 + rng() % 4;
    Grid g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::vector<int>(r, 1 + static_cast<int>(rng() % 10));
    if (std::all_of(g.begin(), g.end(), [&](const auto& row) { return row[0] == g[0][0]; })) g[0].assign(r, g[0][0] % 10 + 1);
    const auto m = RatingMatrix::complete(g);
    EXPECT_DOUBLE_EQ(fleiss_kappa(m).value, 1.0);
    EXPECT_DOUBLE_EQ(cohens_kappa_mean_pairwise(m).value, 1.0);
    EXPECT_DOUBLE_EQ(krippendorff_alpha_interval(m).value, 1.0);
    EXPECT_NEAR(icc_2_1(m).value, 1.0, 1e-12);
    EXPECT_NEAR(pearson_mean_pairwise(m).value, 1.0, 1e-12);
  }
}

TEST(AllStatistics, PermutationInvarianceProperty) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 12;
    const std::size_t r = 2 + rng() % 4;
    Grid g;
    do {
      g = random_grid(rng, n, r);
    } while (has_zero_variance_rater(g));
    std::vector<std::size_t> items(n), raters(r);
    std::iota(items.begin(), items.end(), 0);
    std::iota(raters.begin(), raters.end(), 0);
    std::shuffle(items.begin(), items.end(), rng);
    std::shuffle(raters.begin(), raters.end(), rng);
    Grid p(n, std::vector<int>(r));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < r; ++j) p[i][j] = g[items[i]][raters[j]];
    }
    const auto a = RatingMatrix::complete(g);
    const auto b = RatingMatrix::complete(p);
    ASSERT_NEAR(fleiss_kappa(a).value, fleiss_kappa(b).value, 1e-9);
    ASSERT_NEAR(cohens_kappa_mean_pairwise(a).value, cohens_kappa_mean_pairwise(b).value, 1e-9);
    ASSERT_NEAR(krippendorff_alpha_interval(a).value, krippendorff_alpha_interval(b).value, 1e-9);
    ASSERT_NEAR(pearson_mean_pairwise(a).value, pearson_mean_pairwise(b).value, 1e-9);
    const double ia = icc_2_1(a).value, ib = icc_2_1(b).value;
    if (std::isnan(ia)) {
      ASSERT_TRUE(std::isnan(ib));
    } else {
      ASSERT_NEAR(ia, ib, 1e-9);
    }
  }
}

TEST(Csv, ParsesAnyColumnOrderAndQuotes) {
  const auto rows = parse_ratings_csv(
      "score,criterion,rater_id,model_id,doc_id\n"
      "7,factual_accuracy,alice,\"m,1\",d1\n"
      "\n"
      "8,completeness,bob,m2,d2\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].model_id, "m,1");
  EXPECT_EQ(rows[0].score, 7);
  EXPECT_EQ(rows[1].rater_id, "bob");
}

TEST(Csv, MalformedRecordsNameTheLine) {
  auto message = [](std::string_view csv) {
    try {
      parse_ratings_csv(csv);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedRecord);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("doc_id,model_id,rater_id,criterion\n").find("score"), std::string::npos);
  EXPECT_NE(message("doc_id,model_id,rater_id,criterion,score\nd,m,r,c,x\n").find("2"), std::string::npos);
  EXPECT_NE(message("doc_id,model_id,rater_id,criterion,score\nd,m,r,c,5\nd,m,r\n").find("3"), std::string::npos);
  EXPECT_ERRC(load_ratings_csv("/nonexistent/ratings.csv"), Errc::Unreadable);
}

std::string perfect_csv() {
  std::string csv = "doc_id,model_id,rater_id,criterion,score\n";
  const int scores[] = {3, 6, 9, 4};
  for (const char* model : {"m1", "m2"}) {
    for (const char* crit : {"factual_accuracy", "completeness"}) {
      for (int d = 0; d < 4; ++d) {
        for (const char* rater : {"e1", "e2", "e3"}) {
          csv += "d" + std::to_string(d) + "," + model + "," + rater + "," + crit + "," + std::to_string(scores[d]) + "\n";
        }
      }
    }
  }
  return csv;
}

TEST(Report, GroupsAndEvaluates) {
  const auto groups = group_ratings(parse_ratings_csv(perfect_csv()));
  ASSERT_EQ(groups.size(), 4u);
  EXPECT_EQ(groups[0].matrix.items(), 4u);
  EXPECT_EQ(groups[0].matrix.raters(), 3u);
  const auto rows = evaluate_all(groups);
  for (const auto& row : rows) {
    EXPECT_DOUBLE_EQ(*row.fleiss.value, 1.0);
    EXPECT_DOUBLE_EQ(*row.cohen.value, 1.0);
    EXPECT_DOUBLE_EQ(*row.alpha.value, 1.0);
    EXPECT_NEAR(*row.icc.value, 1.0, 1e-12);
    EXPECT_NEAR(*row.pearson.value, 1.0, 1e-12);
  }
  const auto table = format_table(rows);
  EXPECT_NE(table.find("fleiss_kappa"), std::string::npos);
  EXPECT_NE(table.find("cohen_kappa_mean_pairwise"), std::string::npos);
  EXPECT_NE(table.find("icc(2,1)"), std::string::npos);
  EXPECT_NE(table.find("krippendorff_alpha_interval"), std::string::npos);
  EXPECT_NE(table.find("1.0000"), std::string::npos);
}

TEST(Report, DuplicateRatingRejected) {
  EXPECT_ERRC(group_ratings(parse_ratings_csv("doc_id,model_id,rater_id,criterion,score\nd,m,r,c,5\nd,m,r,c,6\n")),
              Errc::MalformedRecord);
}

TEST(Report, StatisticErrorsAreReportedPerCell) {
  // Rater e2 never varies: Pearson fails, the rest still report.
  const auto rows = evaluate_all(group_ratings(parse_ratings_csv(
      "doc_id,model_id,rater_id,criterion,score\n"
      "d1,m,e1,c,2\nd1,m,e2,c,5\n"
      "d2,m,e1,c,7\nd2,m,e2,c,5\n"
      "d3,m,e1,c,4\nd3,m,e2,c,5\n")));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].pearson.value);
  EXPECT_NE(rows[0].pearson.error.find("ZeroVarianceRater"), std::string::npos);
  EXPECT_TRUE(rows[0].fleiss.value);
  EXPECT_NE(format_table(rows).find("m"), std::string::npos);
}

}  // namespace
}  // namespace drafter::iaa
