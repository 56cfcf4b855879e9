#include "drafter/agreement.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "drafter/error.hpp"
#include "drafter/text.hpp"

namespace drafter::iaa {

namespace {

constexpr std::size_t kCategories = kMaxScore - kMinScore + 1;

std::size_t category(int score) { return static_cast<std::size_t>(score - kMinScore); }

void require_complete(const RatingMatrix& m, const char* what) {
  if (m.has_missing()) throw Error(Errc::MissingCells, std::string(what) + " needs a complete matrix");
}

std::vector<int> rater_column(const RatingMatrix& m, std::size_t r) {
  std::vector<int> out;
  out.reserve(m.items());
  for (std::size_t i = 0; i < m.items(); ++i) out.push_back(*m.at(i, r));
  return out;
}

}  // namespace

RatingMatrix::RatingMatrix(std::vector<std::vector<std::optional<int>>> rows, std::string criterion,
                           std::vector<std::string> rater_ids, std::vector<std::string> item_ids)
    : rows_(std::move(rows)), criterion_(std::move(criterion)) {
  if (rows_.size() < 2) throw Error(Errc::InvalidMatrix, "need at least 2 items");
  const auto r = rows_.front().size();
  if (r < 2) throw Error(Errc::InvalidMatrix, "need at least 2 raters");
  for (const auto& row : rows_) {
    if (row.size() != r) throw Error(Errc::InvalidMatrix, "ragged rating rows");
    for (const auto& cell : row) {
      if (cell && (*cell < kMinScore || *cell > kMaxScore)) {
        throw Error(Errc::InvalidMatrix, "score " + std::to_string(*cell) + " outside 1..10");
      }
    }
  }
  if (rater_ids.empty()) {
    for (std::size_t k = 0; k < r; ++k) rater_ids.push_back("r" + std::to_string(k + 1));
  }
  if (item_ids.empty()) {
    for (std::size_t k = 0; k < rows_.size(); ++k) item_ids.push_back("i" + std::to_string(k + 1));
  }
  if (rater_ids.size() != r || item_ids.size() != rows_.size()) {
    throw Error(Errc::InvalidMatrix, "id lists do not match the matrix shape");
  }
  rater_ids_ = std::move(rater_ids);
  item_ids_ = std::move(item_ids);
}

RatingMatrix RatingMatrix::complete(const std::vector<std::vector<int>>& rows, std::string criterion) {
  std::vector<std::vector<std::optional<int>>> cells;
  cells.reserve(rows.size());
  for (const auto& row : rows) cells.emplace_back(row.begin(), row.end());
  return RatingMatrix(std::move(cells), std::move(criterion));
}

bool RatingMatrix::has_missing() const noexcept {
  return std::any_of(rows_.begin(), rows_.end(), [](const auto& row) {
    return std::any_of(row.begin(), row.end(), [](const auto& c) { return !c.has_value(); });
  });
}

// ---------------------------------------------------------------------------

Statistic fleiss_kappa(const RatingMatrix& m) {
  require_complete(m, "fleiss_kappa");
  const auto n = m.items();
  const auto r = m.raters();
  const double rd = static_cast<double>(r);
  std::array<double, kCategories> totals{};
  double p_bar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, kCategories> counts{};
    for (std::size_t k = 0; k < r; ++k) counts[category(*m.at(i, k))] += 1.0;
    double sq = 0.0;
    for (std::size_t c = 0; c < kCategories; ++c) {
      sq += counts[c] * counts[c];
      totals[c] += counts[c];
    }
    p_bar += (sq - rd) / (rd * (rd - 1.0));
  }
  p_bar /= static_cast<double>(n);

  const auto used = std::count_if(totals.begin(), totals.end(), [](double t) { return t > 0.0; });
  if (used == 1) return {1.0, {"degenerate: single category, kappa defined as 1"}};

  double p_e = 0.0;
  for (double t : totals) {
    const double p = t / (static_cast<double>(n) * rd);
    p_e += p * p;
  }
  return {(p_bar - p_e) / (1.0 - p_e), {}};
}

double cohens_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::array<double, kCategories> ma{}, mb{};
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[category(a[i])] += 1.0;
    mb[category(b[i])] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (std::size_t c = 0; c < kCategories; ++c) p_e += (ma[c] / n) * (mb[c] / n);
  if (p_e >= 1.0) return p_o >= 1.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
  return (p_o - p_e) / (1.0 - p_e);
}

Statistic cohens_kappa_mean_pairwise(const RatingMatrix& m) {
  require_complete(m, "cohens_kappa_mean_pairwise");
  Statistic out;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t a = 0; a < m.raters(); ++a) {
    const auto ca = rater_column(m, a);
    for (std::size_t b = a + 1; b < m.raters(); ++b) {
      const auto cb = rater_column(m, b);
      const auto pair = m.rater_ids()[a] + "/" + m.rater_ids()[b];
      const std::set<int> sa(ca.begin(), ca.end());
      const bool overlap = std::any_of(cb.begin(), cb.end(), [&](int v) { return sa.count(v) > 0; });
      if (!overlap) out.flags.push_back("pair " + pair + ": no shared category (expected agreement 0)");
      const double k = cohens_kappa(ca, cb);
      if (std::isnan(k)) {
        out.flags.push_back("pair " + pair + ": expected agreement 1 without perfect agreement, excluded");
        continue;
      }
      if (sa.size() == 1 && std::set<int>(cb.begin(), cb.end()) == sa) {
        out.flags.push_back("pair " + pair + ": single shared category, kappa defined as 1");
      }
      sum += k;
      ++counted;
    }
  }
  out.value = counted == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(counted);
  return out;
}

Statistic icc_2_1(const RatingMatrix& m) {
  require_complete(m, "icc_2_1");
  const auto n = m.items();
  const auto r = m.raters();
  const double nd = static_cast<double>(n);
  const double rd = static_cast<double>(r);

  const int first = *m.at(0, 0);
  bool all_equal = true;
  double grand = 0.0;
  std::vector<double> row_mean(n, 0.0), col_mean(r, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < r; ++k) {
      const double v = *m.at(i, k);
      all_equal = all_equal && *m.at(i, k) == first;
      grand += v;
      row_mean[i] += v;
      col_mean[k] += v;
    }
  }
  if (all_equal) return {1.0, {"degenerate: all scores identical, ICC defined as 1"}};
  grand /= nd * rd;
  for (auto& x : row_mean) x /= rd;
  for (auto& x : col_mean) x /= nd;

  double ss_rows = 0.0, ss_cols = 0.0, ss_total = 0.0;
  for (double x : row_mean) ss_rows += rd * (x - grand) * (x - grand);
  for (double x : col_mean) ss_cols += nd * (x - grand) * (x - grand);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < r; ++k) {
      const double d = *m.at(i, k) - grand;
      ss_total += d * d;
    }
  }
  const double ss_err = ss_total - ss_rows - ss_cols;
  const double msr = ss_rows / (nd - 1.0);
  const double msc = ss_cols / (rd - 1.0);
  const double mse = ss_err / ((nd - 1.0) * (rd - 1.0));
  const double denom = msr + (rd - 1.0) * mse + rd * (msc - mse) / nd;
  if (std::abs(denom) < 1e-12) {
    return {std::numeric_limits<double>::quiet_NaN(), {"undefined: zero denominator in ICC(2,1)"}};
  }
  return {(msr - mse) / denom, {}};
}

Statistic krippendorff_alpha_interval(const RatingMatrix& m) {
  Statistic out;
  std::array<std::array<double, kCategories>, kCategories> o{};
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < m.items(); ++i) {
    std::vector<int> values;
    for (std::size_t k = 0; k < m.raters(); ++k) {
      if (m.at(i, k)) values.push_back(*m.at(i, k));
    }
    if (values.size() < 2) {
      ++dropped;
      continue;
    }
    const double w = 1.0 / static_cast<double>(values.size() - 1);
    for (std::size_t a = 0; a < values.size(); ++a) {
      for (std::size_t b = 0; b < values.size(); ++b) {
        if (a != b) o[category(values[a])][category(values[b])] += w;
      }
    }
  }
  if (dropped > 0) out.flags.push_back(std::to_string(dropped) + " item(s) with fewer than 2 ratings dropped");

  std::array<double, kCategories> n_c{};
  double n = 0.0;
  for (std::size_t c = 0; c < kCategories; ++c) {
    for (std::size_t k = 0; k < kCategories; ++k) n_c[c] += o[c][k];
    n += n_c[c];
  }
  if (n <= 0.0) throw Error(Errc::NoPairableValues, "no item has two or more ratings");

  double d_o = 0.0, d_e = 0.0;
  for (std::size_t c = 0; c < kCategories; ++c) {
    for (std::size_t k = 0; k < kCategories; ++k) {
      const double diff = static_cast<double>(c) - static_cast<double>(k);
      d_o += o[c][k] * diff * diff;
      d_e += n_c[c] * n_c[k] * diff * diff;
    }
  }
  d_o /= n;
  d_e /= n * (n - 1.0);
  if (d_e == 0.0) {
    out.value = 1.0;
    out.flags.push_back("degenerate: no expected disagreement, alpha defined as 1");
    return out;
  }
  out.value = 1.0 - d_o / d_e;
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

Statistic pearson_mean_pairwise(const RatingMatrix& m) {
  require_complete(m, "pearson_mean_pairwise");
  std::vector<std::vector<double>> cols;
  for (std::size_t r = 0; r < m.raters(); ++r) {
    const auto c = rater_column(m, r);
    if (std::all_of(c.begin(), c.end(), [&](int v) { return v == c.front(); })) {
      throw Error(Errc::ZeroVarianceRater, "rater " + m.rater_ids()[r] + " gave the same score to every item");
    }
    cols.emplace_back(c.begin(), c.end());
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < cols.size(); ++a) {
    for (std::size_t b = a + 1; b < cols.size(); ++b) {
      sum += pearson(cols[a], cols[b]);
      ++pairs;
    }
  }
  return {sum / static_cast<double>(pairs), {}};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(text::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(Errc::MalformedRecord, "line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(text::trim(cur));
  return fields;
}

}  // namespace

std::vector<RatingRow> parse_ratings_csv(std::string_view csv) {
  std::vector<RatingRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  std::array<std::size_t, 5> col{};
  bool have_header = false;
  static const std::array<std::string_view, 5> kNames{"doc_id", "model_id", "rater_id", "criterion", "score"};

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto fields = split_csv_line(line, line_no);
    if (!have_header) {
      for (std::size_t k = 0; k < kNames.size(); ++k) {
        const auto it = std::find(fields.begin(), fields.end(), kNames[k]);
        if (it == fields.end()) {
          throw Error(Errc::MalformedRecord, "header lacks column '" + std::string(kNames[k]) + "'");
        }
        col[k] = static_cast<std::size_t>(it - fields.begin());
      }
      have_header = true;
      continue;
    }
    const auto where = "line " + std::to_string(line_no);
    if (fields.size() < 5) throw Error(Errc::MalformedRecord, where + ": expected 5 fields");
    RatingRow row{fields.at(col[0]), fields.at(col[1]), fields.at(col[2]), fields.at(col[3]), 0};
    if (row.doc_id.empty() || row.model_id.empty() || row.rater_id.empty() || row.criterion.empty()) {
      throw Error(Errc::MalformedRecord, where + ": empty field");
    }
    const auto& score = fields.at(col[4]);
    if (score.empty() || score.size() > 2 || !std::all_of(score.begin(), score.end(), ::isdigit)) {
      throw Error(Errc::MalformedRecord, where + ": score '" + score + "' is not an integer 1..10");
    }
    row.score = std::stoi(score);
    if (row.score < kMinScore || row.score > kMaxScore) {
      throw Error(Errc::MalformedRecord, where + ": score " + score + " outside 1..10");
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(Errc::MalformedRecord, "ratings file is empty");
  return rows;
}

std::vector<RatingRow> load_ratings_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Unreadable, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ratings_csv(buf.str());
}

std::vector<RatingGroup> group_ratings(const std::vector<RatingRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<const RatingRow*>> groups;
  for (const auto& r : rows) groups[{r.model_id, r.criterion}].push_back(&r);

  std::vector<RatingGroup> out;
  for (const auto& [key, members] : groups) {
    std::set<std::string> docs, raters;
    for (const auto* r : members) {
      docs.insert(r->doc_id);
      raters.insert(r->rater_id);
    }
    const std::vector<std::string> doc_ids(docs.begin(), docs.end());
    const std::vector<std::string> rater_ids(raters.begin(), raters.end());
    std::vector<std::vector<std::optional<int>>> cells(doc_ids.size(),
                                                       std::vector<std::optional<int>>(rater_ids.size()));
    for (const auto* r : members) {
      const auto i = static_cast<std::size_t>(std::lower_bound(doc_ids.begin(), doc_ids.end(), r->doc_id) - doc_ids.begin());
      const auto k =
          static_cast<std::size_t>(std::lower_bound(rater_ids.begin(), rater_ids.end(), r->rater_id) - rater_ids.begin());
      if (cells[i][k]) {
        throw Error(Errc::MalformedRecord, "duplicate rating for doc " + r->doc_id + ", model " + r->model_id +
                                               ", rater " + r->rater_id + ", criterion " + r->criterion);
      }
      cells[i][k] = r->score;
    }
    out.push_back({key.first, key.second, RatingMatrix(std::move(cells), key.second, rater_ids, doc_ids)});
  }
  return out;
}

namespace {

template <typename F>
StatOutcome outcome(F&& f) {
  StatOutcome o;
  try {
    auto s = f();
    if (!std::isnan(s.value)) o.value = s.value;
    o.flags = std::move(s.flags);
  } catch (const Error& e) {
    o.error = e.what();
  }
  return o;
}

std::string cell(const StatOutcome& o) {
  if (o.value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f%s", *o.value, o.flags.empty() ? "" : "*");
    return buf;
  }
  return o.error.empty() ? "undefined" : "error";
}

}  // namespace

AgreementRow evaluate_group(const RatingGroup& group) {
  const auto& m = group.matrix;
  AgreementRow row;
  row.model_id = group.model_id;
  row.criterion = group.criterion;
  row.items = m.items();
  row.raters = m.raters();
  row.fleiss = outcome([&] { return fleiss_kappa(m); });
  row.cohen = outcome([&] { return cohens_kappa_mean_pairwise(m); });
  row.icc = outcome([&] { return icc_2_1(m); });
  row.alpha = outcome([&] { return krippendorff_alpha_interval(m); });
  row.pearson = outcome([&] { return pearson_mean_pairwise(m); });
  return row;
}

std::vector<AgreementRow> evaluate_all(const std::vector<RatingGroup>& groups) {
  std::vector<AgreementRow> rows;
  rows.reserve(groups.size());
  for (const auto& g : groups) rows.push_back(evaluate_group(g));
  return rows;
}

std::string format_table(const std::vector<AgreementRow>& rows) {
  std::vector<std::array<std::string, 7>> lines;
  lines.push_back({"model", "criterion", "fleiss_kappa", std::string(kCohenVariant), std::string(kIccVariant),
                   std::string(kAlphaVariant), "pearson_mean_pairwise"});
  for (const auto& r : rows) {
    lines.push_back({r.model_id, r.criterion, cell(r.fleiss), cell(r.cohen), cell(r.icc), cell(r.alpha),
                     cell(r.pearson)});
  }
  std::array<std::size_t, 7> width{};
  for (const auto& l : lines) {
    for (std::size_t c = 0; c < l.size(); ++c) width[c] = std::max(width[c], l[c].size());
  }
  std::string out;
  for (const auto& l : lines) {
    std::string line;
    for (std::size_t c = 0; c < l.size(); ++c) {
      if (c > 0) line += "  ";
      line += l[c];
      if (c + 1 < l.size()) line.append(width[c] - l[c].size(), ' ');
    }
    out += text::rtrim(line) + "\n";
  }
  bool any_flag = false;
  for (const auto& r : rows) {
    for (const auto* o : {&r.fleiss, &r.cohen, &r.icc, &r.alpha, &r.pearson}) {
      any_flag = any_flag || !o->flags.empty();
    }
  }
  if (any_flag) out += "* value produced by a degenerate-case convention; see flags\n";
  return out;
}

}  // namespace drafter::iaa
