#include "cannibal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "cannibal/errors.hpp"

namespace cannibal {

namespace {

constexpr std::chrono::days kWeek{7};

bool same_units(double a, double b) {
  return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(b));
}

std::string where(const SalesRecord& r) {
  return r.product + " @ " + format_date(r.week);
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

int Vocabulary::add(const std::string& token) {
  const auto it = codes_.find(token);
  if (it != codes_.end()) return it->second;
  const int code = size();
  tokens_.push_back(token);
  codes_.emplace(token, code);
  return code;
}

int Vocabulary::code_of(const std::string& token) const {
  const auto it = codes_.find(token);
  if (it == codes_.end()) {
    throw UnknownCategoryError("token '" + token +
                               "' is not in the frozen encoding");
  }
  return it->second;
}

const std::string& Vocabulary::token(int code) const {
  if (code < 0 || code >= size()) {
    throw UnknownCategoryError("no token for code " + std::to_string(code));
  }
  return tokens_[static_cast<std::size_t>(code)];
}

// ---------------------------------------------------------------------------
// PanelDataset

PanelDataset::PanelDataset(std::vector<SalesRecord> records)
    : records_(std::move(records)) {
  std::stable_sort(records_.begin(), records_.end(),
                   [](const SalesRecord& a, const SalesRecord& b) {
                     return std::tie(a.week, a.category, a.product) <
                            std::tie(b.week, b.category, b.product);
                   });
  std::map<std::string, std::string, std::less<>> category_of;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const SalesRecord& r = records_[i];
    const auto [it, inserted] = index_.emplace(std::pair{r.product, r.week}, i);
    if (!inserted) {
      throw IntegrityError("duplicate (category, product, week) " + where(r) +
                           " on lines " +
                           std::to_string(records_[it->second].line) + " and " +
                           std::to_string(r.line));
    }
    const auto [cat, fresh] = category_of.emplace(r.product, r.category);
    if (!fresh && cat->second != r.category) {
      throw IntegrityError("product " + r.product +
                           " appears in categories " + cat->second + " and " +
                           r.category + " (line " + std::to_string(r.line) +
                           ")");
    }
    first_week_.emplace(r.product, r.week);
    if (std::chrono::weekday{r.week} != std::chrono::weekday{records_[0].week}) {
      throw IntegrityError("week " + format_date(r.week) + " on line " +
                           std::to_string(r.line) +
                           " is not aligned to the weekday of " +
                           format_date(records_[0].week));
    }
  }
  lag_violations_ = check_lag_consistency(records_);
}

std::optional<std::size_t> PanelDataset::find(std::string_view product,
                                              Date week) const {
  const auto it = index_.find(std::pair{std::string(product), week});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Date PanelDataset::first_week(std::string_view product) const {
  const auto it = first_week_.find(product);
  if (it == first_week_.end()) {
    throw UnknownCategoryError("unknown product '" + std::string(product) + "'");
  }
  return it->second;
}

std::vector<std::string> PanelDataset::categories() const {
  std::set<std::string> seen;
  for (const SalesRecord& r : records_) seen.insert(r.category);
  return {seen.begin(), seen.end()};
}

std::vector<Date> PanelDataset::weeks() const {
  std::vector<Date> out;
  for (const SalesRecord& r : records_) {
    if (out.empty() || out.back() != r.week) out.push_back(r.week);
  }
  return out;
}

void PanelDataset::require_mutable(std::size_t i, const char* what) const {
  if (i >= records_.size()) throw ContractError("row index out of range");
  if (is_train(i)) {
    throw IntegrityError(std::string("refusing to overwrite ") + what +
                         " of train row " + where(records_[i]));
  }
}

void PanelDataset::set_target(std::size_t i, double value) {
  require_mutable(i, "target");
  records_[i].target = value;
}

void PanelDataset::set_lag(std::size_t i, int k, double value) {
  if (k < 1 || k > kLagDepth) throw ContractError("lag index out of range");
  require_mutable(i, "lag");
  records_[i].lags[static_cast<std::size_t>(k - 1)] = value;
}

void PanelDataset::clear_lag(std::size_t i, int k) {
  if (k < 1 || k > kLagDepth) throw ContractError("lag index out of range");
  require_mutable(i, "lag");
  records_[i].lags[static_cast<std::size_t>(k - 1)].reset();
}

void PanelDataset::clear_target(std::size_t i) {
  require_mutable(i, "target");
  records_[i].target.reset();
}

// ---------------------------------------------------------------------------
// CategoryTotals

void CategoryTotals::set(const std::string& category, Date week, double total) {
  totals_[std::pair{category, week}] = total;
}

std::optional<double> CategoryTotals::get(std::string_view category,
                                          Date week) const {
  const auto it = totals_.find(std::pair{std::string(category), week});
  if (it == totals_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> read_header(std::istream& in, std::size_t& line_no,
                                     std::string_view expected) {
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError("line 1: missing header, expected '" +
                     std::string(expected) + "'");
  }
  line_no = 1;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  auto fields = text::split_csv(line);
  const auto want = text::split_csv(expected);
  if (!fields || *fields != *want) {
    throw ParseError("line 1: header must be '" + std::string(expected) + "'");
  }
  return *fields;
}

std::optional<double> units_cell(const std::string& cell, std::size_t line_no,
                                 const char* column) {
  if (cell.empty()) return std::nullopt;
  const auto v = text::parse_real(cell);
  if (!v || !std::isfinite(*v) || *v < 0.0) {
    throw ParseError("line " + std::to_string(line_no) + ": " + column +
                     " must be a non-negative number, got '" + cell + "'");
  }
  return v;
}

Date date_cell(const std::string& cell, std::size_t line_no) {
  const auto d = parse_date(cell);
  if (!d) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": date must be YYYY-MM-DD, got '" + cell + "'");
  }
  return *d;
}

std::string token_cell(const std::string& cell, std::size_t line_no,
                       const char* column) {
  if (cell.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": empty " + column);
  }
  return cell;
}

template <typename Fn>
void for_each_data_line(std::istream& in, std::size_t& line_no,
                        std::size_t n_fields, Fn&& fn) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split_csv(line);
    if (!fields) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": unterminated quote");
    }
    if (fields->size() != n_fields) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(n_fields) + " fields, found " +
                       std::to_string(fields->size()));
    }
    fn(*fields);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

}  // namespace

PanelDataset read_sales_csv(std::istream& in) {
  std::size_t line_no = 0;
  const auto header = read_header(in, line_no, kSalesHeader);
  std::vector<SalesRecord> records;
  for_each_data_line(in, line_no, header.size(), [&](const auto& f) {
    SalesRecord r;
    r.line = line_no;
    r.category = token_cell(f[0], line_no, "category");
    r.week = date_cell(f[1], line_no);
    r.product = token_cell(f[2], line_no, "product");
    r.promotion = token_cell(f[3], line_no, "promotion");
    r.seasonality = token_cell(f[4], line_no, "seasonality");
    r.lags[2] = units_cell(f[5], line_no, "sale_t3");
    r.lags[1] = units_cell(f[6], line_no, "sale_t2");
    r.lags[0] = units_cell(f[7], line_no, "sale_t1");
    r.target = units_cell(f[8], line_no, "sale_t");
    records.push_back(std::move(r));
  });
  return PanelDataset(std::move(records));
}

PanelDataset load_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_sales_csv(in);
}

void write_sales_csv(std::span<const SalesRecord> records, std::ostream& out) {
  const auto cell = [](const std::optional<double>& v) {
    return v ? text::format_real(*v) : std::string();
  };
  out << kSalesHeader << '\n';
  for (const SalesRecord& r : records) {
    out << text::csv_field(r.category) << ',' << format_date(r.week) << ','
        << text::csv_field(r.product) << ',' << text::csv_field(r.promotion)
        << ',' << text::csv_field(r.seasonality) << ',' << cell(r.lags[2])
        << ',' << cell(r.lags[1]) << ',' << cell(r.lags[0]) << ','
        << cell(r.target) << '\n';
  }
}

CategoryTotals read_totals_csv(std::istream& in) {
  std::size_t line_no = 0;
  const auto header = read_header(in, line_no, kTotalsHeader);
  CategoryTotals totals;
  for_each_data_line(in, line_no, header.size(), [&](const auto& f) {
    const std::string category = token_cell(f[0], line_no, "category");
    const Date week = date_cell(f[1], line_no);
    const auto total = units_cell(f[2], line_no, "total");
    if (!total) {
      throw ParseError("line " + std::to_string(line_no) + ": empty total");
    }
    if (totals.get(category, week)) {
      throw IntegrityError("line " + std::to_string(line_no) +
                           ": duplicate total for " + category + " @ " +
                           format_date(week));
    }
    totals.set(category, week, *total);
  });
  return totals;
}

CategoryTotals load_totals_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_totals_csv(in);
}

void write_totals_csv(const CategoryTotals& totals, std::ostream& out) {
  out << kTotalsHeader << '\n';
  for (const auto& [key, total] : totals.entries()) {
    out << text::csv_field(key.first) << ',' << format_date(key.second) << ','
        << text::format_real(total) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Violation> check_lag_consistency(
    std::span<const SalesRecord> records) {
  std::map<std::pair<std::string, Date>, const SalesRecord*, std::less<>> by_key;
  for (const SalesRecord& r : records) by_key.emplace(std::pair{r.product, r.week}, &r);

  std::vector<Violation> out;
  for (const SalesRecord& r : records) {
    for (int k = 1; k <= kLagDepth; ++k) {
      const auto& lag = r.lags[static_cast<std::size_t>(k - 1)];
      if (!lag) continue;
      const auto it = by_key.find(std::pair{r.product, r.week - k * kWeek});
      if (it == by_key.end() || !it->second->target) continue;
      const double actual = *it->second->target;
      if (!same_units(*lag, actual)) {
        out.push_back({r.line, "sale_t" + std::to_string(k) + " of " +
                                   where(r) + " is " + text::format_real(*lag) +
                                   " but sale_t of " +
                                   format_date(it->second->week) + " is " +
                                   text::format_real(actual)});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Violation& a, const Violation& b) {
                     return a.line < b.line;
                   });
  return out;
}

std::optional<Date> detect_cutoff(const PanelDataset& dataset) {
  for (const SalesRecord& r : dataset.records()) {
    if (!r.target) return r.week;
  }
  return std::nullopt;
}

namespace {

// Rows of one (category, week) group, in dataset order.
struct WeekGroup {
  std::string category;
  Date week;
  std::vector<std::size_t> rows;
};

std::vector<WeekGroup> week_groups(const PanelDataset& dataset) {
  std::vector<WeekGroup> groups;
  std::map<std::pair<std::string, Date>, std::size_t> slot;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const SalesRecord& r = dataset[i];
    const auto [it, fresh] = slot.emplace(std::pair{r.category, r.week}, groups.size());
    if (fresh) groups.push_back({r.category, r.week, {}});
    groups[it->second].rows.push_back(i);
  }
  return groups;
}

std::optional<Date> effective_cutoff(const PanelDataset& dataset) {
  return dataset.cutoff() ? dataset.cutoff() : detect_cutoff(dataset);
}

bool historical(const std::optional<Date>& cutoff, Date week) {
  return !cutoff || week < *cutoff;
}

}  // namespace

CategoryTotals category_weekly_actuals(const PanelDataset& dataset,
                                       const CategoryTotals& external) {
  const auto cutoff = effective_cutoff(dataset);
  CategoryTotals out;
  for (const WeekGroup& g : week_groups(dataset)) {
    if (const auto known = external.get(g.category, g.week)) {
      out.set(g.category, g.week, *known);
      continue;
    }
    bool complete = historical(cutoff, g.week);
    double sum = 0.0;
    for (std::size_t i : g.rows) {
      if (!dataset[i].target) {
        complete = false;
        break;
      }
      sum += *dataset[i].target;
    }
    if (!complete) {
      throw ConstraintDataError("no category total for " + g.category + " @ " +
                                format_date(g.week));
    }
    out.set(g.category, g.week, sum);
  }
  return out;
}

std::vector<Violation> validate_panel(const PanelDataset& dataset,
                                      const CategoryTotals& totals) {
  std::vector<Violation> out = check_lag_consistency(dataset.records());
  const auto cutoff = effective_cutoff(dataset);

  for (const SalesRecord& r : dataset.records()) {
    if (!historical(cutoff, r.week)) continue;
    if (!r.target) {
      out.push_back({r.line, "historical row " + where(r) + " has no sale_t"});
    }
    for (int k = 1; k <= kLagDepth; ++k) {
      if (!r.lags[static_cast<std::size_t>(k - 1)]) {
        out.push_back({r.line, "historical row " + where(r) + " has no sale_t" +
                                   std::to_string(k)});
      }
    }
  }

  for (const WeekGroup& g : week_groups(dataset)) {
    const std::size_t line = dataset[g.rows.front()].line;
    const auto known = totals.get(g.category, g.week);
    const std::string label = g.category + " @ " + format_date(g.week);
    if (!historical(cutoff, g.week)) {
      if (!known) out.push_back({line, "missing category total for " + label});
      continue;
    }
    if (!known) continue;
    double sum = 0.0;
    bool complete = true;
    for (std::size_t i : g.rows) {
      if (dataset[i].target) {
        sum += *dataset[i].target;
      } else {
        complete = false;
      }
    }
    if (complete && !same_units(*known, sum)) {
      out.push_back({line, "category total for " + label + " is " +
                               text::format_real(*known) +
                               " but the week's sales sum to " +
                               text::format_real(sum)});
    }
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const Violation& a, const Violation& b) {
                     return a.line < b.line;
                   });
  return out;
}

// ---------------------------------------------------------------------------
// Features

Encoding build_encoding(const PanelDataset& dataset) {
  Encoding enc;
  for (const SalesRecord& r : dataset.records()) {
    enc.product.add(r.product);
    enc.promotion.add(r.promotion);
    enc.seasonality.add(r.seasonality);
  }
  return enc;
}

FeatureMatrix encode_rows(const PanelDataset& dataset, const Encoding& encoding,
                          std::span<const std::size_t> rows) {
  FeatureMatrix x(static_cast<Index>(rows.size()), kFeatureCount);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto row = static_cast<Index>(k);
    const SalesRecord& r = dataset[rows[k]];
    x.set(row, kProductCode, encoding.product.code_of(r.product));
    x.set(row, kPromotionCode, encoding.promotion.code_of(r.promotion));
    x.set(row, kSeasonalityCode, encoding.seasonality.code_of(r.seasonality));
    const Index lag_cols[kLagDepth] = {kLag1, kLag2, kLag3};
    for (int lag = 0; lag < kLagDepth; ++lag) {
      const auto& v = r.lags[static_cast<std::size_t>(lag)];
      if (v) {
        x.set(row, lag_cols[lag], *v);
      } else {
        x.set_missing(row, lag_cols[lag]);
      }
    }
    x.set(row, kWeekOfYear, iso_week_of_year(r.week));
    x.set(row, kWeeksSinceLaunch,
          static_cast<double>((r.week - dataset.first_week(r.product)).count() / 7));
  }
  return x;
}

FeatureMatrix encode_features(const PanelDataset& dataset) {
  std::vector<std::size_t> rows(dataset.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  if (dataset.encoding()) return encode_rows(dataset, *dataset.encoding(), rows);
  return encode_rows(dataset, build_encoding(dataset), rows);
}

DecodedTokens decode_tokens(const FeatureMatrix& features, Index row,
                            const Encoding& encoding) {
  const auto code = [&](Index col) {
    return static_cast<int>(features.value(row, col));
  };
  return {encoding.product.token(code(kProductCode)),
          encoding.promotion.token(code(kPromotionCode)),
          encoding.seasonality.token(code(kSeasonalityCode))};
}

// ---------------------------------------------------------------------------
// Split and back-padding

SplitInfo split_train_test(PanelDataset& dataset, Date cutoff) {
  // A row is train only if its whole week ends on or before the cutoff.
  std::size_t m = 0;
  while (m < dataset.size() && dataset[m].week + kWeek <= cutoff) ++m;
  if (m == 0) {
    throw ConfigError("cutoff " + format_date(cutoff) +
                      " leaves no train rows");
  }
  if (m == dataset.size()) {
    throw ConfigError("cutoff " + format_date(cutoff) + " leaves no test rows");
  }
  dataset.cutoff_ = dataset[m].week;
  dataset.train_size_ = m;
  return {m, dataset.size() - m};
}

void back_pad(PanelDataset& dataset, std::string_view product, Date week,
              double predicted) {
  if (!dataset.cutoff()) {
    throw ConfigError("back_pad requires a train/test split");
  }
  std::optional<std::size_t> targets[kLagDepth];
  for (int k = 1; k <= kLagDepth; ++k) {
    targets[k - 1] = dataset.find(product, week + k * kWeek);
    if (targets[k - 1] && dataset.is_train(*targets[k - 1])) {
      throw IntegrityError("back-padding " + std::string(product) + " @ " +
                           format_date(week) +
                           " would overwrite an actual lag of a train row");
    }
  }
  for (int k = 1; k <= kLagDepth; ++k) {
    if (targets[k - 1]) dataset.set_lag(*targets[k - 1], k, predicted);
  }
}

}  // namespace cannibal
