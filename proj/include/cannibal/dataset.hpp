#ifndef CANNIBAL_DATASET_HPP
#define CANNIBAL_DATASET_HPP

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cannibal/gbdt.hpp"
#include "cannibal/text.hpp"

namespace cannibal {

/// Number of lagged sales columns, sale(t-1) .. sale(t-3).
inline constexpr int kLagDepth = 3;

/// One (product, week) row of the sales panel.
struct SalesRecord {
  std::string category;
  Date week;
  std::string product;
  std::string promotion;
  std::string seasonality;
  // lags[k-1] holds sale(t-k).
  std::array<std::optional<double>, kLagDepth> lags;
  std::optional<double> target;
  // 1-based line in the source CSV (header is line 1); 0 if synthesized.
  std::size_t line = 0;
};

struct Violation {
  std::size_t line = 0;
  std::string message;
};

/// Ordinal token dictionary, codes assigned in first-seen order.
class Vocabulary {
 public:
  int add(const std::string& token);
  /// Throws UnknownCategoryError for tokens never added.
  int code_of(const std::string& token) const;
  const std::string& token(int code) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  std::span<const std::string> tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> codes_;
};

struct Encoding {
  Vocabulary product;
  Vocabulary promotion;
  Vocabulary seasonality;
};

/// Column layout produced by encode_features.
enum FeatureColumn : Index {
  kProductCode = 0,
  kPromotionCode,
  kSeasonalityCode,
  kLag3,
  kLag2,
  kLag1,
  kWeekOfYear,
  kWeeksSinceLaunch,
  kFeatureCount,
};

struct SplitInfo {
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

class PanelDataset;
/// Rows whose week contains or follows the cutoff date go to test.
SplitInfo split_train_test(PanelDataset& dataset, Date cutoff);

/// Sales panel ordered by (week, category, product), so after a split the
/// train rows form the prefix [0, m) and each (category, week) group is
/// contiguous.
class PanelDataset {
 public:
  PanelDataset() = default;
  /// Sorts, then enforces unique (category, product, week), one category per
  /// product and a common weekday for all weeks. Lag-consistency problems are
  /// collected in lag_violations() rather than thrown.
  explicit PanelDataset(std::vector<SalesRecord> records);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const SalesRecord& operator[](std::size_t i) const { return records_[i]; }
  std::span<const SalesRecord> records() const { return records_; }

  std::optional<std::size_t> find(std::string_view product, Date week) const;
  /// Earliest week the product appears in this dataset.
  Date first_week(std::string_view product) const;
  std::vector<std::string> categories() const;
  std::vector<Date> weeks() const;

  const std::vector<Violation>& lag_violations() const {
    return lag_violations_;
  }

  // Split state, set by split_train_test.
  std::optional<Date> cutoff() const { return cutoff_; }
  std::size_t train_size() const { return train_size_; }
  bool is_train(std::size_t i) const { return cutoff_ && i < train_size_; }

  const std::optional<Encoding>& encoding() const { return encoding_; }
  void freeze_encoding(Encoding encoding) { encoding_ = std::move(encoding); }

  /// Writes a pseudo-label. Train rows are read-only.
  void set_target(std::size_t i, double value);
  /// Writes sale(t-k), k in 1..kLagDepth. Train rows are read-only.
  void set_lag(std::size_t i, int k, double value);
  void clear_lag(std::size_t i, int k);
  void clear_target(std::size_t i);

 private:
  friend SplitInfo split_train_test(PanelDataset& dataset, Date cutoff);

  void require_mutable(std::size_t i, const char* what) const;

  std::vector<SalesRecord> records_;
  std::map<std::pair<std::string, Date>, std::size_t, std::less<>> index_;
  std::map<std::string, Date, std::less<>> first_week_;
  std::vector<Violation> lag_violations_;
  std::optional<Date> cutoff_;
  std::size_t train_size_ = 0;
  std::optional<Encoding> encoding_;
};

/// (category, week) -> known total S.
class CategoryTotals {
 public:
  void set(const std::string& category, Date week, double total);
  std::optional<double> get(std::string_view category, Date week) const;
  std::size_t size() const { return totals_.size(); }
  const std::map<std::pair<std::string, Date>, double, std::less<>>& entries()
      const {
    return totals_;
  }

 private:
  std::map<std::pair<std::string, Date>, double, std::less<>> totals_;
};

inline constexpr const char* kSalesHeader =
    "category,date,product,promotion,seasonality,sale_t3,sale_t2,sale_t1,sale_t";
inline constexpr const char* kTotalsHeader = "category,date,total";

PanelDataset load_csv(const std::filesystem::path& path);
PanelDataset read_sales_csv(std::istream& in);
void write_sales_csv(std::span<const SalesRecord> records, std::ostream& out);

CategoryTotals load_totals_csv(const std::filesystem::path& path);
CategoryTotals read_totals_csv(std::istream& in);
void write_totals_csv(const CategoryTotals& totals, std::ostream& out);

/// lag_k(w) == target(w - k weeks) wherever both cells exist.
std::vector<Violation> check_lag_consistency(std::span<const SalesRecord> records);

/// Dictionary over every row, in dataset order.
Encoding build_encoding(const PanelDataset& dataset);

/// Encodes all rows with the dataset's frozen encoding (built on the fly if
/// none is frozen yet).
FeatureMatrix encode_features(const PanelDataset& dataset);
/// Encodes selected rows with an explicit dictionary.
FeatureMatrix encode_rows(const PanelDataset& dataset, const Encoding& encoding,
                          std::span<const std::size_t> rows);

struct DecodedTokens {
  std::string product;
  std::string promotion;
  std::string seasonality;
};
DecodedTokens decode_tokens(const FeatureMatrix& features, Index row,
                            const Encoding& encoding);

/// Writes a prediction for (product, week) into sale(t-k) of the product's
/// row k weeks later, for k = 1..kLagDepth, where such rows exist.
void back_pad(PanelDataset& dataset, std::string_view product, Date week,
              double predicted);

/// Known weekly totals for every (category, week) in the dataset: external
/// totals win, historical weeks fall back to the sum of targets.
CategoryTotals category_weekly_actuals(const PanelDataset& dataset,
                                       const CategoryTotals& external = {});

/// First week in which some row has no target, if any.
std::optional<Date> detect_cutoff(const PanelDataset& dataset);

/// Lag consistency, historical completeness, totals coverage and agreement.
std::vector<Violation> validate_panel(const PanelDataset& dataset,
                                      const CategoryTotals& totals);

}  // namespace cannibal

#endif  // CANNIBAL_DATASET_HPP
