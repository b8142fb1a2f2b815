#ifndef CANNIBAL_REPORT_HPP
#define CANNIBAL_REPORT_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "cannibal/pipeline.hpp"

namespace cannibal {

inline constexpr const char* kSummaryHeader =
    "category,cutoff_date,baseline_accuracy,three_stage_accuracy,lags,run_id";
inline constexpr const char* kSeriesHeader =
    "week,actual,baseline_forecast,three_stage_forecast";

/// One row per category. Accuracies are fractions with six decimals.
void write_summary_csv(std::span<const ComparisonReport> reports,
                       std::string_view run_id, std::ostream& out);

void write_series_csv(const ProductSeries& series, std::ostream& out);

/// Self-contained line chart of actual, baseline and three-stage forecasts.
void write_series_svg(const ProductSeries& series, std::string_view title,
                      std::ostream& out);

/// File-system friendly version of a product token.
std::string safe_file_stem(std::string_view token);

}  // namespace cannibal

#endif  // CANNIBAL_REPORT_HPP
