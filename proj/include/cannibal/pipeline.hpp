#ifndef CANNIBAL_PIPELINE_HPP
#define CANNIBAL_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cannibal/dataset.hpp"
#include "cannibal/gbdt.hpp"
#include "cannibal/objectives.hpp"

namespace cannibal {

struct PipelineConfig {
  TrainConfig stage1;
  TrainConfig stage2;
  TrainConfig stage3;
  // Weeks to forecast from the cutoff; 0 means every test week present.
  int horizon = 0;
  FinetuneMode finetune_mode = FinetuneMode::kSquared;
  // Negative forecasts are set to zero before they are back-padded.
  bool clamp_negative = true;
  // Unset: the first week with a missing target.
  std::optional<Date> cutoff;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Engine settings used by the CLI when the config file is silent.
PipelineConfig default_pipeline_config();

struct ForecastStep {
  std::size_t row = 0;
  // Lag cells as they were when the row was predicted; lags[k-1] = sale(t-k).
  std::array<std::optional<double>, kLagDepth> lags;
  double prediction = 0.0;
};

struct ForecastResult {
  // One entry per test row, in dataset order.
  Eigen::VectorXd predictions;
  std::vector<ForecastStep> steps;
  std::vector<std::string> warnings;
};

/// Week-by-week forecast over the test rows. Lag cells that refer to test
/// weeks are cleared first and then refilled by back-padding this model's own
/// predictions, so week w only ever sees values produced for weeks < w.
/// A lag with no source row is imputed from the product's latest prediction
/// (or latest actual) and reported as a warning.
ForecastResult recursive_forecast(const BoostedEnsemble& model,
                                  PanelDataset& dataset,
                                  bool clamp_negative = true);

struct StageOutputs {
  int stage = 0;
  BoostedEnsemble model;
  Eigen::VectorXd predictions;  // per test row
  std::optional<RatioVector> ratios;  // stage 1 only, per test row
  std::vector<std::string> warnings;
};

struct PreparedPanel {
  PanelDataset dataset;
  std::vector<std::string> excluded_products;
  std::vector<std::string> warnings;
};

/// Splits at `cutoff`, keeps the first `horizon` test weeks (all when 0),
/// drops products with no history, clears test targets and any lag that
/// refers to a test week, and fills lags that refer to history from actuals.
PreparedPanel prepare_panel(const PanelDataset& raw, Date cutoff, int horizon);

/// Weekly groups over rows [begin, end). Totals are looked up when given,
/// otherwise left NaN.
GroupIndex weekly_groups(const PanelDataset& dataset, std::size_t begin,
                         std::size_t end, const CategoryTotals* totals);

/// Baseline: SE model on train rows, recursive forecast, pseudo-labels
/// written into test targets, prediction ratios per test week.
StageOutputs run_stage1(PanelDataset& dataset, const PipelineConfig& config);

/// Constraint model on all rows; only lag cells of test rows change.
StageOutputs run_stage2(PanelDataset& dataset, const CategoryTotals& totals,
                        const PipelineConfig& config);

/// Fine-tune model on all rows. Test rows anchor to stage-1 ratios, train
/// rows to their actual share of the week.
StageOutputs run_stage3(PanelDataset& dataset, const CategoryTotals& totals,
                        const RatioVector& stage1_ratios,
                        const PipelineConfig& config);

/// 1 - sum|a - p| / sum a. Not clamped; may be negative.
double weighted_accuracy(const Eigen::VectorXd& actuals,
                         const Eigen::VectorXd& predictions);

struct SeriesPoint {
  Date week;
  double actual = 0.0;
  double baseline = 0.0;
  double constrained = 0.0;
  double three_stage = 0.0;
};

struct ProductSeries {
  std::string product;
  std::vector<SeriesPoint> points;
};

struct ComparisonReport {
  std::string category;
  Date cutoff;
  int lags = 0;
  double baseline_accuracy = 0.0;
  double three_stage_accuracy = 0.0;
  // Mean over forecast weeks of |sum of forecasts - S|.
  double baseline_sum_deviation = 0.0;
  double three_stage_sum_deviation = 0.0;
  std::vector<ProductSeries> products;
  std::vector<std::string> warnings;
};

/// Baseline versus three-stage on one category. Actuals for test rows come
/// from the data's own targets, else from `hidden_actuals`.
ComparisonReport run_comparison(const PanelDataset& data,
                                const CategoryTotals& totals,
                                const PanelDataset* hidden_actuals,
                                const PipelineConfig& config);

}  // namespace cannibal

#endif  // CANNIBAL_PIPELINE_HPP
