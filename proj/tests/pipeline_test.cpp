#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "cannibal/errors.hpp"
#include "cannibal/pipeline.hpp"
#include "cannibal/synthgen.hpp"

namespace cannibal {
namespace {

ScenarioConfig small_scenario(int existing = 3) {
  ScenarioConfig s;
  s.n_existing_products = existing;
  s.n_npi_products = 0;
  s.share_stealing_rate = 0.0;
  s.total_weeks = 60;
  s.cutoff_week = 52;
  s.npi_launch_week = 52;
  s.category_total_base = 3000.0;
  s.seed = 17;
  return s;
}

PipelineConfig quick_config(int horizon) {
  PipelineConfig cfg = default_pipeline_config();
  cfg.stage1.n_rounds = 40;
  cfg.stage2.n_rounds = 60;
  cfg.stage3.n_rounds = 60;
  cfg.horizon = horizon;
  return cfg;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Date cutoff_of(const SyntheticPanel& p) { return *detect_cutoff(p.dataset); }

TEST(WeightedAccuracy, HandComputedExamples) {
  EXPECT_DOUBLE_EQ(weighted_accuracy(vec({100, 100}), vec({90, 110})), 0.9);
  EXPECT_EQ(weighted_accuracy(vec({3, 4, 5}), vec({3, 4, 5})), 1.0);
  EXPECT_EQ(weighted_accuracy(vec({3, 4, 5}), vec({6, 8, 10})), 0.0);
}

TEST(WeightedAccuracy, CanBeNegative) {
  EXPECT_LT(weighted_accuracy(vec({1, 1}), vec({5, 5})), 0.0);
}

TEST(WeightedAccuracy, RejectsBadInput) {
  EXPECT_THROW(weighted_accuracy(vec({1, 2}), vec({1})), ShapeError);
  EXPECT_THROW(weighted_accuracy(Eigen::VectorXd(), Eigen::VectorXd()),
               UndefinedMetricError);
  EXPECT_THROW(weighted_accuracy(vec({0, 0}), vec({1, 1})), UndefinedMetricError);
}

TEST(PreparePanel, ClearsTestTargetsAndFutureLags) {
  const SyntheticPanel p = generate(small_scenario());
  const PreparedPanel prep = prepare_panel(p.dataset,
                                           cutoff_of(p), 4);
  const PanelDataset& ds = prep.dataset;
  const Date cutoff = *ds.cutoff();
  for (std::size_t i = ds.train_size(); i < ds.size(); ++i) {
    EXPECT_FALSE(ds[i].target);
    for (int k = 1; k <= kLagDepth; ++k) {
      const bool refers_to_test = ds[i].week - std::chrono::days{7 * k} >= cutoff;
      EXPECT_EQ(ds[i].lags[static_cast<std::size_t>(k - 1)].has_value(), !refers_to_test);
    }
  }
  EXPECT_EQ(ds.weeks().size(), 52u + 4u);
}

TEST(PreparePanel, HorizonBeyondTestWeeksThrows) {
  const SyntheticPanel p = generate(small_scenario());
  EXPECT_THROW(prepare_panel(p.dataset, cutoff_of(p), 9), ConfigError);
}

TEST(PreparePanel, ProductWithoutHistoryIsExcluded) {
  const SyntheticPanel p = generate(small_scenario());
  std::vector<SalesRecord> rows(p.dataset.records().begin(), p.dataset.records().end());
  SalesRecord launch = rows.back();
  launch.product = "NEW";
  launch.lags = {};
  rows.push_back(launch);
  const PreparedPanel prep = prepare_panel(PanelDataset(std::move(rows)), cutoff_of(p), 0);
  ASSERT_EQ(prep.excluded_products, std::vector<std::string>{"NEW"});
  EXPECT_EQ(prep.warnings.size(), 1u);
  for (const SalesRecord& r : prep.dataset.records()) EXPECT_NE(r.product, "NEW");
}

TEST(RecursiveForecast, HorizonOneMatchesPlainPredict) {
  const SyntheticPanel p = generate(small_scenario());
  PreparedPanel prep = prepare_panel(p.dataset, cutoff_of(p), 1);
  PanelDataset& ds = prep.dataset;
  ds.freeze_encoding(build_encoding(ds));
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds.is_train(i) ? train : test).push_back(i);
  Eigen::VectorXd y(static_cast<Index>(train.size()));
  for (std::size_t i : train) y[static_cast<Index>(i)] = *ds[i].target;
  TrainConfig cfg;
  cfg.n_rounds = 20;
  const BoostedEnsemble model =
      fit(encode_rows(ds, *ds.encoding(), train), make_se_objective(y), cfg);

  const Eigen::VectorXd plain = predict(model, encode_rows(ds, *ds.encoding(), test));
  const ForecastResult fc = recursive_forecast(model, ds, false);
  ASSERT_EQ(fc.predictions.size(), plain.size());
  EXPECT_TRUE((fc.predictions.array() == plain.array()).all());
}

TEST(RecursiveForecast, PredictionFeedsNextWeeksLag) {
  const SyntheticPanel p = generate(small_scenario(1));
  PreparedPanel prep = prepare_panel(p.dataset, cutoff_of(p), 2);
  BoostedEnsemble constant;
  constant.base_score = 100.0;
  constant.n_features = kFeatureCount;
  const ForecastResult fc = recursive_forecast(constant, prep.dataset);
  ASSERT_EQ(fc.steps.size(), 2u);
  EXPECT_EQ(fc.steps[0].prediction, 100.0);
  EXPECT_EQ(fc.steps[1].lags[0], 100.0);
  // sale(t-2) of the second week is still the last actual.
  const auto last = p.dataset.find(p.dataset[0].product,
                                   cutoff_of(p) - std::chrono::days{7});
  EXPECT_EQ(fc.steps[1].lags[1], p.dataset[*last].target);
}

TEST(RecursiveForecast, WithoutSplitThrows) {
  PanelDataset ds = generate(small_scenario()).dataset;
  EXPECT_THROW(recursive_forecast(BoostedEnsemble{}, ds), ConfigError);
}

TEST(Stage1, WritesPseudoLabelsAndRatios) {
  const SyntheticPanel p = generate(small_scenario());
  PreparedPanel prep = prepare_panel(p.dataset, cutoff_of(p), 0);
  PanelDataset& ds = prep.dataset;
  std::ostringstream before;
  write_sales_csv(ds.records().first(ds.train_size()), before);

  const StageOutputs s1 = run_stage1(ds, quick_config(0));
  std::ostringstream after;
  write_sales_csv(ds.records().first(ds.train_size()), after);
  EXPECT_EQ(before.str(), after.str());

  const std::size_t m = ds.train_size();
  ASSERT_TRUE(s1.ratios);
  for (std::size_t i = m; i < ds.size(); ++i) {
    EXPECT_EQ(ds[i].target, s1.predictions[static_cast<Index>(i - m)]);
  }
  const GroupIndex weeks = weekly_groups(ds, m, ds.size(), nullptr);
  const Eigen::VectorXd sums = weeks.group_sums(*s1.ratios);
  for (Index k = 0; k < weeks.groups(); ++k) EXPECT_NEAR(sums[k], 1.0, 1e-9);
}

TEST(Stage1, TracksAStableContinuation) {
  ScenarioConfig s = small_scenario();
  s.noise_sd = 0.0;
  s.drift_sd = 0.0;
  s.promo_rate = 0.0;
  s.seasonal_spikes.clear();
  const SyntheticPanel p = generate(s);
  PreparedPanel prep = prepare_panel(p.dataset, cutoff_of(p), 0);
  const StageOutputs s1 = run_stage1(prep.dataset, quick_config(0));
  const PanelDataset& ds = prep.dataset;
  for (std::size_t i = ds.train_size(); i < ds.size(); ++i) {
    const double actual = *p.actuals[*p.actuals.find(ds[i].product, ds[i].week)].target;
    EXPECT_NEAR(s1.predictions[static_cast<Index>(i - ds.train_size())], actual,
                0.02 * actual);
  }
}

TEST(Stage2, PullsInflatedWeeksTowardTheTotal) {
  const SyntheticPanel p = generate(small_scenario());
  PreparedPanel prep = prepare_panel(p.dataset, cutoff_of(p), 0);
  PanelDataset& ds = prep.dataset;
  const std::size_t m = ds.train_size();
  const std::size_t n = ds.size();
  Eigen::VectorXd inflated(static_cast<Index>(n - m));
  for (std::size_t i = m; i < n; ++i) {
    const double actual = *p.actuals[*p.actuals.find(ds[i].product, ds[i].week)].target;
    inflated[static_cast<Index>(i - m)] = 1.1 * actual;
    ds.set_target(i, 1.1 * actual);
  }
  const CategoryTotals totals = category_weekly_actuals(ds, p.totals);
  const StageOutputs s2 = run_stage2(ds, totals, quick_config(0));
  const GroupIndex weeks = weekly_groups(ds, m, n, &totals);
  const Eigen::VectorXd before = (weeks.group_sums(inflated) - weeks.totals()).cwiseAbs();
  const Eigen::VectorXd after =
      (weeks.group_sums(s2.predictions) - weeks.totals()).cwiseAbs();
  for (Index k = 0; k < weeks.groups(); ++k) {
    EXPECT_LT(after[k], before[k]) << weeks.name(k);
  }
}

TEST(Stage3, SingleProductTracksTheTotal) {
  const SyntheticPanel p = generate(small_scenario(1));
  PreparedPanel prep = prepare_panel(p.dataset, cutoff_of(p), 0);
  PanelDataset& ds = prep.dataset;
  const PipelineConfig cfg = quick_config(0);
  const CategoryTotals totals = category_weekly_actuals(ds, p.totals);
  const StageOutputs s1 = run_stage1(ds, cfg);
  run_stage2(ds, totals, cfg);
  const StageOutputs s3 = run_stage3(ds, totals, *s1.ratios, cfg);
  for (std::size_t i = ds.train_size(); i < ds.size(); ++i) {
    const double s = *totals.get(ds[i].category, ds[i].week);
    EXPECT_NEAR(s3.predictions[static_cast<Index>(i - ds.train_size())], s, 0.05 * s);
  }
}

TEST(Stage3, RatioCountMustMatch) {
  const SyntheticPanel p = generate(small_scenario());
  PreparedPanel prep = prepare_panel(p.dataset, cutoff_of(p), 0);
  run_stage1(prep.dataset, quick_config(0));
  EXPECT_THROW(run_stage3(prep.dataset, p.totals, Eigen::VectorXd::Ones(2), quick_config(0)),
               ContractError);
}

TEST(Comparison, ReportShapeAndDeterminism) {
  const SyntheticPanel p = generate(small_scenario());
  const PipelineConfig cfg = quick_config(6);
  const ComparisonReport a = run_comparison(p.dataset, p.totals, &p.actuals, cfg);
  const ComparisonReport b = run_comparison(p.dataset, p.totals, &p.actuals, cfg);
  EXPECT_EQ(a.lags, 6);
  EXPECT_EQ(a.category, "Category_A");
  EXPECT_EQ(a.products.size(), 3u);
  for (const ProductSeries& s : a.products) EXPECT_EQ(s.points.size(), 6u);
  EXPECT_EQ(a.baseline_accuracy, b.baseline_accuracy);
  EXPECT_EQ(a.three_stage_accuracy, b.three_stage_accuracy);
}

TEST(Comparison, NeedsActuals) {
  const SyntheticPanel p = generate(small_scenario());
  EXPECT_THROW(run_comparison(p.dataset, p.totals, nullptr, quick_config(2)),
               IntegrityError);
}

TEST(Comparison, RejectsSeveralCategories) {
  const SyntheticPanel p = generate(small_scenario());
  std::vector<SalesRecord> rows(p.dataset.records().begin(), p.dataset.records().end());
  for (SalesRecord& r : rows) {
    if (r.product == rows.front().product) {
      r.category = "Other";
    }
  }
  EXPECT_THROW(run_comparison(PanelDataset(std::move(rows)), p.totals, &p.actuals,
                              quick_config(2)),
               ConfigError);
}

TEST(PipelineConfig, Validation) {
  PipelineConfig cfg = default_pipeline_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.horizon = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace cannibal
