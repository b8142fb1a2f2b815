#include "cannibal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "cannibal/errors.hpp"

namespace cannibal {

namespace {

constexpr std::chrono::days kWeek{7};

std::string row_label(const SalesRecord& r) {
  return r.product + " @ " + format_date(r.week);
}

void warn(std::vector<std::string>& sink, std::string message) {
  spdlog::warn("{}", message);
  sink.push_back(std::move(message));
}

std::vector<std::size_t> iota_rows(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows;
  rows.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) rows.push_back(i);
  return rows;
}

const Encoding& frozen_encoding(PanelDataset& dataset) {
  if (!dataset.encoding()) dataset.freeze_encoding(build_encoding(dataset));
  return *dataset.encoding();
}

void require_split(const PanelDataset& dataset) {
  if (!dataset.cutoff()) throw ConfigError("dataset has no train/test split");
  if (dataset.train_size() == dataset.size()) {
    throw EmptyInputError("no test rows to forecast");
  }
}

Eigen::VectorXd targets(const PanelDataset& dataset, std::size_t begin,
                        std::size_t end) {
  Eigen::VectorXd y(static_cast<Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) {
    const auto& t = dataset[i].target;
    if (!t) {
      throw ContractError("row " + row_label(dataset[i]) +
                          " has no target; stage 1 must run first");
    }
    y[static_cast<Index>(i - begin)] = *t;
  }
  return y;
}

}  // namespace

void PipelineConfig::validate() const {
  stage1.validate();
  stage2.validate();
  stage3.validate();
  if (horizon < 0) throw ConfigError("horizon must be >= 1 (or 0 for all)");
}

PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.stage1.n_rounds = 150;
  cfg.stage1.learning_rate = 0.1;
  cfg.stage1.max_depth = 5;
  cfg.stage1.lambda = 1.0;
  cfg.stage1.min_samples_leaf = 3;
  // The diagonal Hessian understates within-week coupling by a factor of
  // about count_w, so the coupled stages use a smaller step.
  cfg.stage2 = cfg.stage1;
  cfg.stage2.n_rounds = 300;
  cfg.stage2.learning_rate = 0.05;
  cfg.stage2.max_depth = 6;
  cfg.stage2.min_samples_leaf = 1;
  cfg.stage3 = cfg.stage2;
  return cfg;
}

// ---------------------------------------------------------------------------
// Recursive forecasting

ForecastResult recursive_forecast(const BoostedEnsemble& model,
                                  PanelDataset& dataset, bool clamp_negative) {
  require_split(dataset);
  const Encoding& encoding = frozen_encoding(dataset);
  const std::size_t m = dataset.train_size();
  const std::size_t n = dataset.size();
  const Date cutoff = *dataset.cutoff();

  ForecastResult out;
  out.predictions.resize(static_cast<Index>(n - m));

  std::map<std::string, double, std::less<>> latest;
  for (std::size_t i = 0; i < m; ++i) {
    if (dataset[i].target) latest[dataset[i].product] = *dataset[i].target;
  }
  for (std::size_t i = m; i < n; ++i) {
    for (int k = 1; k <= kLagDepth; ++k) {
      if (dataset[i].week - k * kWeek >= cutoff) dataset.clear_lag(i, k);
    }
  }

  std::size_t begin = m;
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && dataset[end].week == dataset[begin].week) ++end;

    for (std::size_t i = begin; i < end; ++i) {
      for (int k = 1; k <= kLagDepth; ++k) {
        if (dataset[i].lags[static_cast<std::size_t>(k - 1)]) continue;
        const auto it = latest.find(dataset[i].product);
        if (it == latest.end()) continue;
        dataset.set_lag(i, k, it->second);
        warn(out.warnings, "sale_t" + std::to_string(k) + " of " +
                               row_label(dataset[i]) +
                               " has no source week; imputed " +
                               text::format_real(it->second));
      }
    }

    const std::vector<std::size_t> rows = iota_rows(begin, end);
    const Eigen::VectorXd p = predict(model, encode_rows(dataset, encoding, rows));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t i = rows[k];
      double value = p[static_cast<Index>(k)];
      if (!std::isfinite(value)) {
        throw NumericError("non-finite forecast for " + row_label(dataset[i]));
      }
      if (clamp_negative) value = std::max(0.0, value);
      out.predictions[static_cast<Index>(i - m)] = value;
      out.steps.push_back({i, dataset[i].lags, value});
    }
    for (std::size_t i : rows) {
      const double value = out.predictions[static_cast<Index>(i - m)];
      back_pad(dataset, dataset[i].product, dataset[i].week, value);
      latest[dataset[i].product] = value;
    }
    begin = end;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preparation and grouping

PreparedPanel prepare_panel(const PanelDataset& raw, Date cutoff, int horizon) {
  const auto is_history = [&](Date week) { return week + kWeek <= cutoff; };

  std::set<std::string, std::less<>> known;
  std::vector<Date> test_weeks;
  for (const SalesRecord& r : raw.records()) {
    if (is_history(r.week)) {
      known.insert(r.product);
    } else if (test_weeks.empty() || test_weeks.back() != r.week) {
      test_weeks.push_back(r.week);
    }
  }
  if (known.empty()) {
    throw ConfigError("cutoff " + format_date(cutoff) + " leaves no train rows");
  }
  if (test_weeks.empty()) {
    throw ConfigError("cutoff " + format_date(cutoff) + " leaves no test rows");
  }
  if (horizon > static_cast<int>(test_weeks.size())) {
    throw ConfigError("horizon " + std::to_string(horizon) + " exceeds the " +
                      std::to_string(test_weeks.size()) +
                      " test weeks available");
  }
  const Date last_week =
      test_weeks[static_cast<std::size_t>(horizon > 0 ? horizon - 1
                                                      : test_weeks.size() - 1)];

  PreparedPanel out;
  std::vector<SalesRecord> kept;
  for (const SalesRecord& r : raw.records()) {
    if (is_history(r.week)) {
      kept.push_back(r);
      continue;
    }
    if (r.week > last_week) continue;
    if (!known.contains(r.product)) {
      if (std::find(out.excluded_products.begin(), out.excluded_products.end(),
                    r.product) == out.excluded_products.end()) {
        out.excluded_products.push_back(r.product);
        warn(out.warnings, "product " + r.product +
                               " has no history before the cutoff; excluded "
                               "from forecasting");
      }
      continue;
    }
    SalesRecord t = r;
    t.target.reset();
    for (int k = 1; k <= kLagDepth; ++k) {
      auto& lag = t.lags[static_cast<std::size_t>(k - 1)];
      const Date source = r.week - k * kWeek;
      if (!is_history(source)) {
        lag.reset();
      } else if (const auto j = raw.find(r.product, source);
                 j && raw[*j].target) {
        lag = raw[*j].target;
      }
    }
    kept.push_back(std::move(t));
  }
  out.dataset = PanelDataset(std::move(kept));
  split_train_test(out.dataset, cutoff);
  return out;
}

GroupIndex weekly_groups(const PanelDataset& dataset, std::size_t begin,
                         std::size_t end, const CategoryTotals* totals) {
  std::vector<Index> group_of_row;
  std::vector<double> group_totals;
  std::vector<std::string> names;
  std::map<std::pair<std::string, Date>, Index> slot;
  for (std::size_t i = begin; i < end; ++i) {
    const SalesRecord& r = dataset[i];
    const auto [it, fresh] = slot.emplace(std::pair{r.category, r.week},
                                          static_cast<Index>(names.size()));
    if (fresh) {
      names.push_back(r.category + " @ " + format_date(r.week));
      std::optional<double> s;
      if (totals) s = totals->get(r.category, r.week);
      group_totals.push_back(s ? *s : std::nan(""));
    }
    group_of_row.push_back(it->second);
  }
  return GroupIndex(std::move(group_of_row),
                    Eigen::Map<const Eigen::VectorXd>(
                        group_totals.data(),
                        static_cast<Index>(group_totals.size())),
                    std::move(names));
}

// ---------------------------------------------------------------------------
// Stages

StageOutputs run_stage1(PanelDataset& dataset, const PipelineConfig& config) {
  require_split(dataset);
  const Encoding& encoding = frozen_encoding(dataset);
  const std::size_t m = dataset.train_size();
  const std::size_t n = dataset.size();

  const FeatureMatrix x = encode_rows(dataset, encoding, iota_rows(0, m));
  StageOutputs out;
  out.stage = 1;
  out.model = fit(x, make_se_objective(targets(dataset, 0, m)), config.stage1);

  ForecastResult fc = recursive_forecast(out.model, dataset, config.clamp_negative);
  for (std::size_t i = m; i < n; ++i) {
    dataset.set_target(i, fc.predictions[static_cast<Index>(i - m)]);
  }
  out.ratios = prediction_ratios(fc.predictions, weekly_groups(dataset, m, n, nullptr));
  out.predictions = std::move(fc.predictions);
  out.warnings = std::move(fc.warnings);
  return out;
}

StageOutputs run_stage2(PanelDataset& dataset, const CategoryTotals& totals,
                        const PipelineConfig& config) {
  require_split(dataset);
  frozen_encoding(dataset);
  const std::size_t n = dataset.size();

  GroupIndex groups = weekly_groups(dataset, 0, n, &totals);
  const FeatureMatrix x = encode_features(dataset);
  StageOutputs out;
  out.stage = 2;
  out.model = fit(x,
                  make_sum_constraint_objective(targets(dataset, 0, n),
                                                std::move(groups)),
                  config.stage2);
  ForecastResult fc = recursive_forecast(out.model, dataset, config.clamp_negative);
  out.predictions = std::move(fc.predictions);
  out.warnings = std::move(fc.warnings);
  return out;
}

StageOutputs run_stage3(PanelDataset& dataset, const CategoryTotals& totals,
                        const RatioVector& stage1_ratios,
                        const PipelineConfig& config) {
  require_split(dataset);
  frozen_encoding(dataset);
  const std::size_t m = dataset.train_size();
  const std::size_t n = dataset.size();
  if (stage1_ratios.size() != static_cast<Index>(n - m)) {
    throw ContractError("expected one stage-1 ratio per test row");
  }

  GroupIndex groups = weekly_groups(dataset, 0, n, &totals);
  // Train rows: actual share of the week's actual sales.
  const GroupIndex train_groups = weekly_groups(dataset, 0, m, nullptr);
  RatioVector ratios(static_cast<Index>(n));
  ratios.head(static_cast<Index>(m)) =
      prediction_ratios(targets(dataset, 0, m), train_groups);
  ratios.tail(static_cast<Index>(n - m)) = stage1_ratios;

  const FeatureMatrix x = encode_features(dataset);
  StageOutputs out;
  out.stage = 3;
  out.model = fit(x,
                  make_finetune_objective(std::move(ratios), std::move(groups),
                                          config.finetune_mode),
                  config.stage3);
  ForecastResult fc = recursive_forecast(out.model, dataset, config.clamp_negative);
  out.predictions = std::move(fc.predictions);
  out.warnings = std::move(fc.warnings);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

double weighted_accuracy(const Eigen::VectorXd& actuals,
                         const Eigen::VectorXd& predictions) {
  if (actuals.size() != predictions.size()) {
    throw ShapeError("weighted_accuracy: length mismatch");
  }
  if (actuals.size() == 0) {
    throw UndefinedMetricError("weighted_accuracy of an empty series");
  }
  const double mass = actuals.sum();
  if (!(mass > 0.0)) {
    throw UndefinedMetricError("weighted_accuracy needs positive total actuals");
  }
  return 1.0 - (actuals - predictions).cwiseAbs().sum() / mass;
}

namespace {

double mean_sum_deviation(const Eigen::VectorXd& predictions,
                          const GroupIndex& test_groups) {
  const Eigen::VectorXd d = test_groups.group_sums(predictions) - test_groups.totals();
  return d.cwiseAbs().mean();
}

}  // namespace

ComparisonReport run_comparison(const PanelDataset& data,
                                const CategoryTotals& totals,
                                const PanelDataset* hidden_actuals,
                                const PipelineConfig& config) {
  config.validate();
  const auto categories = data.categories();
  if (categories.size() != 1) {
    throw ConfigError("a comparison runs on exactly one category, found " +
                      std::to_string(categories.size()));
  }
  if (!data.lag_violations().empty()) {
    const Violation& v = data.lag_violations().front();
    throw IntegrityError("line " + std::to_string(v.line) + ": " + v.message);
  }
  const auto cutoff = config.cutoff ? config.cutoff : detect_cutoff(data);
  if (!cutoff) {
    throw ConfigError("no cutoff configured and every row has a target");
  }

  PreparedPanel prep = prepare_panel(data, *cutoff, config.horizon);
  PanelDataset& ds = prep.dataset;
  const std::size_t m = ds.train_size();
  const std::size_t n = ds.size();

  Eigen::VectorXd actuals(static_cast<Index>(n - m));
  for (std::size_t i = m; i < n; ++i) {
    const SalesRecord& r = ds[i];
    std::optional<double> a;
    if (const auto j = data.find(r.product, r.week)) a = data[*j].target;
    if (!a && hidden_actuals) {
      if (const auto j = hidden_actuals->find(r.product, r.week)) {
        a = (*hidden_actuals)[*j].target;
      }
    }
    if (!a) throw IntegrityError("no actual sales for " + row_label(r));
    actuals[static_cast<Index>(i - m)] = *a;
  }

  const CategoryTotals known = category_weekly_actuals(ds, totals);
  const GroupIndex test_groups = weekly_groups(ds, m, n, &known);
  test_groups.require_totals();

  const StageOutputs s1 = run_stage1(ds, config);
  const StageOutputs s2 = run_stage2(ds, known, config);
  const StageOutputs s3 = run_stage3(ds, known, *s1.ratios, config);

  ComparisonReport report;
  report.category = categories.front();
  report.cutoff = *ds.cutoff();
  report.lags = static_cast<int>(test_groups.groups());
  report.baseline_accuracy = weighted_accuracy(actuals, s1.predictions);
  report.three_stage_accuracy = weighted_accuracy(actuals, s3.predictions);
  report.baseline_sum_deviation = mean_sum_deviation(s1.predictions, test_groups);
  report.three_stage_sum_deviation =
      mean_sum_deviation(s3.predictions, test_groups);

  std::map<std::string, std::size_t> slot;
  for (std::size_t i = m; i < n; ++i) {
    const auto k = static_cast<Index>(i - m);
    const auto [it, fresh] = slot.emplace(ds[i].product, report.products.size());
    if (fresh) report.products.push_back({ds[i].product, {}});
    report.products[it->second].points.push_back(
        {ds[i].week, actuals[k], s1.predictions[k], s2.predictions[k],
         s3.predictions[k]});
  }
  std::sort(report.products.begin(), report.products.end(),
            [](const ProductSeries& a, const ProductSeries& b) {
              return a.product < b.product;
            });

  report.warnings = std::move(prep.warnings);
  for (const StageOutputs* s : {&s1, &s2, &s3}) {
    report.warnings.insert(report.warnings.end(), s->warnings.begin(),
                           s->warnings.end());
  }
  return report;
}

}  // namespace cannibal
