#ifndef CANNIBAL_SYNTHGEN_HPP
#define CANNIBAL_SYNTHGEN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cannibal/dataset.hpp"

namespace cannibal {

struct PromoEntry {
  int product = 0;  // index among existing products
  int week = 0;     // emitted week index
  std::string token;
};

/// Weekly category demand split across products by attractiveness weights.
/// From npi_launch_week on, launched products take a share that grows by
/// share_stealing_rate per week; existing products shrink proportionally.
struct ScenarioConfig {
  std::string category = "Category_A";
  Date start_date = Date{std::chrono::year{2015} / 1 / 5};
  int n_existing_products = 8;
  int n_npi_products = 3;
  int total_weeks = 300;  // emitted weeks, train + test
  int cutoff_week = 286;  // first test week index
  int npi_launch_week = 286;
  double category_total_base = 20000.0;
  // ISO week-of-year -> demand multiplier.
  std::map<int, double> seasonal_spikes = {{47, 1.3}, {48, 1.5}, {51, 1.4},
                                           {52, 1.7}};
  double promo_rate = 0.08;   // chance of a random promotion per product-week
  double promo_lift = 0.35;   // Promo_k multiplies attractiveness by 1 + lift*k/2
  std::vector<PromoEntry> promo_calendar;  // fixed promotions, override draws
  double share_stealing_rate = 0.04;
  double noise_sd = 0.03;               // relative noise on totals and weights
  double drift_sd = 0.02;               // weekly log random walk of weights
  double attractiveness_spread = 0.5;   // base weights in [1-s, 1+s]
  std::uint64_t seed = 1;

  /// Throws InvalidScenarioError.
  void validate() const;
};

struct SyntheticPanel {
  // Existing products only. Train rows are complete; test rows carry
  // promotions, seasonality and lags that refer to history.
  PanelDataset dataset;
  // Known totals of the existing products for every emitted week.
  CategoryTotals totals;
  // Test rows with their true targets and full lags.
  PanelDataset actuals;

  // Diagnostics over every emitted week; columns are existing products
  // followed by launched products.
  std::vector<std::string> products;
  std::vector<Date> weeks;
  Eigen::VectorXd category_total;  // rounded, all products
  Eigen::MatrixXd shares;
  Eigen::MatrixXd raw_sales;       // share x unrounded total
  Eigen::MatrixXd sales;           // integer units, rows sum to category_total
};

SyntheticPanel generate(const ScenarioConfig& scenario);

/// Integer apportionment of `total` proportional to `weights` (largest
/// remainder, ties to the lowest index). Sums to `total` exactly.
Eigen::VectorXd apportion(double total, const Eigen::VectorXd& weights);

}  // namespace cannibal

#endif  // CANNIBAL_SYNTHGEN_HPP
