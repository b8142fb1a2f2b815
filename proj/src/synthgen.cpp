#include "cannibal/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cannibal/errors.hpp"

namespace cannibal {

namespace {

constexpr int kWarmupWeeks = kLagDepth;

std::string product_prefix(const std::string& category) {
  const auto pos = category.find_last_of('_');
  std::string tail = pos == std::string::npos ? category : category.substr(pos + 1);
  return tail.empty() ? "P" : tail;
}

// Fraction of demand left to existing products at emitted week e.
double retained_share(const ScenarioConfig& s, int e) {
  if (s.n_npi_products == 0 || e < s.npi_launch_week) return 1.0;
  return 1.0 - s.share_stealing_rate * (e - s.npi_launch_week + 1);
}

}  // namespace

void ScenarioConfig::validate() const {
  const auto fail = [](const std::string& msg) {
    throw InvalidScenarioError(msg);
  };
  if (category.empty()) fail("category must be non-empty");
  if (n_existing_products < 1) fail("n_existing_products must be >= 1");
  if (n_npi_products < 0) fail("n_npi_products must be >= 0");
  if (total_weeks < 2) fail("total_weeks must be >= 2");
  if (cutoff_week < 1 || cutoff_week >= total_weeks) {
    fail("cutoff_week must lie in [1, total_weeks)");
  }
  if (!(category_total_base > 0.0)) fail("category_total_base must be > 0");
  if (!(noise_sd >= 0.0) || !(drift_sd >= 0.0)) {
    fail("noise_sd and drift_sd must be >= 0");
  }
  if (!(attractiveness_spread >= 0.0 && attractiveness_spread < 1.0)) {
    fail("attractiveness_spread must be in [0, 1)");
  }
  if (!(promo_rate >= 0.0 && promo_rate <= 1.0)) fail("promo_rate must be in [0, 1]");
  if (!(promo_lift >= 0.0)) fail("promo_lift must be >= 0");
  if (!(share_stealing_rate >= 0.0 && share_stealing_rate <= 1.0)) {
    fail("share_stealing_rate must be in [0, 1]");
  }
  for (const auto& [week, mult] : seasonal_spikes) {
    if (week < 1 || week > 53 || !(mult > 0.0)) {
      fail("seasonal spikes need week-of-year in 1..53 and a positive multiplier");
    }
  }
  for (const PromoEntry& p : promo_calendar) {
    if (p.product < 0 || p.product >= n_existing_products || p.week < 0 ||
        p.week >= total_weeks || p.token.empty()) {
      fail("promo calendar entry out of range");
    }
  }
  if (n_npi_products == 0) {
    if (share_stealing_rate > 0.0) {
      fail("share_stealing_rate > 0 needs at least one launched product");
    }
    return;
  }
  if (npi_launch_week < cutoff_week - 4 || npi_launch_week >= total_weeks) {
    fail("npi_launch_week must lie in [cutoff_week - 4, total_weeks)");
  }
  if (retained_share(*this, total_weeks - 1) < 0.0) {
    fail("share_stealing_rate drives existing shares negative before week " +
         std::to_string(total_weeks));
  }
}

Eigen::VectorXd apportion(double total, const Eigen::VectorXd& weights) {
  const Index n = weights.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  const double wsum = weights.sum();
  if (n == 0 || !(wsum > 0.0)) return out;
  const double quota_total = std::max(0.0, std::round(total));
  std::vector<double> remainder(static_cast<std::size_t>(n));
  double assigned = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double quota = quota_total * weights[i] / wsum;
    out[i] = std::floor(quota);
    remainder[static_cast<std::size_t>(i)] = quota - out[i];
    assigned += out[i];
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return remainder[static_cast<std::size_t>(a)] >
           remainder[static_cast<std::size_t>(b)];
  });
  auto left = static_cast<long long>(quota_total - assigned);
  for (std::size_t k = 0; left > 0; k = (k + 1) % order.size(), --left) {
    out[order[k]] += 1.0;
  }
  return out;
}

SyntheticPanel generate(const ScenarioConfig& s) {
  s.validate();
  const int existing = s.n_existing_products;
  const int launched = s.n_npi_products;
  const int width = existing + launched;
  const int span = s.total_weeks + kWarmupWeeks;

  SyntheticPanel out;
  const std::string prefix = product_prefix(s.category);
  for (int j = 0; j < width; ++j) out.products.push_back(prefix + std::to_string(j + 1));

  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::VectorXd base(existing);
  for (int j = 0; j < existing; ++j) {
    base[j] = 1.0 + s.attractiveness_spread * (2.0 * uniform(rng) - 1.0);
  }
  Eigen::VectorXd drift = Eigen::VectorXd::Zero(existing);

  std::map<std::pair<int, int>, std::string> fixed_promos;
  for (const PromoEntry& p : s.promo_calendar) {
    fixed_promos[{p.product, p.week + kWarmupWeeks}] = p.token;
  }

  Eigen::MatrixXd shares(span, width);
  Eigen::MatrixXd raw(span, width);
  Eigen::MatrixXd units(span, width);
  Eigen::VectorXd totals(span);
  std::vector<std::vector<std::string>> promo(
      static_cast<std::size_t>(span), std::vector<std::string>(static_cast<std::size_t>(existing)));
  std::vector<Date> dates(static_cast<std::size_t>(span));

  for (int t = 0; t < span; ++t) {
    const int e = t - kWarmupWeeks;
    const Date week = s.start_date + std::chrono::days{7 * e};
    dates[static_cast<std::size_t>(t)] = week;

    // Every draw happens regardless of configuration so that scenarios that
    // differ only in stealing rate share one demand path.
    const double total_noise = normal(rng);
    Eigen::VectorXd weight(existing);
    for (int j = 0; j < existing; ++j) {
      drift[j] += s.drift_sd * normal(rng);
      const double eps = normal(rng);
      const double promo_draw = uniform(rng);
      const int promo_kind = 1 + std::min(2, static_cast<int>(3.0 * uniform(rng)));

      std::string token = "No_Promo";
      double lift = 1.0;
      if (promo_draw < s.promo_rate) {
        token = "Promo_" + std::to_string(promo_kind);
        lift = 1.0 + s.promo_lift * promo_kind / 2.0;
      }
      if (const auto it = fixed_promos.find({j, t}); it != fixed_promos.end()) {
        token = it->second;
        const auto k = token.rfind('_');
        const auto kind = k == std::string::npos ? std::nullopt
                                                 : text::parse_int(token.substr(k + 1));
        lift = token == "No_Promo" ? 1.0
                                   : 1.0 + s.promo_lift * (kind ? *kind : 1) / 2.0;
      }
      promo[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = token;
      weight[j] = base[j] * std::exp(drift[j]) * lift * std::exp(s.noise_sd * eps);
    }

    const auto spike = s.seasonal_spikes.find(iso_week_of_year(week));
    const double season = spike == s.seasonal_spikes.end() ? 1.0 : spike->second;
    const double total = s.category_total_base * season *
                         std::max(0.05, 1.0 + s.noise_sd * total_noise);

    const double keep = retained_share(s, e);
    if (keep < 0.0) throw InvalidScenarioError("existing shares went negative");
    shares.row(t).head(existing) = keep * weight / weight.sum();
    if (launched > 0) {
      shares.row(t).tail(launched).setConstant((1.0 - keep) / launched);
    }
    raw.row(t) = shares.row(t) * total;
    totals[t] = std::round(total);
    units.row(t) = apportion(totals[t], shares.row(t).transpose()).transpose();
  }

  std::vector<SalesRecord> train_and_test;
  std::vector<SalesRecord> hidden;
  for (int t = kWarmupWeeks; t < span; ++t) {
    const int e = t - kWarmupWeeks;
    const Date week = dates[static_cast<std::size_t>(t)];
    const int woy = iso_week_of_year(week);
    const std::string season = s.seasonal_spikes.contains(woy)
                                   ? "Season_" + std::to_string(woy)
                                   : "No_Seasonality";
    double known_total = 0.0;
    for (int j = 0; j < existing; ++j) {
      SalesRecord r;
      r.category = s.category;
      r.week = week;
      r.product = out.products[static_cast<std::size_t>(j)];
      r.promotion = promo[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
      r.seasonality = season;
      for (int k = 1; k <= kLagDepth; ++k) {
        r.lags[static_cast<std::size_t>(k - 1)] = units(t - k, j);
      }
      r.target = units(t, j);
      known_total += units(t, j);
      if (e < s.cutoff_week) {
        train_and_test.push_back(r);
        continue;
      }
      hidden.push_back(r);
      SalesRecord visible = r;
      visible.target.reset();
      for (int k = 1; k <= kLagDepth; ++k) {
        if (e - k >= s.cutoff_week) visible.lags[static_cast<std::size_t>(k - 1)].reset();
      }
      train_and_test.push_back(std::move(visible));
    }
    out.totals.set(s.category, week, known_total);
  }

  out.dataset = PanelDataset(std::move(train_and_test));
  out.actuals = PanelDataset(std::move(hidden));
  out.weeks.assign(dates.begin() + kWarmupWeeks, dates.end());
  out.category_total = totals.tail(s.total_weeks);
  out.shares = shares.bottomRows(s.total_weeks);
  out.raw_sales = raw.bottomRows(s.total_weeks);
  out.sales = units.bottomRows(s.total_weeks);
  return out;
}

}  // namespace cannibal
