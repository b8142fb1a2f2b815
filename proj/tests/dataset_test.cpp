#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cannibal/dataset.hpp"
#include "cannibal/errors.hpp"

namespace cannibal {
namespace {

// Two products over five consecutive weeks from 2020-01-06.
constexpr const char* kTwoProductPanel =
    "category,date,product,promotion,seasonality,sale_t3,sale_t2,sale_t1,sale_t\n"
    "Category_A,2020-01-06,A_1,Promo_1,Season_1,1000,1110,1150,1200\n"
    "Category_A,2020-01-13,A_1,Promo_1,No_Seasonality,1110,1150,1200,1500\n"
    "Category_A,2020-01-20,A_1,Promo_2,No_Seasonality,1150,1200,1500,1300\n"
    "Category_A,2020-01-27,A_1,Promo_4,Season_2,1200,1500,1300,2000\n"
    "Category_A,2020-02-03,A_1,No_Promo,Season_3,1500,1300,2000,1650\n"
    "Category_A,2020-01-06,A_2,Promo_4,Season_1,2000,4200,4000,5000\n"
    "Category_A,2020-01-13,A_2,Promo_1,No_Seasonality,4200,4000,5000,3600\n"
    "Category_A,2020-01-20,A_2,Promo_6,No_Seasonality,4000,5000,3600,3900\n"
    "Category_A,2020-01-27,A_2,No_Promo,Season_2,5000,3600,3900,4200\n"
    "Category_A,2020-02-03,A_2,No_Promo,Season_3,3600,3900,4200,5500\n";

Date day(const char* iso) { return *parse_date(iso); }

PanelDataset read(const std::string& csv) {
  std::istringstream in(csv);
  return read_sales_csv(in);
}

PanelDataset two_products() { return read(kTwoProductPanel); }

SalesRecord row(const std::string& product, const char* week,
                std::optional<double> target,
                std::array<std::optional<double>, kLagDepth> lags = {}) {
  SalesRecord r;
  r.category = "C";
  r.week = day(week);
  r.product = product;
  r.promotion = "No_Promo";
  r.seasonality = "No_Seasonality";
  r.lags = lags;
  r.target = target;
  return r;
}

// One product, ten consecutive weeks from 2021-03-01, sales 10, 20, ...
PanelDataset ten_weeks() {
  std::vector<SalesRecord> rows;
  for (int w = 0; w < 10; ++w) {
    SalesRecord r = row("P", "2021-03-01", 10.0 * (w + 1));
    r.week += std::chrono::days{7 * w};
    for (int k = 1; k <= kLagDepth; ++k) {
      r.lags[static_cast<std::size_t>(k - 1)] = w - k >= 0 ? 10.0 * (w - k + 1) : 0.0;
    }
    rows.push_back(r);
  }
  // Leading lags are zeros and the first rows are consistent with that.
  return PanelDataset(std::move(rows));
}

TEST(LoadCsv, TwoProductPanelParses) {
  const PanelDataset ds = two_products();
  ASSERT_EQ(ds.size(), 10u);
  const SalesRecord& first = ds[*ds.find("A_1", day("2020-01-06"))];
  EXPECT_EQ(first.category, "Category_A");
  EXPECT_EQ(first.promotion, "Promo_1");
  EXPECT_EQ(first.seasonality, "Season_1");
  EXPECT_EQ(first.lags[2], 1000.0);
  EXPECT_EQ(first.lags[1], 1110.0);
  EXPECT_EQ(first.lags[0], 1150.0);
  EXPECT_EQ(first.target, 1200.0);

  const SalesRecord& fifth = ds[*ds.find("A_1", day("2020-02-03"))];
  EXPECT_EQ(fifth.lags[2], 1500.0);
  EXPECT_EQ(fifth.lags[1], 1300.0);
  EXPECT_EQ(fifth.lags[0], 2000.0);
  EXPECT_EQ(fifth.target, 1650.0);
  EXPECT_EQ(fifth.line, 6u);
  EXPECT_TRUE(ds.lag_violations().empty());
}

TEST(LoadCsv, HeaderOnlyIsEmpty) {
  EXPECT_TRUE(read(std::string(kSalesHeader) + "\n").empty());
}

TEST(LoadCsv, ReadsFromDisk) {
  const auto path = std::filesystem::temp_directory_path() / "cannibal_two_products.csv";
  std::ofstream(path) << kTwoProductPanel;
  EXPECT_EQ(load_csv(path).size(), 10u);
  std::filesystem::remove(path);
}

TEST(LoadCsv, RejectsBadRowsWithLineNumbers) {
  const std::string header = std::string(kSalesHeader) + "\n";
  try {
    read(header + "C,2020-01-06,P,No_Promo,S,1,2,3,4\nC,2020-13-01,P,x,y,1,2,3,4\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read(header + "C,2020-01-06,P,No_Promo,S,1,2,3\n"), ParseError);
  EXPECT_THROW(read(header + "C,2020-01-06,P,No_Promo,S,1,2,3,-4\n"), ParseError);
  EXPECT_THROW(read("wrong,header\n"), ParseError);
}

TEST(LoadCsv, DuplicateRowIsIntegrityError) {
  const std::string header = std::string(kSalesHeader) + "\n";
  EXPECT_THROW(read(header + "C,2020-01-06,P,a,b,1,2,3,4\nC,2020-01-06,P,a,b,1,2,3,4\n"),
               IntegrityError);
}

TEST(LoadCsv, MisalignedWeekdayIsIntegrityError) {
  const std::string header = std::string(kSalesHeader) + "\n";
  EXPECT_THROW(read(header + "C,2020-01-06,P,a,b,1,2,3,4\nC,2020-01-14,Q,a,b,1,2,3,4\n"),
               IntegrityError);
}

TEST(LoadCsv, LagInconsistencyIsReported) {
  std::string csv = kTwoProductPanel;
  const std::string bad = "1110,1150,1200,1500";
  csv.replace(csv.find(bad), bad.size(), "1110,1150,1201,1500");
  const PanelDataset ds = read(csv);
  ASSERT_EQ(ds.lag_violations().size(), 1u);
  EXPECT_EQ(ds.lag_violations()[0].line, 3u);
}

TEST(LoadCsv, WriteReadRoundTrip) {
  const PanelDataset ds = two_products();
  std::ostringstream out;
  write_sales_csv(ds.records(), out);
  const PanelDataset again = read(out.str());
  ASSERT_EQ(again.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(again[i].product, ds[i].product);
    EXPECT_EQ(again[i].week, ds[i].week);
    EXPECT_EQ(again[i].lags, ds[i].lags);
    EXPECT_EQ(again[i].target, ds[i].target);
  }
}

TEST(Encoding, FirstSeenOrdinalCodes) {
  const PanelDataset ds = two_products();
  const Encoding enc = build_encoding(ds);
  // Dataset order is (week, category, product): A_1 Promo_1 comes first.
  EXPECT_EQ(enc.promotion.code_of("Promo_1"), 0);
  EXPECT_EQ(enc.promotion.code_of("Promo_4"), 1);
  EXPECT_THROW(enc.promotion.code_of("Promo_9"), UnknownCategoryError);
}

TEST(Encoding, CalendarColumns) {
  std::vector<SalesRecord> rows{row("P", "2020-12-21", 1.0), row("Q", "2020-11-23", 1.0)};
  const PanelDataset ds(std::move(rows));
  const FeatureMatrix x = encode_features(ds);
  const Index late = static_cast<Index>(*ds.find("P", day("2020-12-21")));
  EXPECT_EQ(x.value(late, kWeekOfYear), 52.0);

  std::vector<SalesRecord> series;
  for (int w = 0; w < 5; ++w) {
    SalesRecord r = row("P", "2021-01-04", 1.0);
    r.week += std::chrono::days{7 * w};
    series.push_back(r);
  }
  const PanelDataset five(std::move(series));
  const FeatureMatrix y = encode_features(five);
  EXPECT_EQ(y.value(4, kWeeksSinceLaunch), 4.0);
}

TEST(Encoding, MissingLagsAreFlagged) {
  std::vector<SalesRecord> rows{row("P", "2021-01-04", std::nullopt, {5.0, {}, 7.0})};
  const FeatureMatrix x = encode_features(PanelDataset(std::move(rows)));
  EXPECT_FALSE(x.is_missing(0, kLag1));
  EXPECT_TRUE(x.is_missing(0, kLag2));
  EXPECT_EQ(x.value(0, kLag3), 7.0);
}

TEST(Encoding, DecodeRoundTrip) {
  const PanelDataset ds = two_products();
  const FeatureMatrix x = encode_features(ds);
  const Encoding enc = build_encoding(ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const DecodedTokens t = decode_tokens(x, static_cast<Index>(i), enc);
    EXPECT_EQ(t.product, ds[i].product);
    EXPECT_EQ(t.promotion, ds[i].promotion);
    EXPECT_EQ(t.seasonality, ds[i].seasonality);
  }
}

TEST(Split, CutoffAfterEighthWeek) {
  PanelDataset ds = ten_weeks();
  const SplitInfo s = split_train_test(ds, day("2021-04-26"));
  EXPECT_EQ(s.train_rows, 8u);
  EXPECT_EQ(s.test_rows, 2u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.is_train(i), i < 8);
  }
}

TEST(Split, CutoffBeforeAllRowsThrows) {
  PanelDataset ds = ten_weeks();
  EXPECT_THROW(split_train_test(ds, day("2021-01-01")), ConfigError);
}

TEST(Split, MidWeekCutoffSendsThatWeekToTest) {
  PanelDataset ds = ten_weeks();
  // 2021-04-28 is inside the week starting 2021-04-26.
  const SplitInfo s = split_train_test(ds, day("2021-04-28"));
  EXPECT_EQ(s.train_rows, 8u);
  EXPECT_EQ(*ds.cutoff(), day("2021-04-26"));
}

TEST(Split, TrainRowsAreReadOnly) {
  PanelDataset ds = ten_weeks();
  split_train_test(ds, day("2021-04-26"));
  EXPECT_THROW(ds.set_target(0, 1.0), IntegrityError);
  EXPECT_NO_THROW(ds.set_target(9, 1.0));
}

TEST(BackPad, WritesLaterLags) {
  PanelDataset ds = ten_weeks();
  split_train_test(ds, day("2021-04-19"));  // weeks 7..9 are test
  back_pad(ds, "P", day("2021-04-19"), 1650.0);
  EXPECT_EQ(ds[*ds.find("P", day("2021-04-26"))].lags[0], 1650.0);
  EXPECT_EQ(ds[*ds.find("P", day("2021-05-03"))].lags[1], 1650.0);
}

TEST(BackPad, LastWeekIsNoOp) {
  PanelDataset ds = ten_weeks();
  split_train_test(ds, day("2021-04-19"));
  std::ostringstream before, after;
  write_sales_csv(ds.records(), before);
  back_pad(ds, "P", day("2021-05-03"), 5.0);
  write_sales_csv(ds.records(), after);
  EXPECT_EQ(before.str(), after.str());
}

TEST(BackPad, SkipsMissingWeeks) {
  std::vector<SalesRecord> rows;
  for (const char* w : {"2021-01-04", "2021-01-11", "2021-01-18", "2021-02-01"}) {
    rows.push_back(row("P", w, 1.0, {1.0, 1.0, 1.0}));
  }
  PanelDataset ds(std::move(rows));
  split_train_test(ds, day("2021-01-11"));
  back_pad(ds, "P", day("2021-01-11"), 9.0);
  EXPECT_EQ(ds[*ds.find("P", day("2021-01-18"))].lags[0], 9.0);
  EXPECT_EQ(ds[*ds.find("P", day("2021-02-01"))].lags[2], 9.0);
  EXPECT_FALSE(ds.find("P", day("2021-01-25")));
}

TEST(BackPad, IsIdempotent) {
  PanelDataset once = ten_weeks();
  PanelDataset twice = ten_weeks();
  split_train_test(once, day("2021-04-05"));
  split_train_test(twice, day("2021-04-05"));
  back_pad(once, "P", day("2021-04-05"), 123.0);
  back_pad(twice, "P", day("2021-04-05"), 123.0);
  back_pad(twice, "P", day("2021-04-05"), 123.0);
  std::ostringstream a, b;
  write_sales_csv(once.records(), a);
  write_sales_csv(twice.records(), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(BackPad, RefusesTrainRows) {
  PanelDataset ds = ten_weeks();
  split_train_test(ds, day("2021-04-26"));
  EXPECT_THROW(back_pad(ds, "P", day("2021-04-12"), 1.0), IntegrityError);
}

TEST(Totals, HistoricalWeeksSumTargets) {
  const CategoryTotals s = category_weekly_actuals(two_products());
  EXPECT_EQ(s.get("Category_A", day("2020-01-06")), 6200.0);
}

TEST(Totals, SingleProductWeek) {
  std::vector<SalesRecord> rows{row("P", "2021-01-04", 1650.0)};
  EXPECT_EQ(category_weekly_actuals(PanelDataset(std::move(rows))).get("C", day("2021-01-04")),
            1650.0);
}

TEST(Totals, ExternalTotalsWin) {
  std::vector<SalesRecord> rows{row("P", "2021-01-04", 10.0), row("P", "2021-01-11", 999.0)};
  CategoryTotals external;
  external.set("C", day("2021-01-11"), 6000.0);
  const CategoryTotals s = category_weekly_actuals(PanelDataset(std::move(rows)), external);
  EXPECT_EQ(s.get("C", day("2021-01-11")), 6000.0);
  EXPECT_EQ(s.get("C", day("2021-01-04")), 10.0);
}

TEST(Totals, CsvRoundTrip) {
  CategoryTotals t;
  t.set("Category_A", day("2020-01-06"), 6200.0);
  t.set("Category_A", day("2020-01-13"), 5100.5);
  std::ostringstream out;
  write_totals_csv(t, out);
  std::istringstream in(out.str());
  const CategoryTotals back = read_totals_csv(in);
  EXPECT_EQ(back.entries(), t.entries());
}

TEST(Validate, FlagsMissingFutureTotal) {
  std::vector<SalesRecord> rows{row("P", "2021-01-04", 10.0, {1, 1, 1}),
                                row("P", "2021-01-11", std::nullopt, {10, 1, 1})};
  rows[0].line = 2;
  rows[1].line = 3;
  const PanelDataset ds(std::move(rows));
  CategoryTotals totals;
  totals.set("C", day("2021-01-04"), 10.0);
  const auto v = validate_panel(ds, totals);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].line, 3u);
  totals.set("C", day("2021-01-11"), 12.0);
  EXPECT_TRUE(validate_panel(ds, totals).empty());
}

TEST(Validate, FlagsDisagreeingHistoricalTotal) {
  CategoryTotals totals;
  for (const char* w : {"2020-01-06", "2020-01-13", "2020-01-20", "2020-01-27", "2020-02-03"}) {
    totals.set("Category_A", day(w), 0.0);
  }
  totals.set("Category_A", day("2020-01-06"), 6200.0);
  const auto v = validate_panel(two_products(), totals);
  EXPECT_EQ(v.size(), 4u);
}

TEST(DetectCutoff, FirstWeekWithoutTarget) {
  std::vector<SalesRecord> rows{row("P", "2021-01-04", 1.0), row("P", "2021-01-11", std::nullopt),
                                row("Q", "2021-01-04", 2.0)};
  EXPECT_EQ(detect_cutoff(PanelDataset(std::move(rows))), day("2021-01-11"));
}

}  // namespace
}  // namespace cannibal
