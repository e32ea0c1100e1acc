#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.h"
#include "soelabel/error.h"
#include "soelabel/evaluation.h"

using namespace soelabel;

namespace {

std::vector<EvalItem> random_items(std::mt19937_64& rng, std::size_t n, int protocols) {
  std::vector<EvalItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    EvalItem it;
    it.truth = rng() % 3 == 0;
    it.prediction = rng() % 4 == 0 ? !it.truth : it.truth;
    it.protocol_id = "P" + std::to_string(rng() % protocols);
    out.push_back(it);
  }
  return out;
}

std::vector<oracle::Pair> to_pairs(const std::vector<EvalItem>& items) {
  std::vector<oracle::Pair> out;
  for (const auto& it : items) out.push_back({it.prediction, it.truth, it.protocol_id});
  return out;
}

std::vector<EvalItem> from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                  std::uint64_t tn, const std::string& protocol = "P") {
  std::vector<EvalItem> out;
  auto add = [&](std::uint64_t k, bool p, bool t) {
    for (std::uint64_t i = 0; i < k; ++i) out.push_back({p, t, protocol});
  };
  add(tp, true, true);
  add(fp, true, false);
  add(fn, false, true);
  add(tn, false, false);
  return out;
}

}  // namespace

TEST(Metrics, WorkedExample) {
  auto r = compute_metrics({1497, 251, 39, 1013});
  EXPECT_NEAR(r.accuracy, 0.8964, 5e-5);
  EXPECT_NEAR(r.precision, 0.8564, 5e-5);
  EXPECT_NEAR(r.recall, 0.9746, 5e-5);
  EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-15);
}

TEST(Metrics, VacuousConventions) {
  auto all_neg = compute_metrics({0, 0, 0, 10});
  EXPECT_EQ(all_neg.precision, 1.0);
  EXPECT_EQ(all_neg.recall, 1.0);
  EXPECT_EQ(all_neg.f1, 1.0);
  auto missed = compute_metrics({0, 0, 5, 5});
  EXPECT_EQ(missed.precision, 1.0);
  EXPECT_EQ(missed.recall, 0.0);
  auto wrong = compute_metrics({0, 3, 2, 0});
  EXPECT_EQ(wrong.f1, 0.0);
  EXPECT_EQ(wrong.accuracy, 0.0);
  EXPECT_THROW(compute_metrics({}), Error);
}

TEST(Metrics, ConfusionKeyMismatch) {
  try {
    confusion({{"a", true}}, {{"b", true}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kKeyMismatch);
  }
  EXPECT_THROW(confusion({{"a", true}}, {}), Error);
  EXPECT_EQ(confusion({{"a", true}, {"b", false}}, {{"a", true}, {"b", true}}),
            (ConfusionCounts{1, 0, 1, 0}));
}

TEST(Metrics, MatchesBruteForceOracle) {
  std::mt19937_64 rng(99);
  for (int f = 0; f < 25; ++f) {
    auto items = random_items(rng, 1 + rng() % 300, 1 + f % 7);
    auto pairs = to_pairs(items);
    auto micro = evaluate(items, MetricMode::kMicro);
    auto om = oracle::brute_metrics(pairs);
    EXPECT_NEAR(micro.recall, om.recall, 1e-12);
    EXPECT_NEAR(micro.precision, om.precision, 1e-12);
    EXPECT_NEAR(micro.f1, om.f1, 1e-12);
    EXPECT_NEAR(micro.accuracy, om.accuracy, 1e-12);
    auto macro = evaluate(items, MetricMode::kMacroPerProtocol);
    auto oM = oracle::brute_macro(pairs);
    EXPECT_NEAR(macro.recall, oM.recall, 1e-12);
    EXPECT_NEAR(macro.precision, oM.precision, 1e-12);
    EXPECT_NEAR(macro.f1, oM.f1, 1e-12);
    EXPECT_NEAR(macro.accuracy, oM.accuracy, 1e-12);
  }
}

TEST(Metrics, MacroMeanOfF1) {
  // F1 1.0 and 0.5.
  auto m = macro_metrics({{2, 0, 0, 0}, {1, 1, 1, 0}});
  EXPECT_NEAR(m.f1, 0.75, 1e-12);
  EXPECT_EQ(m.mode, MetricMode::kMacroPerProtocol);
}

TEST(Metrics, MacroF1IsNotHarmonicMeanOfMacroPR) {
  std::vector<ConfusionCounts> per{{9, 1, 0, 5}, {1, 0, 9, 3}, {4, 4, 4, 4}, {0, 2, 1, 7}, {6, 0, 2, 1}};
  auto m = macro_metrics(per);
  double mean_f1 = 0;
  for (const auto& c : per) mean_f1 += compute_metrics(c).f1;
  EXPECT_NEAR(m.f1, mean_f1 / 5, 1e-12);
  const double harmonic = 2 * m.precision * m.recall / (m.precision + m.recall);
  EXPECT_GT(std::abs(m.f1 - harmonic), 1e-3);
}

TEST(Quantile, Type7) {
  std::vector<double> xs{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(xs, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted({7}, 0.3), 7.0);
}

TEST(Bootstrap, BitExactAgainstOracle) {
  std::mt19937_64 rng(3);
  auto items = random_items(rng, 20, 1);
  BootstrapOptions opt;
  opt.replications = 2000;
  opt.seed = 42;
  opt.threads = 1;
  auto ci = bootstrap_ci(items, Metric::kF1, opt);
  auto o = oracle::bootstrap(to_pairs(items), &oracle::Scores::f1, 2000, 42, 0.95);
  EXPECT_EQ(ci.low, o.first);
  EXPECT_EQ(ci.high, o.second);
  auto ra = bootstrap_ci(items, Metric::kRecall, opt);
  auto oa = oracle::bootstrap(to_pairs(items), &oracle::Scores::recall, 2000, 42, 0.95);
  EXPECT_EQ(ra.low, oa.first);
  EXPECT_EQ(ra.high, oa.second);
}

TEST(Bootstrap, DegeneratePerfectPredictions) {
  auto items = from_counts(5, 0, 0, 5);
  BootstrapOptions opt;
  opt.replications = 500;
  auto ci = bootstrap_ci(items, Metric::kF1, opt);
  EXPECT_EQ(ci.low, 1.0);
  EXPECT_EQ(ci.high, 1.0);
}

TEST(Bootstrap, ReplicationCountAndContainment) {
  std::mt19937_64 rng(8);
  auto items = random_items(rng, 200, 10);
  for (auto mode : {MetricMode::kMicro, MetricMode::kMacroPerProtocol}) {
    BootstrapOptions opt;
    opt.mode = mode;
    opt.replications = 777;
    EXPECT_EQ(bootstrap_distribution(items, Metric::kAccuracy, opt).size(), 777u);
    auto report = evaluate_with_ci(items, opt);
    for (auto m : {Metric::kRecall, Metric::kPrecision, Metric::kF1, Metric::kAccuracy}) {
      ASSERT_TRUE(report.ci(m));
      EXPECT_LE(report.ci(m)->low, report.ci(m)->high);
      EXPECT_GE(report.ci(m)->low, 0.0);
      EXPECT_LE(report.ci(m)->high, 1.0);
    }
  }
}

TEST(Bootstrap, SerialEqualsParallel) {
  std::mt19937_64 rng(12);
  auto items = random_items(rng, 150, 6);
  for (auto mode : {MetricMode::kMicro, MetricMode::kMacroPerProtocol}) {
    BootstrapOptions opt;
    opt.mode = mode;
    opt.replications = 1000;
    opt.seed = 5;
    opt.threads = 1;
    auto serial = bootstrap_distribution(items, Metric::kF1, opt);
    opt.threads = 7;
    EXPECT_EQ(bootstrap_distribution(items, Metric::kF1, opt), serial);
  }
}

TEST(Bootstrap, WidthShrinksWithSampleSize) {
  auto small = from_counts(80, 20, 20, 80);
  auto large = from_counts(320, 80, 80, 320);
  BootstrapOptions opt;
  opt.replications = 4000;
  auto a = bootstrap_ci(small, Metric::kAccuracy, opt);
  auto b = bootstrap_ci(large, Metric::kAccuracy, opt);
  const double ratio = (a.high - a.low) / (b.high - b.low);
  EXPECT_NEAR(ratio, 2.0, 0.3);
}

TEST(Bootstrap, Errors) {
  BootstrapOptions opt;
  EXPECT_THROW(bootstrap_ci({}, Metric::kF1, opt), Error);
  opt.level = 1.0;
  EXPECT_THROW(bootstrap_ci(from_counts(1, 0, 0, 1), Metric::kF1, opt), Error);
  opt.level = 0.95;
  opt.replications = 0;
  EXPECT_THROW(bootstrap_ci(from_counts(1, 0, 0, 1), Metric::kF1, opt), Error);
}

TEST(Thresholds, ThirteenOfNinetyOne) {
  std::vector<MetricsReport> per;
  for (int i = 0; i < 91; ++i) {
    per.push_back(compute_metrics(i < 13 ? ConfusionCounts{3, 0, 1, 4}
                                         : ConfusionCounts{3, 1, 0, 4}));
  }
  auto r = protocol_threshold_report(per);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", r.pct_precision_100);
  EXPECT_STREQ(buf, "14.3");
  EXPECT_NEAR(r.pct_recall_100, 78 * 100.0 / 91, 1e-9);
  EXPECT_EQ(r.pct_precision_gt_60, 100.0);
  EXPECT_THROW(protocol_threshold_report({}), Error);
}

TEST(Thresholds, Monotone) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MetricsReport> per;
    for (int i = 0; i < 20; ++i) {
      per.push_back(compute_metrics({rng() % 5, rng() % 3, rng() % 3, 1 + rng() % 4}));
    }
    auto r = protocol_threshold_report(per);
    EXPECT_GE(r.pct_precision_gt_60, r.pct_precision_gt_80);
    EXPECT_GE(r.pct_precision_gt_80, r.pct_precision_100);
  }
}

TEST(Agreement, MatrixSymmetry) {
  std::map<std::string, bool> a{{"1", true}, {"2", true}, {"3", false}, {"4", false}, {"5", true}};
  std::map<std::string, bool> b{{"1", true}, {"2", false}, {"3", false}, {"4", true}, {"5", false}};
  auto ab = agreement_matrix(a, b);
  auto ba = agreement_matrix(b, a);
  EXPECT_EQ(ab.a_pos_b_pos, 1u);
  EXPECT_EQ(ab.a_pos_b_neg, 2u);
  EXPECT_EQ(ab.a_neg_b_pos, 1u);
  EXPECT_EQ(ab.a_neg_b_neg, 1u);
  EXPECT_EQ(ab.a_pos_b_neg, ba.a_neg_b_pos);
  EXPECT_EQ(ab.overall_agreement, ba.overall_agreement);
  EXPECT_DOUBLE_EQ(ab.overall_agreement, 0.4);
}

TEST(Agreement, InterRater) {
  std::vector<std::string> items;
  std::vector<RaterLabel> labels;
  for (int i = 0; i < 10; ++i) {
    const auto id = "I" + std::to_string(i);
    items.push_back(id);
    labels.push_back({id, "a", i % 2 == 0});
    labels.push_back({id, "b", i % 2 == 0});
  }
  EXPECT_DOUBLE_EQ(inter_rater_agreement(labels, {items}), 1.0);
  labels[1].label = !labels[1].label;
  labels[3].label = !labels[3].label;
  EXPECT_DOUBLE_EQ(inter_rater_agreement(labels, {items}), 0.8);
  // Third rater disagrees with everyone on half the items.
  for (int i = 0; i < 10; ++i) labels.push_back({items[i], "c", i < 5});
  double ab = 0.8, ac = 0, bc = 0;
  for (int i = 0; i < 10; ++i) {
    const bool a = i % 2 == 0, b = labels[2 * i + 1].label, c = i < 5;
    ac += (a == c) / 10.0;
    bc += (b == c) / 10.0;
  }
  EXPECT_NEAR(inter_rater_agreement(labels, {items}), (ab + ac + bc) / 3, 1e-12);
}

TEST(Agreement, InsufficientOverlap) {
  try {
    inter_rater_agreement({{"x", "a", true}}, {{"x"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientOverlap);
  }
  EXPECT_THROW(inter_rater_agreement({}, {}), Error);
}

TEST(Tables, CsvLayout) {
  MetricsReport r = compute_metrics({1, 0, 0, 1});
  r.f1_ci = Interval{0.5, 1.0};
  auto csv = metrics_table_csv({{"proxy, v1", r}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "model,mode,recall,recall_ci_low,recall_ci_high,precision,precision_ci_low,"
            "precision_ci_high,f1,f1_ci_low,f1_ci_high,accuracy,accuracy_ci_low,accuracy_ci_high");
  EXPECT_NE(csv.find("\"proxy, v1\",MICRO,1.0000,,,1.0000,,,1.0000,0.5000,1.0000,1.0000,,"),
            std::string::npos);
}
