// SPDX-License-Identifier: Apache-2.0
#include "pdiff/eval.hpp"
#include "pdiff/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace pdiff;
using namespace pdiff::eval;
using features::FeatureKind;

namespace {

// rank by counting, then plain Pearson
double oracle_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ranks = [](const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double less = 0, same = 0;
      for (double y : x) {
        less += y < x[i];
        same += y == x[i];
      }
      r[i] = 1 + less + (same - 1) / 2;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += ra[i] / n, mb += rb[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

const std::vector<PreparedScore>& small_corpus() {
  static const auto corpus = [] {
    PrepareOptions po;
    po.kinds = {FeatureKind::K, FeatureKind::PV};
    return prepare_corpus(score::generate_synthetic_corpus(11, 6), po);
  }();
  return corpus;
}

ExperimentSpec tiny_spec() {
  ExperimentSpec s;
  s.kinds = {FeatureKind::PV};
  s.seeds = {3};
  s.search.n_configs = 2;
  s.search.folds = 2;
  s.search.window_thinning = 8;
  s.gru = gru::GruNetConfig::desk();
  s.gru.layer_widths = {8, 8};
  s.gru.fc_width = 8;
  s.gru.epochs = 3;
  return s;
}

}  // namespace

TEST(Split, TestCountsFollowTableSizes) {
  EXPECT_EQ(test_count(62, 0.2), 12);
  EXPECT_EQ(test_count(54, 0.2), 11);
  EXPECT_EQ(test_count(31, 0.2), 6);
  EXPECT_EQ(test_count(5, 0.1), 1);  // half rounds up
}

TEST(Split, StratifiedDisjointDeterministic) {
  std::vector<int> classes;
  for (int c = 1; c <= 3; ++c)
    for (int i = 0; i < std::array{62, 54, 31}[c - 1]; ++i) classes.push_back(c);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = split_corpus(classes, seed);
    std::array<int, 4> test_per{};
    for (auto i : s.test) ++test_per[static_cast<std::size_t>(classes[i])];
    EXPECT_EQ(test_per[1], 12);
    EXPECT_EQ(test_per[2], 11);
    EXPECT_EQ(test_per[3], 6);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), classes.size());
    const auto again = split_corpus(classes, seed);
    EXPECT_EQ(again.test, s.test);
  }
  EXPECT_NE(split_corpus(classes, 0).test, split_corpus(classes, 1).test);
}

TEST(Split, TooSmallClassIsRejected) {
  const std::vector<int> classes = {1, 1, 2, 2, 3};
  EXPECT_THROW(split_corpus(classes, 0), DataError);
}

TEST(Metrics, BalancedAccuracyHandCases) {
  const std::vector<int> truth = {1, 1, 2, 2, 3, 3};
  const std::vector<int> pred = {1, 1, 2, 2, 3, 1};
  EXPECT_EQ(metrics::balanced_accuracy(truth, pred), 5.0 / 6.0);
  const std::vector<int> constant_pred(6, 2);
  EXPECT_EQ(metrics::balanced_accuracy(truth, constant_pred), 1.0 / 3.0);
  const std::vector<int> imbalanced = {1, 1, 1, 1, 2, 3};
  const std::vector<int> majority(6, 1);
  EXPECT_EQ(metrics::balanced_accuracy(imbalanced, majority), 1.0 / 3.0);
}

TEST(Metrics, ExpectedClassArithmetic) {
  EXPECT_EQ(metrics::expected_class({1, 0, 0}), 1.0);
  EXPECT_EQ(metrics::expected_class({0, 0, 1}), 3.0);
  EXPECT_DOUBLE_EQ(metrics::expected_class({0.2, 0.3, 0.5}), 2.3);
  EXPECT_EQ(metrics::expected_class({0.5, 0, 0.5}), 2.0);
}

TEST(Metrics, SpearmanMatchesOracleOnAllTiePatterns) {
  SplitMix64 rng(5);
  int checked = 0;
  for (int n = 2; n <= 6; ++n) {
    // every value pattern over n slots with values drawn from n levels covers every tie structure
    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    for (;;) {
      std::vector<double> a(digits.begin(), digits.end()), b(static_cast<std::size_t>(n));
      for (auto& x : b) x = static_cast<double>(rng.uniform_int(0, 3));
      if (constant(a) || constant(b)) {
        EXPECT_THROW(metrics::spearman(a, b), DataError);
      } else {
        EXPECT_NEAR(metrics::spearman(a, b), oracle_spearman(a, b), 1e-12);
        EXPECT_NEAR(metrics::spearman(a, a), 1.0, 1e-12);
        ++checked;
      }
      std::size_t k = 0;
      while (k < digits.size() && ++digits[k] == n) digits[k++] = 0;
      if (k == digits.size()) break;
    }
  }
  EXPECT_GT(checked, 45000);
}

TEST(Metrics, SpearmanReversalAndIdentity) {
  const std::vector<double> a = {1, 2, 3, 4, 5}, r = {5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(metrics::spearman(a, a), 1.0);
  EXPECT_DOUBLE_EQ(metrics::spearman(a, r), -1.0);
}

TEST(Ranking, HenleUsesOnlyGradedScores) {
  std::vector<metrics::Probs> probs = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.5, 0.5, 0}};
  std::vector<score::DifficultyLabel> labels(4);
  for (int i = 0; i < 4; ++i) labels[static_cast<std::size_t>(i)].bartok_index = 10 * (i + 1);
  labels[0].henle_grade = 1;
  labels[2].henle_grade = 5;
  const auto r = rank_correlations(probs, labels);
  ASSERT_TRUE(r.bartok && r.henle);
  EXPECT_DOUBLE_EQ(*r.henle, 1.0);
  EXPECT_NEAR(*r.bartok, oracle_spearman({1, 2, 3, 1.5}, {10, 20, 30, 40}), 1e-12);
  labels[2].henle_grade.reset();
  EXPECT_FALSE(rank_correlations(probs, labels).henle);
  std::vector<metrics::Probs> flat(4, metrics::Probs{1, 0, 0});
  EXPECT_FALSE(rank_correlations(flat, labels).bartok);
}

TEST(Report, SummaryRecomputesFromRawValues) {
  CellReport c;
  c.kind = FeatureKind::NP;
  c.classifier = Classifier::DeepGru;
  SplitMix64 rng(9);
  for (std::uint64_t s = 0; s < 7; ++s) {
    SeedResult r;
    r.seed = s;
    if (s == 4) {
      r.error = "boom";
    } else {
      r.train_accuracy = rng.uniform(0, 1);
      r.test_accuracy = rng.uniform(0, 1);
      r.spearman_bartok = rng.uniform(-1, 1);
      if (s % 2) r.spearman_henle = rng.uniform(-1, 1);
    }
    c.seeds.push_back(r);
  }
  c.summarize();
  EXPECT_EQ(c.failures, 1);
  EXPECT_EQ(c.test.n, 6);
  EXPECT_EQ(c.henle.n, 3);
  double m = 0;
  for (const auto& s : c.seeds)
    if (s.test_accuracy) m += *s.test_accuracy;
  EXPECT_NEAR(c.test.mean, m / 6, 1e-15);

  EvaluationReport rep;
  rep.spec = tiny_spec();
  rep.spec.kinds = {FeatureKind::NP};
  rep.spec.classifiers = {Classifier::DeepGru};
  rep.cells = {c};
  const auto j = rep.to_json();
  const auto back = EvaluationReport::from_json(nlohmann::ordered_json::parse(j.dump()));
  const auto& bc = back.cells.at(0);
  EXPECT_EQ(bc.test.mean, c.test.mean);
  EXPECT_EQ(bc.test.std, c.test.std);
  EXPECT_EQ(bc.henle.mean, c.henle.mean);
  EXPECT_EQ(bc.failures, 1);
  EXPECT_EQ(back.to_json().dump(), j.dump());
  EXPECT_NE(rep.to_markdown().find("(1/7 failed)"), std::string::npos);
}

TEST(Spec, JsonOverridesOnlyGivenFields) {
  const auto base = ExperimentSpec::desk();
  const auto s = ExperimentSpec::from_json(nlohmann::ordered_json::parse(R"({"seeds":[4,5],"deepgru":{"epochs":2}})"), base);
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(s.gru.epochs, 2);
  EXPECT_EQ(s.gru.layer_widths, base.gru.layer_widths);
  EXPECT_EQ(s.search.n_configs, base.search.n_configs);
  EXPECT_THROW(ExperimentSpec::from_json(nlohmann::ordered_json::parse(R"({"features":["XX"]})"), base), UsageError);
  EXPECT_THROW(ExperimentSpec::from_json(nlohmann::ordered_json::parse(R"({"window":0})"), base), UsageError);
  EXPECT_EQ(ExperimentSpec::full().seeds.size(), 50u);
  EXPECT_EQ(ExperimentSpec::desk().seeds.size(), 10u);
}

TEST(Experiment, OneSeedOneCellBookkeeping) {
  auto spec = tiny_spec();
  spec.classifiers = {Classifier::GbtAvg};
  const auto rep = run_experiment(spec, small_corpus());
  ASSERT_EQ(rep.cells.size(), 1u);
  const auto& c = rep.cells[0];
  ASSERT_EQ(c.seeds.size(), 1u);
  EXPECT_TRUE(c.seeds[0].error.empty()) << c.seeds[0].error;
  EXPECT_EQ(c.test.n, 1);
  EXPECT_EQ(c.train.n, 1);
  EXPECT_EQ(c.test.std, 0.0);
  EXPECT_EQ(c.test.mean, *c.seeds[0].test_accuracy);
}

TEST(Experiment, DeterministicAndFailuresAreRecorded) {
  auto spec = tiny_spec();
  spec.kinds = {FeatureKind::K, FeatureKind::PV};
  spec.seeds = {1, 2};
  const auto a = run_experiment(spec, small_corpus());
  spec.jobs = 2;
  const auto b = run_experiment(spec, small_corpus());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.cells.size(), 6u);
  EXPECT_EQ(a.failures(), 0);
  for (const auto& c : a.cells)
    for (const auto& s : c.seeds) {
      EXPECT_GE(*s.test_accuracy, 0.0);
      EXPECT_LE(*s.test_accuracy, 1.0);
      if (c.classifier == Classifier::GbtWindow) EXPECT_FALSE(s.spearman_bartok);
    }

  // 5 training scores per class cannot fill 6 folds: gbt cells fail, deepgru still runs
  spec.search.folds = 6;
  const auto f = run_experiment(spec, small_corpus());
  EXPECT_EQ(f.cell(FeatureKind::PV, Classifier::GbtAvg).failures, 2);
  EXPECT_EQ(f.cell(FeatureKind::PV, Classifier::GbtWindow).failures, 2);
  EXPECT_EQ(f.cell(FeatureKind::PV, Classifier::DeepGru).failures, 0);
  EXPECT_NE(f.cell(FeatureKind::K, Classifier::GbtAvg).seeds[0].error.find("fold"), std::string::npos);
}

TEST(Experiment, MissingFeatureMatrixIsADataError) {
  auto spec = tiny_spec();
  spec.kinds = {FeatureKind::NF};
  EXPECT_THROW(run_experiment(spec, small_corpus()), DataError);
}

TEST(Ablation, OneRowPerWindowSize) {
  auto spec = tiny_spec();
  const auto rep = window_ablation(spec, small_corpus(), FeatureKind::PV);
  ASSERT_EQ(rep.rows.size(), 6u);
  for (const auto& r : rep.rows) {
    EXPECT_EQ(r.classifier, Classifier::GbtAvg);
    EXPECT_EQ(r.failures, 0);
  }
  const auto j = rep.to_json();
  EXPECT_EQ(j["rows"].size(), 6u);
  EXPECT_EQ(j["rows"][3]["window"], 9);
  EXPECT_TRUE(j["rows"][3]["default"].get<bool>());
  EXPECT_NE(rep.to_markdown().find("w=1 "), std::string::npos);
}
