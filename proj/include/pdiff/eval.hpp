// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/deepgru.hpp"
#include "pdiff/features.hpp"
#include "pdiff/fingering_dp.hpp"
#include "pdiff/fingering_hmm.hpp"
#include "pdiff/gbt.hpp"
#include "pdiff/metrics.hpp"
#include "pdiff/score.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdiff::eval {

enum class Classifier { GbtWindow, GbtAvg, DeepGru };

std::string classifier_name(Classifier c);  // gbt_window, gbt_avg, deepgru
Classifier classifier_from_name(const std::string& name);

struct PreparedScore {
  std::string id;
  score::DifficultyLabel label;
  std::map<features::FeatureKind, features::FeatureMatrix> matrices;
};

struct PrepareOptions {
  std::vector<features::FeatureKind> kinds{features::kAllKinds.begin(), features::kAllKinds.end()};
  fingering::dp::DpConfig dp = fingering::dp::DpConfig::defaults();
  fingering::hmm::HmmParams hmm = fingering::hmm::default_prior_params();
  int jobs = 1;
  // precomputed assignments aligned with the corpus; computed on demand when null
  const std::vector<fingering::FingeringAssignment>* dp_assignments = nullptr;
  const std::vector<fingering::FingeringAssignment>* hmm_assignments = nullptr;
};

/// Fingers every score with the engines the requested kinds need and builds the matrices.
std::vector<PreparedScore> prepare_corpus(const std::vector<score::LabeledScore>& corpus, const PrepareOptions& opts);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// round(n * test_fraction) with halves rounded up.
int test_count(int n, double test_fraction);

/// Stratified score-level split. Throws DataError when a class has fewer than 2 scores.
Split split_corpus(std::span<const int> classes, std::uint64_t seed, double train_fraction = 0.8);

struct ExperimentSpec {
  std::vector<features::FeatureKind> kinds{features::kAllKinds.begin(), features::kAllKinds.end()};
  std::vector<Classifier> classifiers{Classifier::GbtWindow, Classifier::GbtAvg, Classifier::DeepGru};
  std::vector<std::uint64_t> seeds;
  double train_fraction = 0.8;
  int window = 9;
  int stride = 1;
  gbt::SearchOptions search;
  gru::GruNetConfig gru;
  int jobs = 1;

  static ExperimentSpec desk();  // 10 seeds, small widths, 20 search configs
  static ExperimentSpec full();  // 50 seeds, full widths, 50 search configs
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ExperimentSpec from_json(const nlohmann::ordered_json& j, const ExperimentSpec& base);
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::optional<double> train_accuracy;
  std::optional<double> test_accuracy;
  std::optional<double> spearman_bartok;
  std::optional<double> spearman_henle;
  std::string error;  // nonempty when the cell failed for this seed
};

struct CellReport {
  features::FeatureKind kind = features::FeatureKind::K;
  Classifier classifier = Classifier::GbtAvg;
  std::vector<SeedResult> seeds;
  metrics::MeanStd train, test, bartok, henle;
  int failures = 0;

  /// Recomputes the summaries from the raw per-seed values.
  void summarize();
};

struct EvaluationReport {
  ExperimentSpec spec;
  std::vector<CellReport> cells;

  const CellReport& cell(features::FeatureKind kind, Classifier classifier) const;
  int failures() const;
  nlohmann::ordered_json to_json() const;
  static EvaluationReport from_json(const nlohmann::ordered_json& j);
  std::string to_markdown() const;
};

using Progress = std::function<void(const std::string&)>;

EvaluationReport run_experiment(const ExperimentSpec& spec, const std::vector<PreparedScore>& corpus,
                                const Progress& progress = {});

struct AblationReport {
  ExperimentSpec spec;
  features::FeatureKind kind = features::FeatureKind::PV;
  std::vector<int> sizes;
  std::vector<CellReport> rows;  // gbt_avg, one per size

  nlohmann::ordered_json to_json() const;
  std::string to_markdown() const;
};

inline const std::vector<int> kAblationSizes = {1, 3, 5, 9, 13, 19};

AblationReport window_ablation(const ExperimentSpec& spec, const std::vector<PreparedScore>& corpus,
                               features::FeatureKind kind = features::FeatureKind::PV,
                               const std::vector<int>& sizes = kAblationSizes, const Progress& progress = {});

/// Expected-class ranking correlations for one set of scored pieces.
struct Ranking {
  std::optional<double> bartok;
  std::optional<double> henle;
};

Ranking rank_correlations(std::span<const metrics::Probs> probs, std::span<const score::DifficultyLabel> labels);

}  // namespace pdiff::eval
