// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/common.hpp"
#include "pdiff/metrics.hpp"
#include "pdiff/rng.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pdiff::gbt {

using metrics::Probs;

struct GbtHyperParams {
  int rounds = 100;
  int max_depth = 6;
  double learning_rate = 0.3;
  double min_child_weight = 1.0;
  double subsample = 1.0;
  double colsample = 1.0;
  double l2_lambda = 1.0;

  void validate() const;  // UsageError on out-of-range values
  nlohmann::ordered_json to_json() const;
  static GbtHyperParams from_json(const nlohmann::ordered_json& j);
};

/// Sparse row store of flattened windows. Labels are 1..3; `groups` ties
/// each row to the score it came from.
struct Dataset {
  int width = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;
  std::vector<int> labels;
  std::vector<int> groups;

  explicit Dataset(int w = 0) : width(w) {}
  std::size_t size() const { return labels.size(); }
  void add_row(std::span<const double> dense, int label, int group = 0);
  double value(std::size_t row, int feature) const;
  std::vector<double> dense_row(std::size_t row) const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct GradHess {
  Probs grad{};
  Probs hess{};
};

GradHess softmax_grad_hess(const Probs& logits, int label);
Probs softmax(const Probs& logits);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;
};

/// x[feature] < threshold goes left.
struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Lookup>
  double predict(Lookup&& x) const {
    std::size_t n = 0;
    while (nodes[n].feature >= 0)
      n = static_cast<std::size_t>(x(nodes[n].feature) < nodes[n].threshold ? nodes[n].left : nodes[n].right);
    return nodes[n].value;
  }
  int depth() const;
};

struct GbtModel {
  int width = 0;
  Probs base_score{};
  std::vector<std::array<Tree, 3>> trees;  // per round, per class
  GbtHyperParams hyper;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
  static GbtModel from_json(const nlohmann::ordered_json& j);
};

struct FitReport {
  std::vector<double> train_loss;  // before the first round, then after each round
  double min_split_gain = 0;       // smallest accepted gain, 0 when no split was made
  int splits = 0;
  std::vector<std::string> warnings;
};

GbtModel fit_gbt(const Dataset& data, const GbtHyperParams& hyper, std::uint64_t seed, FitReport* report = nullptr);

Probs predict_proba(const GbtModel& model, std::span<const double> x);
Probs predict_row(const GbtModel& model, const Dataset& data, std::size_t row);
std::vector<Probs> predict_dataset(const GbtModel& model, const Dataset& data);

/// Arithmetic mean of the per-window probabilities of one score.
Probs predict_score_avg(const GbtModel& model, const std::vector<std::vector<double>>& windows);
Probs average_probs(std::span<const Probs> rows);

// --- hyperparameter search ------------------------------------------------

struct SearchOptions {
  int n_configs = 50;
  int folds = 5;
  int window_thinning = 1;  // keep every k-th window of each score while cross-validating
};

struct ConfigResult {
  GbtHyperParams hyper;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0;
};

struct SearchReport {
  std::vector<ConfigResult> configs;
  std::size_t best = 0;
  std::vector<int> fold_of_group;  // indexed by Dataset::groups value
};

GbtHyperParams sample_hyper(SplitMix64& rng);

/// Stratified score-level fold assignment. `group_labels[g]` is the class of
/// group g. Throws FoldError when a class has fewer groups than folds.
std::vector<int> assign_folds(std::span<const int> group_labels, int folds, std::uint64_t seed);

/// Random search scored by mean window-level validation balanced accuracy;
/// ties keep the first sampled config.
SearchReport random_search(const Dataset& train, const SearchOptions& opts, std::uint64_t seed);

}  // namespace pdiff::gbt
