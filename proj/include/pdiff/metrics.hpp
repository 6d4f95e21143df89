// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <vector>

namespace pdiff::metrics {

using Probs = std::array<double, 3>;

/// Mean per-class recall over the classes present in `truth` (labels 1..3).
double balanced_accuracy(std::span<const int> truth, std::span<const int> predicted);

/// 1-based argmax; ties go to the lower class.
int argmax_class(const Probs& p);

/// sum_c c * p_c, in [1, 3].
double expected_class(const Probs& p);

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Pearson correlation of average ranks. Throws DataError when either side
/// has zero variance or the lengths differ or are below 2.
double spearman(std::span<const double> a, std::span<const double> b);

struct MeanStd {
  double mean = 0;
  double std = 0;  // sample standard deviation, 0 for a single value
  int n = 0;
};

MeanStd mean_std(std::span<const double> v);

/// Mean multiclass log-loss of probability rows against 1-based labels.
double log_loss(std::span<const Probs> probs, std::span<const int> labels);

}  // namespace pdiff::metrics
