// SPDX-License-Identifier: Apache-2.0
#include "pdiff/metrics.hpp"

#include "pdiff/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdiff::metrics {

double balanced_accuracy(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("label and prediction counts differ");
  if (truth.empty()) throw DataError("balanced accuracy of an empty set");
  std::array<double, 3> hit{}, total{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 1 || truth[i] > 3) throw LabelError("class label outside 1..3");
    const auto c = static_cast<std::size_t>(truth[i] - 1);
    total[c] += 1;
    hit[c] += predicted[i] == truth[i];
  }
  double sum = 0;
  int present = 0;
  for (std::size_t c = 0; c < 3; ++c)
    if (total[c] > 0) {
      sum += hit[c] / total[c];
      ++present;
    }
  return sum / present;
}

int argmax_class(const Probs& p) {
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)]) best = c;
  return best + 1;
}

double expected_class(const Probs& p) { return p[0] + 2.0 * p[1] + 3.0 * p[2]; }

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("spearman inputs differ in length");
  if (a.size() < 2) throw DataError("spearman needs at least two pairs");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) throw DataError("spearman correlation undefined for constant input");
  return sab / std::sqrt(saa * sbb);
}

MeanStd mean_std(std::span<const double> v) {
  MeanStd out;
  out.n = static_cast<int>(v.size());
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

double log_loss(std::span<const Probs> probs, std::span<const int> labels) {
  if (probs.size() != labels.size() || probs.empty()) throw ShapeError("log-loss inputs must align and be nonempty");
  double sum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    sum -= std::log(std::max(probs[i][static_cast<std::size_t>(labels[i] - 1)], 1e-300));
  return sum / static_cast<double>(probs.size());
}

}  // namespace pdiff::metrics
