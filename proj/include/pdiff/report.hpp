// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/features.hpp"
#include "pdiff/metrics.hpp"
#include "pdiff/score.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdiff::report {

using metrics::Probs;

/// Mean of the window vectors covering each onset. With s > 1 trailing onsets
/// past the last full window are assigned to the last window.
std::vector<Probs> aggregate_onset_probs(std::span<const Probs> window_probs, int onsets, int w, int s = 1);

/// alpha_i / max alpha, for display.
std::vector<double> attention_feedback(std::span<const double> attention);

struct OnsetFeedback {
  std::optional<Probs> probs;
  std::optional<double> attention;  // raw weight; the score's weights sum to 1
};

struct FeedbackAnnotation {
  std::string score_id;
  std::vector<OnsetFeedback> onsets;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static FeedbackAnnotation from_json(const nlohmann::ordered_json& j);
};

/// Argmax with ties going to the lower class.
int display_class(const Probs& p);
/// 1 green, 2 yellow, 3 red.
const char* class_color(int class3);

/// Self-contained HTML page with an SVG piano roll.
std::string render_report(const score::Score& score, const FeedbackAnnotation& annotation);

}  // namespace pdiff::report
