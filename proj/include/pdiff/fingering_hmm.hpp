// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/fingering.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace pdiff::fingering::hmm {

inline constexpr int kMinInterval = -15;
inline constexpr int kMaxInterval = 15;
inline constexpr int kBuckets = kMaxInterval - kMinInterval + 1;  // 31
inline constexpr int kCellsPerRow = kFingersPerHand * kBuckets;    // 155

/// Interval bucket index for a pitch step, clamped to +-15 semitones.
int bucket_of(int interval);

/// P(next finger, interval bucket | finger) for one hand.
struct HandParams {
  std::array<double, 5> initial{};
  // trans[f-1][f'-1][bucket]
  std::array<std::array<std::array<double, kBuckets>, 5>, 5> trans{};

  double p(int from, int to, int interval) const {
    return trans[static_cast<std::size_t>(from - 1)][static_cast<std::size_t>(to - 1)]
                [static_cast<std::size_t>(bucket_of(interval))];
  }
};

struct HmmParams {
  HandParams left;
  HandParams right;
  double smoothing_alpha = 1.0;

  const HandParams& hand(Hand h) const { return h == Hand::Left ? left : right; }
  HandParams& hand(Hand h) { return h == Hand::Left ? left : right; }

  /// Throws DataError if any row fails to normalize within 1e-9 or a cell is not positive.
  void check() const;
  nlohmann::ordered_json to_json() const;
  static HmmParams from_json(const nlohmann::ordered_json& j);
};

/// One hand's fingered note sequence in (onset, pitch) order.
struct FingeredSequence {
  Hand hand = Hand::Right;
  std::vector<int> pitches;
  std::vector<int> fingers;  // 1..5
};

struct TransitionCounts {
  std::array<std::array<std::array<double, kBuckets>, 5>, 5> right{}, left{};
  std::array<double, 5> right_initial{}, left_initial{};
};

TransitionCounts count_transitions(const std::vector<FingeredSequence>& corpus);

/// Laplace-smoothed maximum likelihood: (count + alpha) / (row_total + alpha * cells).
HmmParams train_hmm(const std::vector<FingeredSequence>& corpus, double alpha = 1.0);

/// exp(-|b - natural_step(f, f')| / 2) per row, natural steps taken from the
/// midpoints of the DP engine's comfortable spans; uniform initial.
HmmParams default_prior_params();

struct DecodedPath {
  std::vector<int> fingers;   // 1..5
  std::vector<double> probs;  // initial probability, then transition probabilities
  double log_likelihood = 0;
};

/// Most probable finger path. `same_slice[t]` marks note t as part of the
/// previous note's chord, which restricts it to a pitch-monotone finger.
DecodedPath viterbi_decode(const HmmParams& params, const std::vector<int>& pitches, Hand hand,
                           const std::vector<bool>& same_slice = {});

/// Log-likelihood of a given finger path under the same model.
double path_log_likelihood(const HmmParams& params, const std::vector<int>& pitches, Hand hand,
                           const std::vector<int>& fingers);

FingeringAssignment assign_fingers_hmm(const score::Score& score, const HmmParams& params);

// --- PIG-style annotation files --------------------------------------------

/// Spelled pitch such as "C4", "F#3", "Bb5", "E-2" to MIDI.
int spelled_pitch_to_midi(std::string_view spelled);

struct PigFile {
  std::vector<FingeredSequence> sequences;  // at most one per hand
  int notes = 0;
};

/// Parses `id onset offset spelled_pitch onvel offvel channel finger` lines.
/// Negative fingers are left hand; "a_b" substitutions keep the first finger.
PigFile parse_pig(std::string_view text);

}  // namespace pdiff::fingering::hmm
