// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/fingering.hpp"

#include <array>
#include <optional>
#include <vector>

namespace pdiff::fingering::dp {

/// Comfortable span, in semitones, from the lower-numbered finger to the
/// higher-numbered one on the right hand: pitch(b) - pitch(a) for a < b.
struct Span {
  int lo = 0;
  int hi = 0;
};

struct DpConfig {
  // indexed [a-1][b-1] for a < b
  std::array<std::array<Span, 5>, 5> spans{};
  double stretch_slope = 0.25;   // penalty growth per semitone outside the span
  double crossing_keys = 1.0;    // crossing cost, in key units moved
  double epsilon_seconds = 0.05;
  double pv_scale = 10.0;        // c0 in key-units/s
  int lookahead = 9;
  int beam = 64;

  static DpConfig defaults();
  Span span(int from_finger, int to_finger) const;  // any ordered pair, mirrored as needed
  nlohmann::ordered_json to_json() const;
  static DpConfig from_json(const nlohmann::ordered_json& j);
};

/// White keys are consecutive integers from A0 = 0; black keys sit at +0.5.
double key_position(int pitch);

struct FingerAt {
  int finger;  // 1..5
  int pitch;
  Rational onset;
};

/// Velocity cost of moving the hand from `prev` to `next`.
double transition_cost(const FingerAt& prev, const FingerAt& next, double tempo_bpm,
                       Hand hand = Hand::Right, const DpConfig& cfg = DpConfig::defaults());

/// Maps a raw cost onto [0, 1): cost / (cost + c0).
double pv_scalar(double cost, const DpConfig& cfg = DpConfig::defaults());

/// One hand's notes at one onset, pitch ascending.
struct HandSlice {
  Rational onset;
  std::vector<int> pitches;
  std::vector<std::size_t> event_indices;  // into Score::events
};

std::vector<HandSlice> hand_slices(const score::Score& score, Hand hand);

/// Cost of moving between two chord/single-note states. Fingers are parallel to pitches.
double slice_transition_cost(const HandSlice& prev, const std::vector<int>& prev_fingers,
                             const HandSlice& next, const std::vector<int>& next_fingers,
                             double tempo_bpm, Hand hand, const DpConfig& cfg);

/// All playable finger tuples for a slice (distinct, pitch-monotone, within span limits).
std::vector<std::vector<int>> candidate_fingerings(const HandSlice& slice, Hand hand, const DpConfig& cfg);

struct HandResult {
  std::vector<std::vector<int>> fingers;  // per slice
  std::vector<double> costs;              // arrival cost per slice
};

/// Sliding-window beam search over one hand's slices.
HandResult assign_hand(const std::vector<HandSlice>& slices, Hand hand, double tempo_bpm,
                       const DpConfig& cfg = DpConfig::defaults());

/// One hand of `score`. Throws DataError when the hand has no notes.
HandResult assign_fingers_dp(const score::Score& score, Hand hand, const DpConfig& cfg = DpConfig::defaults());

/// Both hands; every event receives a finger and its arrival cost.
FingeringAssignment assign_fingers_dp(const score::Score& score, const DpConfig& cfg = DpConfig::defaults());

}  // namespace pdiff::fingering::dp
