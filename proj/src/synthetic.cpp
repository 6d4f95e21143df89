// SPDX-License-Identifier: Apache-2.0
#include "pdiff/rng.hpp"
#include "pdiff/score.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace pdiff::score {
namespace {

struct ClassProfile {
  double notes_mean, notes_sd;  // Mikrokosmos-difficulty note-count statistics
  double tempo_mean;
  std::array<double, 4> duration_weights;  // sixteenth, eighth, quarter, half
  std::array<double, 3> interval_weights;  // step (1-2), skip (3-5), leap (6-12)
  double chord_prob;
  int chord_max;
  double both_hands_prob;
  double rest_prob;
};

constexpr std::array<ClassProfile, 3> kProfiles = {{
    {108.58, 57.16, 100.0, {0.00, 0.15, 0.55, 0.30}, {0.85, 0.13, 0.02}, 0.04, 2, 0.30, 0.08},
    {260.40, 111.00, 122.0, {0.05, 0.45, 0.40, 0.10}, {0.60, 0.28, 0.12}, 0.15, 3, 0.60, 0.05},
    {650.06, 322.15, 156.0, {0.35, 0.45, 0.20, 0.00}, {0.35, 0.30, 0.35}, 0.32, 4, 0.85, 0.02},
}};

constexpr std::array<std::pair<int, int>, 3> kBartokRange = {{{1, 66}, {67, 121}, {122, 153}}};

template <std::size_t N>
std::size_t pick(SplitMix64& rng, const std::array<double, N>& w) {
  double total = 0;
  for (double x : w) total += x;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < N; ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  return N - 1;
}

struct HandStream {
  Hand hand;
  int center = 60;
  int last = 60;
};

int draw_interval(SplitMix64& rng, const ClassProfile& p, double latent) {
  auto w = p.interval_weights;
  w[2] += 0.08 * latent;
  switch (pick(rng, w)) {
    case 0: return static_cast<int>(rng.uniform_int(1, 2));
    case 1: return static_cast<int>(rng.uniform_int(3, 5));
    default: return static_cast<int>(rng.uniform_int(6, 12));
  }
}

}  // namespace

SyntheticScore generate_synthetic_score(std::uint64_t seed, int class3) {
  if (class3 < 1 || class3 > 3) throw LabelError("class3 must be 1, 2 or 3");
  const auto& p = kProfiles[static_cast<std::size_t>(class3 - 1)];
  auto rng = SplitMix64::named(seed * 4 + static_cast<std::uint64_t>(class3), "synthetic-score");

  const auto [lo, hi] = kBartokRange[static_cast<std::size_t>(class3 - 1)];
  const int bartok = static_cast<int>(rng.uniform_int(lo, hi));
  const double latent = static_cast<double>(bartok - lo) / static_cast<double>(hi - lo);
  const int henle = std::clamp(1 + (bartok - 1) / 26, 1, 9);

  const double n_lo = std::max(30.0, p.notes_mean - 2.0 * p.notes_sd);
  const double n_hi = p.notes_mean + 2.0 * p.notes_sd;
  const int target_notes = static_cast<int>(std::lround(std::clamp(p.notes_mean + p.notes_sd * rng.normal(), n_lo, n_hi)));
  const double tempo = std::clamp(std::round(p.tempo_mean + 10.0 * latent + 12.0 * rng.normal()), 50.0, 240.0);

  Score score;
  score.id = "synthetic-c" + std::to_string(class3) + "-s" + std::to_string(seed);
  score.tempo_bpm = tempo;
  score.divisions = 4;

  static constexpr std::array<Rational, 4> kDurations = {Rational(1, 4), Rational(1, 2), Rational(1), Rational(2)};
  std::array<HandStream, 2> hands{HandStream{Hand::Left, 48, 48}, HandStream{Hand::Right, 67, 67}};
  std::set<Rational> onsets;
  int emitted = 0;
  Rational phrase_start{0};

  while (emitted < target_notes) {
    const int bars = static_cast<int>(rng.uniform_int(2, 4));
    const Rational phrase_end = phrase_start + Rational(4 * bars);
    // new hand positions for each phrase
    hands[0].center = static_cast<int>(rng.uniform_int(38, 56));
    hands[1].center = static_cast<int>(rng.uniform_int(60, 80));
    for (auto& h : hands) h.last = h.center + static_cast<int>(rng.uniform_int(-3, 3));

    bool active[2];
    if (rng.bernoulli(p.both_hands_prob)) {
      active[0] = active[1] = true;
    } else {
      const bool right = rng.bernoulli(0.6);
      active[0] = !right;
      active[1] = right;
    }

    for (int hi_idx = 0; hi_idx < 2 && emitted < target_notes; ++hi_idx) {
      if (!active[hi_idx]) continue;
      auto& hs = hands[static_cast<std::size_t>(hi_idx)];
      Rational t = phrase_start;
      while (t < phrase_end && emitted < target_notes) {
        const Rational dur = kDurations[pick(rng, p.duration_weights)];
        if (rng.bernoulli(p.rest_prob)) {
          t += dur;
          continue;
        }
        int step = draw_interval(rng, p, latent);
        int dir = rng.bernoulli(0.5) ? 1 : -1;
        if (hs.last + dir * step > hs.center + 12 || hs.last + dir * step < hs.center - 12) dir = -dir;
        const int pitch = std::clamp(hs.last + dir * step, kLowestPitch + 12, kHighestPitch - 12);
        hs.last = pitch;

        std::vector<int> chord{pitch};
        if (rng.bernoulli(std::min(0.9, p.chord_prob + 0.05 * latent))) {
          const int extra = static_cast<int>(rng.uniform_int(1, p.chord_max - 1));
          int top = pitch;
          for (int k = 0; k < extra; ++k) {
            const int gap = static_cast<int>(rng.uniform_int(3, 5));
            const int next = hs.hand == Hand::Right ? top + gap : top - gap;
            if (std::abs(next - pitch) > 12) break;
            chord.push_back(next);
            top = next;
          }
        }
        const int measure = static_cast<int>(boost::rational_cast<std::int64_t>(t / Rational(4))) + 1;
        for (int note : chord) {
          if (emitted >= target_notes) break;
          NoteEvent e;
          e.pitch = note;
          e.onset = t;
          e.duration = dur;
          e.hand = hs.hand;
          e.voice = hs.hand == Hand::Right ? 1 : 2;
          e.measure_index = measure;
          score.events.push_back(e);
          ++emitted;
          onsets.insert(t);
        }
        t += dur;
      }
    }
    phrase_start = phrase_end;
  }

  score.normalize();
  score.bars = score.events.empty() ? 0 : score.events.back().measure_index;
  for (const auto& e : score.events) score.bars = std::max(score.bars, e.measure_index);
  score.validate();

  SyntheticScore out;
  out.score = std::move(score);
  out.label = make_label(bartok, henle);
  out.info.onset_count = static_cast<int>(onsets.size());
  return out;
}

std::vector<LabeledScore> generate_synthetic_corpus(std::uint64_t seed, int per_class) {
  std::vector<LabeledScore> corpus;
  for (int c = 1; c <= 3; ++c)
    for (int k = 0; k < per_class; ++k) {
      auto s = generate_synthetic_score(seed * 1000003ULL + static_cast<std::uint64_t>(k), c);
      corpus.push_back({std::move(s.score), s.label});
    }
  return corpus;
}

}  // namespace pdiff::score
