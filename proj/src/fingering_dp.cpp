// SPDX-License-Identifier: Apache-2.0
#include "pdiff/fingering_dp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace pdiff::fingering::dp {

DpConfig DpConfig::defaults() {
  DpConfig c;
  auto set = [&c](int a, int b, int lo, int hi) { c.spans[a - 1][b - 1] = {lo, hi}; };
  set(1, 2, -5, 8);
  set(1, 3, -4, 11);
  set(1, 4, -3, 13);
  set(1, 5, -1, 15);
  set(2, 3, 1, 5);
  set(2, 4, 1, 7);
  set(2, 5, 2, 10);
  set(3, 4, 1, 4);
  set(3, 5, 1, 7);
  set(4, 5, 1, 5);
  return c;
}

Span DpConfig::span(int from, int to) const {
  if (from == to) return {0, 0};
  if (from < to) return spans[from - 1][to - 1];
  const Span s = spans[to - 1][from - 1];
  return {-s.hi, -s.lo};
}

nlohmann::ordered_json DpConfig::to_json() const {
  nlohmann::ordered_json j;
  auto& sp = j["spans"] = nlohmann::ordered_json::object();
  for (int a = 1; a <= 5; ++a)
    for (int b = a + 1; b <= 5; ++b)
      sp[std::to_string(a) + "-" + std::to_string(b)] = {spans[a - 1][b - 1].lo, spans[a - 1][b - 1].hi};
  j["stretch_slope"] = stretch_slope;
  j["crossing_keys"] = crossing_keys;
  j["epsilon_seconds"] = epsilon_seconds;
  j["pv_scale"] = pv_scale;
  j["lookahead"] = lookahead;
  j["beam"] = beam;
  return j;
}

DpConfig DpConfig::from_json(const nlohmann::ordered_json& j) {
  DpConfig c = defaults();
  try {
    if (j.contains("spans"))
      for (const auto& [key, val] : j.at("spans").items()) {
        const int a = key.at(0) - '0', b = key.at(2) - '0';
        if (a < 1 || b > 5 || a >= b) throw FormatError("bad span key '" + key + "'");
        c.spans[a - 1][b - 1] = {val.at(0).get<int>(), val.at(1).get<int>()};
      }
    c.stretch_slope = j.value("stretch_slope", c.stretch_slope);
    c.crossing_keys = j.value("crossing_keys", c.crossing_keys);
    c.epsilon_seconds = j.value("epsilon_seconds", c.epsilon_seconds);
    c.pv_scale = j.value("pv_scale", c.pv_scale);
    c.lookahead = j.value("lookahead", c.lookahead);
    c.beam = j.value("beam", c.beam);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed DP config: ") + e.what());
  }
  if (c.lookahead < 1 || c.beam < 1 || c.epsilon_seconds <= 0 || c.pv_scale <= 0)
    throw FormatError("DP config: lookahead, beam, epsilon and pv_scale must be positive");
  return c;
}

double key_position(int pitch) {
  if (pitch < kLowestPitch || pitch > kHighestPitch)
    throw RangeError("pitch " + std::to_string(pitch) + " outside the piano range");
  // white-key index within an octave starting at C; black keys map to -1
  static constexpr int kWhite[12] = {0, -1, 1, -1, 2, 3, -1, 4, -1, 5, -1, 6};
  const auto white_index = [](int p) { return (p / 12) * 7 + kWhite[p % 12]; };
  const int origin = white_index(kLowestPitch);  // A0
  if (kWhite[pitch % 12] >= 0) return white_index(pitch) - origin;
  return white_index(pitch - 1) - origin + 0.5;
}

namespace {

double stretch_penalty(int from, int to, int mirrored_delta, const DpConfig& cfg) {
  const Span s = cfg.span(from, to);
  int outside = 0;
  if (mirrored_delta < s.lo) outside = s.lo - mirrored_delta;
  if (mirrored_delta > s.hi) outside = mirrored_delta - s.hi;
  return 1.0 + cfg.stretch_slope * outside;
}

bool crosses(int from, int to, int mirrored_delta) {
  return (from == 1 && to != 1 && mirrored_delta < 0) || (to == 1 && from != 1 && mirrored_delta > 0);
}

double seconds_between(const Rational& a, const Rational& b, double tempo_bpm) {
  return to_double(b - a) * 60.0 / tempo_bpm;
}

}  // namespace

double transition_cost(const FingerAt& prev, const FingerAt& next, double tempo_bpm, Hand hand, const DpConfig& cfg) {
  if (prev.finger < 1 || prev.finger > 5 || next.finger < 1 || next.finger > 5)
    throw RangeError("finger outside 1..5");
  if (!(tempo_bpm > 0)) throw DataError("tempo must be positive");
  const double dt = seconds_between(prev.onset, next.onset, tempo_bpm);
  if (!(dt > 0)) throw DataError("transition needs strictly increasing onsets");
  if (prev.finger == next.finger && prev.pitch == next.pitch) return 0.0;
  const int delta = next.pitch - prev.pitch;
  const int mirrored = hand == Hand::Right ? delta : -delta;
  const double move = std::abs(key_position(next.pitch) - key_position(prev.pitch));
  double keys = move * stretch_penalty(prev.finger, next.finger, mirrored, cfg);
  if (crosses(prev.finger, next.finger, mirrored)) keys += cfg.crossing_keys;
  return keys / std::max(dt, cfg.epsilon_seconds);
}

double pv_scalar(double cost, const DpConfig& cfg) {
  if (!(cost >= 0.0)) throw RangeError("velocity cost must be nonnegative");
  return cost / (cost + cfg.pv_scale);
}

std::vector<HandSlice> hand_slices(const score::Score& score, Hand hand) {
  std::vector<HandSlice> out;
  for (std::size_t i = 0; i < score.events.size(); ++i) {
    const auto& e = score.events[i];
    if (e.hand != hand) continue;
    if (out.empty() || out.back().onset != e.onset) out.push_back({e.onset, {}, {}});
    out.back().pitches.push_back(e.pitch);
    out.back().event_indices.push_back(i);
  }
  return out;
}

double slice_transition_cost(const HandSlice& prev, const std::vector<int>& pf, const HandSlice& next,
                             const std::vector<int>& nf, double tempo_bpm, Hand hand, const DpConfig& cfg) {
  const double dt = seconds_between(prev.onset, next.onset, tempo_bpm);
  if (!(dt > 0)) throw DataError("transition needs strictly increasing onsets");
  if (prev.pitches.size() == 1 && next.pitches.size() == 1)
    return transition_cost({pf[0], prev.pitches[0], prev.onset}, {nf[0], next.pitches[0], next.onset}, tempo_bpm, hand, cfg);

  const auto center = [](const HandSlice& s) {
    double sum = 0;
    for (int p : s.pitches) sum += key_position(p);
    return sum / static_cast<double>(s.pitches.size());
  };
  double stretch = 1.0;
  bool crossing = false;
  bool all_same = prev.pitches == next.pitches && pf == nf;
  if (all_same) return 0.0;
  for (std::size_t i = 0; i < pf.size(); ++i)
    for (std::size_t k = 0; k < nf.size(); ++k) {
      const int delta = next.pitches[k] - prev.pitches[i];
      const int mirrored = hand == Hand::Right ? delta : -delta;
      stretch = std::max(stretch, stretch_penalty(pf[i], nf[k], mirrored, cfg));
      crossing = crossing || crosses(pf[i], nf[k], mirrored);
    }
  double keys = std::abs(center(next) - center(prev)) * stretch;
  if (crossing) keys += cfg.crossing_keys;
  return keys / std::max(dt, cfg.epsilon_seconds);
}

std::vector<std::vector<int>> candidate_fingerings(const HandSlice& slice, Hand hand, const DpConfig& cfg) {
  const int k = static_cast<int>(slice.pitches.size());
  if (k > 5)
    throw ConstraintError("unplayable chord: " + std::to_string(k) + " simultaneous notes in one hand at onset " +
                          std::to_string(to_double(slice.onset)));
  std::vector<std::vector<int>> all, within;
  // choose k of the 5 fingers; ascending for the right hand, descending for the left
  for (unsigned mask = 1; mask < 32; ++mask) {
    if (std::popcount(mask) != k) continue;
    std::vector<int> f;
    for (int b = 0; b < 5; ++b)
      if (mask & (1u << b)) f.push_back(b + 1);
    if (hand == Hand::Left) std::reverse(f.begin(), f.end());
    bool ok = true;
    for (int i = 0; i + 1 < k; ++i) {
      const int delta = slice.pitches[static_cast<std::size_t>(i + 1)] - slice.pitches[static_cast<std::size_t>(i)];
      const int mirrored = hand == Hand::Right ? delta : -delta;
      const Span s = cfg.span(f[static_cast<std::size_t>(i)], f[static_cast<std::size_t>(i + 1)]);
      ok = ok && mirrored >= s.lo && mirrored <= s.hi;
    }
    all.push_back(f);
    if (ok) within.push_back(f);
  }
  auto& out = within.empty() ? all : within;  // over-wide chords fall back to the monotone rule alone
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Partial {
  double cost = 0;
  std::vector<int> path;  // candidate indices from the window start
};

bool better(const Partial& a, const Partial& b) {
  const double tol = 1e-9 * (1.0 + std::max(std::abs(a.cost), std::abs(b.cost)));
  if (a.cost < b.cost - tol) return true;
  if (b.cost < a.cost - tol) return false;
  return a.path < b.path;  // candidates are sorted, so this is the finger-sequence order
}

}  // namespace

HandResult assign_hand(const std::vector<HandSlice>& slices, Hand hand, double tempo_bpm, const DpConfig& cfg) {
  const std::size_t n = slices.size();
  std::vector<std::vector<std::vector<int>>> cands(n);
  for (std::size_t i = 0; i < n; ++i) cands[i] = candidate_fingerings(slices[i], hand, cfg);

  const auto tc = [&](std::size_t i, int ci, std::size_t j, int cj) {
    return slice_transition_cost(slices[i], cands[i][static_cast<std::size_t>(ci)], slices[j],
                                 cands[j][static_cast<std::size_t>(cj)], tempo_bpm, hand, cfg);
  };

  HandResult result;
  result.fingers.resize(n);
  result.costs.resize(n, 0.0);
  std::vector<int> chosen(n, -1);
  const std::size_t beam = static_cast<std::size_t>(cfg.beam);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t end = std::min(n, i + static_cast<std::size_t>(cfg.lookahead));
    std::vector<Partial> frontier;
    for (int c = 0; c < static_cast<int>(cands[i].size()); ++c) {
      const double cost = i > 0 ? tc(i - 1, chosen[i - 1], i, c) : 0.0;
      frontier.push_back({cost, {c}});
    }
    std::sort(frontier.begin(), frontier.end(), better);
    if (frontier.size() > beam) frontier.resize(beam);

    for (std::size_t pos = i + 1; pos < end; ++pos) {
      // recombine on the last state: the cost is first-order in slice assignments
      std::vector<Partial> best(cands[pos].size());
      std::vector<bool> seen(cands[pos].size(), false);
      for (const auto& p : frontier) {
        for (int c = 0; c < static_cast<int>(cands[pos].size()); ++c) {
          Partial q{p.cost + tc(pos - 1, p.path.back(), pos, c), p.path};
          q.path.push_back(c);
          auto& slot = best[static_cast<std::size_t>(c)];
          if (!seen[static_cast<std::size_t>(c)] || better(q, slot)) {
            slot = std::move(q);
            seen[static_cast<std::size_t>(c)] = true;
          }
        }
      }
      frontier.clear();
      for (std::size_t c = 0; c < best.size(); ++c)
        if (seen[c]) frontier.push_back(std::move(best[c]));
      std::sort(frontier.begin(), frontier.end(), better);
      if (frontier.size() > beam) frontier.resize(beam);
    }
    const auto& winner = frontier.front();
    chosen[i] = winner.path.front();
    result.fingers[i] = cands[i][static_cast<std::size_t>(chosen[i])];
    result.costs[i] = i > 0 ? tc(i - 1, chosen[i - 1], i, chosen[i]) : 0.0;
  }
  return result;
}

HandResult assign_fingers_dp(const score::Score& score, Hand hand, const DpConfig& cfg) {
  const auto slices = hand_slices(score, hand);
  if (slices.empty()) throw DataError("score '" + score.id + "' has no notes for the " +
                                      (hand == Hand::Left ? "left" : "right") + " hand");
  return assign_hand(slices, hand, score.tempo_bpm, cfg);
}

FingeringAssignment assign_fingers_dp(const score::Score& score, const DpConfig& cfg) {
  FingeringAssignment fa;
  fa.engine = Engine::DP;
  fa.fingers.assign(score.events.size(), 0);
  fa.scalars.assign(score.events.size(), 0.0);
  for (Hand hand : {Hand::Left, Hand::Right}) {
    const auto slices = hand_slices(score, hand);
    if (slices.empty()) continue;
    const auto res = assign_hand(slices, hand, score.tempo_bpm, cfg);
    const int sign = hand == Hand::Right ? 1 : -1;
    for (std::size_t s = 0; s < slices.size(); ++s)
      for (std::size_t k = 0; k < slices[s].event_indices.size(); ++k) {
        const auto idx = slices[s].event_indices[k];
        fa.fingers[idx] = sign * res.fingers[s][k];
        fa.scalars[idx] = res.costs[s];
      }
  }
  return fa;
}

}  // namespace pdiff::fingering::dp
