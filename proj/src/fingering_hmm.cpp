// SPDX-License-Identifier: Apache-2.0
#include "pdiff/fingering_hmm.hpp"
#include "pdiff/fingering_dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

namespace pdiff::fingering::hmm {

int bucket_of(int interval) { return std::clamp(interval, kMinInterval, kMaxInterval) - kMinInterval; }

void HmmParams::check() const {
  for (const HandParams* hp : {&left, &right}) {
    double s = 0;
    for (double x : hp->initial) {
      if (!(x > 0)) throw DataError("HMM initial probability must be positive");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw DataError("HMM initial distribution does not sum to 1");
    for (const auto& row : hp->trans) {
      double t = 0;
      for (const auto& to : row)
        for (double x : to) {
          if (!(x > 0)) throw DataError("HMM transition probability must be positive");
          t += x;
        }
      if (std::abs(t - 1.0) > 1e-9) throw DataError("HMM transition row does not sum to 1");
    }
  }
}

namespace {

nlohmann::ordered_json hand_json(const HandParams& h) {
  nlohmann::ordered_json j;
  j["initial"] = h.initial;
  auto& t = j["trans"] = nlohmann::ordered_json::array();
  for (const auto& row : h.trans) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& to : row) r.push_back(to);
    t.push_back(std::move(r));
  }
  return j;
}

HandParams hand_from(const nlohmann::ordered_json& j) {
  HandParams h;
  h.initial = j.at("initial").get<std::array<double, 5>>();
  const auto& t = j.at("trans");
  if (t.size() != 5) throw FormatError("HMM trans must have 5 rows");
  for (std::size_t f = 0; f < 5; ++f) {
    if (t[f].size() != 5) throw FormatError("HMM trans row must have 5 next fingers");
    for (std::size_t g = 0; g < 5; ++g) {
      if (t[f][g].size() != kBuckets) throw FormatError("HMM trans cell must have 31 buckets");
      for (std::size_t b = 0; b < kBuckets; ++b) h.trans[f][g][b] = t[f][g][b].get<double>();
    }
  }
  return h;
}

}  // namespace

nlohmann::ordered_json HmmParams::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["bucket_min"] = kMinInterval;
  j["bucket_max"] = kMaxInterval;
  j["smoothing_alpha"] = smoothing_alpha;
  j["right"] = hand_json(right);
  j["left"] = hand_json(left);
  return j;
}

HmmParams HmmParams::from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported HMM params version");
    if (j.at("bucket_min").get<int>() != kMinInterval || j.at("bucket_max").get<int>() != kMaxInterval)
      throw FormatError("HMM params use a different interval bucket range");
    HmmParams p;
    p.smoothing_alpha = j.at("smoothing_alpha").get<double>();
    p.right = hand_from(j.at("right"));
    p.left = hand_from(j.at("left"));
    p.check();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed HMM params: ") + e.what());
  }
}

TransitionCounts count_transitions(const std::vector<FingeredSequence>& corpus) {
  TransitionCounts c;
  for (const auto& seq : corpus) {
    if (seq.pitches.size() != seq.fingers.size())
      throw DataError("fingered sequence has " + std::to_string(seq.pitches.size()) + " pitches but " +
                      std::to_string(seq.fingers.size()) + " fingers");
    for (int f : seq.fingers)
      if (f < 1 || f > 5) throw DataError("training finger " + std::to_string(f) + " outside 1..5");
    if (seq.pitches.empty()) continue;
    auto& trans = seq.hand == Hand::Right ? c.right : c.left;
    auto& init = seq.hand == Hand::Right ? c.right_initial : c.left_initial;
    init[static_cast<std::size_t>(seq.fingers[0] - 1)] += 1;
    for (std::size_t t = 1; t < seq.pitches.size(); ++t)
      trans[static_cast<std::size_t>(seq.fingers[t - 1] - 1)][static_cast<std::size_t>(seq.fingers[t] - 1)]
           [static_cast<std::size_t>(bucket_of(seq.pitches[t] - seq.pitches[t - 1]))] += 1;
  }
  return c;
}

HmmParams train_hmm(const std::vector<FingeredSequence>& corpus, double alpha) {
  if (!(alpha > 0)) throw DataError("smoothing alpha must be positive");
  const auto counts = count_transitions(corpus);
  HmmParams p;
  p.smoothing_alpha = alpha;
  const auto fill = [alpha](HandParams& h, const auto& trans, const auto& init) {
    double total = 0;
    for (double x : init) total += x;
    for (std::size_t f = 0; f < 5; ++f) h.initial[f] = (init[f] + alpha) / (total + alpha * 5);
    for (std::size_t f = 0; f < 5; ++f) {
      double row = 0;
      for (const auto& to : trans[f])
        for (double x : to) row += x;
      for (std::size_t g = 0; g < 5; ++g)
        for (std::size_t b = 0; b < kBuckets; ++b)
          h.trans[f][g][b] = (trans[f][g][b] + alpha) / (row + alpha * kCellsPerRow);
    }
  };
  fill(p.right, counts.right, counts.right_initial);
  fill(p.left, counts.left, counts.left_initial);
  return p;
}

HmmParams default_prior_params() {
  const auto cfg = dp::DpConfig::defaults();
  HmmParams p;
  p.smoothing_alpha = 1.0;
  for (Hand hand : {Hand::Right, Hand::Left}) {
    auto& h = p.hand(hand);
    h.initial.fill(0.2);
    for (int f = 1; f <= 5; ++f) {
      double z = 0;
      for (int g = 1; g <= 5; ++g)
        for (int b = kMinInterval; b <= kMaxInterval; ++b) {
          double d;
          if (f == g) {
            // a finger repeating on another key is a hand shift; twice the slope
            d = 2.0 * std::abs(b);
          } else {
            const auto s = cfg.span(f, g);
            double natural = 0.5 * (s.lo + s.hi);
            if (hand == Hand::Left) natural = -natural;
            d = std::abs(b - natural);
          }
          const double w = std::exp(-d / 2.0);
          h.trans[static_cast<std::size_t>(f - 1)][static_cast<std::size_t>(g - 1)][static_cast<std::size_t>(bucket_of(b))] = w;
          z += w;
        }
      for (auto& to : h.trans[static_cast<std::size_t>(f - 1)])
        for (double& x : to) x /= z;
    }
  }
  return p;
}

namespace {

bool allowed(Hand hand, int prev_finger, int next_finger) {
  return hand == Hand::Right ? next_finger > prev_finger : next_finger < prev_finger;
}

}  // namespace

DecodedPath viterbi_decode(const HmmParams& params, const std::vector<int>& pitches, Hand hand,
                           const std::vector<bool>& same_slice) {
  const std::size_t n = pitches.size();
  if (n == 0) throw DataError("cannot decode an empty pitch sequence");
  if (!same_slice.empty() && same_slice.size() != n) throw DataError("chord mask length mismatch");
  const auto& hp = params.hand(hand);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<std::array<double, 5>> delta(n);
  std::vector<std::array<int, 5>> back(n);
  for (std::size_t f = 0; f < 5; ++f) delta[0][f] = std::log(hp.initial[f]);

  for (std::size_t t = 1; t < n; ++t) {
    const int b = bucket_of(pitches[t] - pitches[t - 1]);
    const bool chord = !same_slice.empty() && same_slice[t];
    for (int g = 0; g < 5; ++g) {
      double best = kNegInf;
      int arg = 0;
      for (int f = 0; f < 5; ++f) {
        if (chord && !allowed(hand, f + 1, g + 1)) continue;
        if (delta[t - 1][static_cast<std::size_t>(f)] == kNegInf) continue;
        const double v = delta[t - 1][static_cast<std::size_t>(f)] +
                         std::log(hp.trans[static_cast<std::size_t>(f)][static_cast<std::size_t>(g)][static_cast<std::size_t>(b)]);
        if (v > best) {
          best = v;
          arg = f;
        }
      }
      delta[t][static_cast<std::size_t>(g)] = best;
      back[t][static_cast<std::size_t>(g)] = arg;
    }
  }

  int last = 0;
  for (int f = 1; f < 5; ++f)
    if (delta[n - 1][static_cast<std::size_t>(f)] > delta[n - 1][static_cast<std::size_t>(last)]) last = f;
  if (delta[n - 1][static_cast<std::size_t>(last)] == kNegInf)
    throw ConstraintError("no finger path satisfies the chord constraints");

  DecodedPath out;
  out.fingers.assign(n, 0);
  out.fingers[n - 1] = last + 1;
  for (std::size_t t = n - 1; t > 0; --t)
    out.fingers[t - 1] = back[t][static_cast<std::size_t>(out.fingers[t] - 1)] + 1;

  out.probs.resize(n);
  out.probs[0] = hp.initial[static_cast<std::size_t>(out.fingers[0] - 1)];
  for (std::size_t t = 1; t < n; ++t) out.probs[t] = hp.p(out.fingers[t - 1], out.fingers[t], pitches[t] - pitches[t - 1]);
  out.log_likelihood = delta[n - 1][static_cast<std::size_t>(last)];
  return out;
}

double path_log_likelihood(const HmmParams& params, const std::vector<int>& pitches, Hand hand,
                           const std::vector<int>& fingers) {
  if (pitches.size() != fingers.size() || pitches.empty()) throw DataError("path and pitches must align");
  const auto& hp = params.hand(hand);
  double ll = std::log(hp.initial[static_cast<std::size_t>(fingers[0] - 1)]);
  for (std::size_t t = 1; t < pitches.size(); ++t) ll += std::log(hp.p(fingers[t - 1], fingers[t], pitches[t] - pitches[t - 1]));
  return ll;
}

FingeringAssignment assign_fingers_hmm(const score::Score& score, const HmmParams& params) {
  FingeringAssignment fa;
  fa.engine = Engine::HMM;
  fa.fingers.assign(score.events.size(), 0);
  fa.scalars.assign(score.events.size(), 0.0);
  for (Hand hand : {Hand::Left, Hand::Right}) {
    // events are already in (onset, hand, pitch) order, i.e. (onset, pitch) per hand
    std::vector<std::size_t> idx;
    std::vector<int> pitches;
    std::vector<bool> same;
    std::size_t chord_size = 0;
    for (std::size_t i = 0; i < score.events.size(); ++i) {
      const auto& e = score.events[i];
      if (e.hand != hand) continue;
      const bool in_chord = !idx.empty() && score.events[idx.back()].onset == e.onset;
      chord_size = in_chord ? chord_size + 1 : 1;
      if (chord_size > 5)
        throw ConstraintError("unplayable chord: more than 5 simultaneous notes in one hand at onset " +
                              std::to_string(to_double(e.onset)) + " of '" + score.id + "'");
      idx.push_back(i);
      pitches.push_back(e.pitch);
      same.push_back(in_chord);
    }
    if (idx.empty()) continue;
    const auto path = viterbi_decode(params, pitches, hand, same);
    const int sign = hand == Hand::Right ? 1 : -1;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      fa.fingers[idx[k]] = sign * path.fingers[k];
      fa.scalars[idx[k]] = path.probs[k];
    }
  }
  return fa;
}

int spelled_pitch_to_midi(std::string_view s) {
  if (s.empty()) throw FormatError("empty spelled pitch");
  static constexpr int kSteps[7] = {9, 11, 0, 2, 4, 5, 7};  // A..G
  const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  if (letter < 'A' || letter > 'G') throw FormatError("invalid spelled pitch '" + std::string(s) + "'");
  int semis = kSteps[letter - 'A'];
  std::size_t i = 1;
  while (i < s.size() && (s[i] == '#' || s[i] == 'b' || s[i] == '-')) {
    semis += s[i] == '#' ? 1 : -1;
    ++i;
  }
  if (i == s.size()) throw FormatError("spelled pitch '" + std::string(s) + "' lacks an octave");
  int octave = 0;
  try {
    std::size_t used = 0;
    octave = std::stoi(std::string(s.substr(i)), &used);
    if (used != s.size() - i) throw std::invalid_argument("octave");
  } catch (const std::exception&) {
    throw FormatError("invalid octave in spelled pitch '" + std::string(s) + "'");
  }
  return (octave + 1) * 12 + semis;
}

PigFile parse_pig(std::string_view text) {
  struct Note {
    double onset;
    int pitch;
    int finger;
  };
  std::vector<Note> right, left;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  PigFile out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("//", 0) == 0) continue;
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string c; fields >> c;) cols.push_back(c);
    if (cols.size() < 8) throw FormatError("PIG line " + std::to_string(line_no) + ": expected 8 fields");
    Note n{};
    try {
      n.onset = std::stod(cols[1]);
      n.pitch = spelled_pitch_to_midi(cols[3]);
      n.finger = std::stoi(cols[7].substr(0, cols[7].find('_')));
    } catch (const FormatError& e) {
      throw FormatError("PIG line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception&) {
      throw FormatError("PIG line " + std::to_string(line_no) + ": malformed field");
    }
    if (n.finger == 0 || std::abs(n.finger) > 5)
      throw FormatError("PIG line " + std::to_string(line_no) + ": finger must be in +-1..5");
    (n.finger > 0 ? right : left).push_back(n);
    ++out.notes;
  }
  for (auto* v : {&right, &left}) {
    if (v->empty()) continue;
    std::stable_sort(v->begin(), v->end(), [](const Note& a, const Note& b) {
      return std::tie(a.onset, a.pitch) < std::tie(b.onset, b.pitch);
    });
    FingeredSequence seq;
    seq.hand = v == &right ? Hand::Right : Hand::Left;
    for (const auto& n : *v) {
      seq.pitches.push_back(n.pitch);
      seq.fingers.push_back(std::abs(n.finger));
    }
    out.sequences.push_back(std::move(seq));
  }
  return out;
}

}  // namespace pdiff::fingering::hmm
