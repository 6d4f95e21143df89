// SPDX-License-Identifier: Apache-2.0
#include "pdiff/score.hpp"

#include <algorithm>
#include <map>

namespace pdiff {

Hand hand_from_code(std::string_view s) {
  if (s == "L" || s == "l" || s == "left" || s == "Left") return Hand::Left;
  if (s == "R" || s == "r" || s == "right" || s == "Right") return Hand::Right;
  throw FormatError("unknown hand code '" + std::string(s) + "'");
}

namespace score {

bool event_less(const NoteEvent& a, const NoteEvent& b) {
  if (a.onset != b.onset) return a.onset < b.onset;
  if (a.hand != b.hand) return a.hand < b.hand;
  return a.pitch < b.pitch;
}

void Score::normalize() {
  std::stable_sort(events.begin(), events.end(), event_less);
  // A key sounds once per onset and hand; unison doublings from two voices collapse.
  std::vector<NoteEvent> unique;
  unique.reserve(events.size());
  for (const auto& e : events) {
    if (!unique.empty()) {
      auto& prev = unique.back();
      if (prev.onset == e.onset && prev.hand == e.hand && prev.pitch == e.pitch) {
        prev.duration = std::max(prev.duration, e.duration);
        continue;
      }
    }
    unique.push_back(e);
  }
  events = std::move(unique);
}

void Score::validate() const {
  if (!(tempo_bpm > 0.0)) throw FormatError("score '" + id + "': tempo must be positive");
  if (divisions <= 0) throw FormatError("score '" + id + "': divisions must be positive");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.pitch < kLowestPitch || e.pitch > kHighestPitch)
      throw RangeError("score '" + id + "': pitch " + std::to_string(e.pitch) +
                       " outside the piano range in measure " + std::to_string(e.measure_index));
    if (e.onset < Rational(0)) throw FormatError("score '" + id + "': negative onset");
    if (e.duration <= Rational(0)) throw FormatError("score '" + id + "': nonpositive duration");
    if (i > 0 && event_less(e, events[i - 1]))
      throw FormatError("score '" + id + "': events are not in canonical order");
  }
}

std::vector<OnsetSlice> onset_slices(const Score& score) {
  if (score.events.empty()) throw DataError("score '" + score.id + "' is empty");
  std::vector<OnsetSlice> slices;
  for (const auto& e : score.events) {
    if (slices.empty() || slices.back().onset != e.onset) {
      OnsetSlice s;
      s.index = static_cast<int>(slices.size());
      s.onset = e.onset;
      slices.push_back(std::move(s));
    }
    slices.back().notes.push_back(e);
  }
  return slices;
}

int onset_count(const Score& score) {
  int n = 0;
  for (std::size_t i = 0; i < score.events.size(); ++i)
    if (i == 0 || score.events[i].onset != score.events[i - 1].onset) ++n;
  return n;
}

int class_for_bartok_index(int b) {
  if (b < 1 || b > 153) throw LabelError("bartok_index " + std::to_string(b) + " outside [1,153]");
  if (b <= 66) return 1;
  if (b <= 121) return 2;
  return 3;
}

DifficultyLabel make_label(int bartok_index, std::optional<int> henle_grade) {
  if (henle_grade && (*henle_grade < 1 || *henle_grade > 9))
    throw LabelError("henle_grade " + std::to_string(*henle_grade) + " outside [1,9]");
  return {class_for_bartok_index(bartok_index), bartok_index, henle_grade};
}

// --- JSON ------------------------------------------------------------------

namespace {

nlohmann::ordered_json rational_json(const Rational& r) {
  return nlohmann::ordered_json::array({r.numerator(), r.denominator()});
}

Rational rational_from(const nlohmann::ordered_json& j) {
  if (!j.is_array() || j.size() != 2) throw FormatError("rational must be [num, den]");
  const auto den = j[1].get<std::int64_t>();
  if (den <= 0) throw FormatError("rational denominator must be positive");
  return {j[0].get<std::int64_t>(), den};
}

}  // namespace

nlohmann::ordered_json score_to_json(const Score& score) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["id"] = score.id;
  j["tempo_bpm"] = score.tempo_bpm;
  j["divisions"] = score.divisions;
  j["bars"] = score.bars;
  auto& ev = j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : score.events) {
    nlohmann::ordered_json o;
    o["pitch"] = e.pitch;
    o["onset"] = rational_json(e.onset);
    o["duration"] = rational_json(e.duration);
    o["hand"] = std::string(1, hand_code(e.hand));
    o["voice"] = e.voice;
    o["measure"] = e.measure_index;
    ev.push_back(std::move(o));
  }
  return j;
}

Score score_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported score version");
    Score s;
    s.id = j.at("id").get<std::string>();
    s.tempo_bpm = j.at("tempo_bpm").get<double>();
    s.divisions = j.at("divisions").get<int>();
    s.bars = j.value("bars", 0);
    for (const auto& o : j.at("events")) {
      NoteEvent e;
      e.pitch = o.at("pitch").get<int>();
      e.onset = rational_from(o.at("onset"));
      e.duration = rational_from(o.at("duration"));
      e.hand = hand_from_code(o.at("hand").get<std::string>());
      e.voice = o.value("voice", 1);
      e.measure_index = o.value("measure", 1);
      s.events.push_back(e);
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed score JSON: ") + e.what());
  }
}

nlohmann::ordered_json label_to_json(const DifficultyLabel& label) {
  nlohmann::ordered_json j;
  j["class3"] = label.class3;
  j["bartok_index"] = label.bartok_index;
  j["henle_grade"] = label.henle_grade ? nlohmann::ordered_json(*label.henle_grade)
                                       : nlohmann::ordered_json(nullptr);
  return j;
}

DifficultyLabel label_from_json(const nlohmann::ordered_json& j) {
  std::optional<int> henle;
  if (j.contains("henle_grade") && !j.at("henle_grade").is_null())
    henle = j.at("henle_grade").get<int>();
  auto label = make_label(j.at("bartok_index").get<int>(), henle);
  if (j.contains("class3") && j.at("class3").get<int>() != label.class3)
    throw LabelError("class3 inconsistent with bartok_index " + std::to_string(label.bartok_index));
  return label;
}

}  // namespace score
}  // namespace pdiff
