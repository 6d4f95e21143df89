// SPDX-License-Identifier: Apache-2.0
#include "pdiff/score.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace pdiff::score {
namespace {

namespace pt = boost::property_tree;

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<std::string> attr(const pt::ptree& node, const std::string& name) {
  if (auto a = node.get_child_optional("<xmlattr>." + name)) return trimmed(a->data());
  return std::nullopt;
}

long parse_long(const std::string& text, const std::string& what, int measure) {
  try {
    std::size_t used = 0;
    const std::string t = trimmed(text);
    const long v = std::stol(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw FormatError("measure " + std::to_string(measure) + ": invalid " + what + " '" + text + "'");
  }
}

double leading_number(const std::string& text) {
  // Metronome marks may read "ca. 120"; take the first numeric run.
  std::size_t i = 0;
  while (i < text.size() && !std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  if (i == text.size()) return 0.0;
  return std::stod(text.substr(i));
}

double beat_unit_quarters(const std::string& unit) {
  static const std::map<std::string, double> table = {
      {"breve", 8.0}, {"whole", 4.0}, {"half", 2.0}, {"quarter", 1.0},
      {"eighth", 0.5}, {"16th", 0.25}, {"32nd", 0.125}};
  auto it = table.find(unit);
  return it == table.end() ? 1.0 : it->second;
}

std::optional<double> tempo_from_direction(const pt::ptree& direction) {
  for (const auto& [name, child] : direction) {
    if (name == "sound") {
      if (auto t = attr(child, "tempo")) {
        const double v = std::stod(*t);
        if (v > 0) return v;
      }
    } else if (name == "direction-type") {
      if (auto metro = child.get_child_optional("metronome")) {
        const auto unit = metro->get<std::string>("beat-unit", "quarter");
        const auto per_minute = metro->get_optional<std::string>("per-minute");
        if (!per_minute) continue;
        double q = beat_unit_quarters(trimmed(unit));
        if (metro->get_child_optional("beat-unit-dot")) q *= 1.5;
        const double v = leading_number(*per_minute) * q;
        if (v > 0) return v;
      }
    }
  }
  // <sound> may also appear after the direction-type children
  if (auto s = direction.get_child_optional("sound"))
    if (auto t = attr(*s, "tempo")) {
      const double v = std::stod(*t);
      if (v > 0) return v;
    }
  return std::nullopt;
}

int step_semitone(char step) {
  switch (step) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return 5;
    case 'G': return 7;
    case 'A': return 9;
    case 'B': return 11;
    default: return -1;
  }
}

}  // namespace

ParseResult parse_musicxml(std::string_view xml_text, const ParseOptions& opts) {
  pt::ptree tree;
  {
    std::istringstream in{std::string(xml_text)};
    try {
      pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
      throw ParseError("malformed XML at line " + std::to_string(e.line()) + ": " + e.message());
    }
  }
  auto root = tree.get_child_optional("score-partwise");
  if (!root) {
    if (tree.get_child_optional("score-timewise"))
      throw FormatError("timewise MusicXML is not supported; convert to partwise");
    throw FormatError("document has no <score-partwise> root");
  }

  ParseResult result;
  Score& score = result.score;
  score.id = opts.id;
  std::optional<double> tempo;
  int divisions = 0;
  int part_index = 0;
  bool any_part = false;

  for (const auto& [pname, part] : *root) {
    if (pname != "part") continue;
    any_part = true;
    Rational cursor{0};
    Rational last_onset{0};
    int measure_index = 0;
    // open ties keyed by (hand, pitch) -> event index
    std::map<std::pair<int, int>, std::size_t> open_ties;

    for (const auto& [mname, measure] : part) {
      if (mname != "measure") continue;
      ++measure_index;
      Rational furthest = cursor;

      for (const auto& [ename, el] : measure) {
        if (ename == "attributes") {
          if (auto d = el.get_optional<std::string>("divisions")) {
            divisions = static_cast<int>(parse_long(*d, "divisions", measure_index));
            if (divisions <= 0) throw FormatError("measure " + std::to_string(measure_index) + ": divisions must be positive");
            score.divisions = std::max(score.divisions, divisions);
          }
        } else if (ename == "direction") {
          if (!tempo) tempo = tempo_from_direction(el);
        } else if (ename == "sound") {
          if (!tempo)
            if (auto t = attr(el, "tempo")) tempo = std::stod(*t);
        } else if (ename == "backup" || ename == "forward") {
          if (divisions == 0) throw FormatError("missing <divisions> before measure " + std::to_string(measure_index) + " content");
          const Rational d(parse_long(el.get<std::string>("duration", ""), "duration", measure_index), divisions);
          cursor += ename == "forward" ? d : -d;
          if (cursor < Rational(0)) cursor = 0;
          furthest = std::max(furthest, cursor);
        } else if (ename == "note") {
          if (el.get_child_optional("grace")) {
            result.warnings.push_back("measure " + std::to_string(measure_index) + ": grace note dropped");
            continue;
          }
          if (divisions == 0) throw FormatError("missing <divisions> before the first note (measure " + std::to_string(measure_index) + ")");
          const bool chord = el.get_child_optional("chord").has_value();
          const auto dur_text = el.get_optional<std::string>("duration");
          if (!dur_text) throw FormatError("measure " + std::to_string(measure_index) + ": note without <duration>");
          const Rational dur(parse_long(*dur_text, "duration", measure_index), divisions);
          const Rational onset = chord ? last_onset : cursor;
          if (!chord) {
            last_onset = cursor;
            cursor += dur;
            furthest = std::max(furthest, cursor);
          }
          auto pitch_node = el.get_child_optional("pitch");
          if (!pitch_node) continue;  // rest or unpitched
          if (dur <= Rational(0)) throw FormatError("measure " + std::to_string(measure_index) + ": nonpositive note duration");

          const auto step_text = trimmed(pitch_node->get<std::string>("step", ""));
          const int step = step_text.size() == 1 ? step_semitone(step_text[0]) : -1;
          if (step < 0) throw FormatError("measure " + std::to_string(measure_index) + ": invalid pitch step '" + step_text + "'");
          const int octave = static_cast<int>(parse_long(pitch_node->get<std::string>("octave", ""), "octave", measure_index));
          double alter = 0.0;
          if (auto a = pitch_node->get_optional<std::string>("alter")) alter = std::stod(*a);
          const int midi = (octave + 1) * 12 + step + static_cast<int>(std::lround(alter));
          if (midi < kLowestPitch || midi > kHighestPitch)
            throw RangeError("pitch " + std::to_string(midi) + " outside the 88-key range in measure " + std::to_string(measure_index));

          int staff = part_index == 0 ? opts.right_hand_staff : (opts.right_hand_staff == 1 ? 2 : 1);
          if (auto s = el.get_optional<std::string>("staff")) staff = static_cast<int>(parse_long(*s, "staff", measure_index));
          const Hand hand = staff == opts.right_hand_staff ? Hand::Right : Hand::Left;
          int voice = 1;
          if (auto v = el.get_optional<std::string>("voice")) {
            try { voice = std::stoi(trimmed(*v)); } catch (const std::exception&) { voice = 1; }
          }

          bool tie_start = false, tie_stop = false;
          for (const auto& [tname, tnode] : el) {
            if (tname != "tie") continue;
            const auto type = attr(tnode, "type").value_or("");
            tie_start |= type == "start";
            tie_stop |= type == "stop";
          }
          const auto key = std::make_pair(static_cast<int>(hand), midi);
          if (tie_stop) {
            if (auto it = open_ties.find(key); it != open_ties.end()) {
              score.events[it->second].duration += dur;
              if (!tie_start) open_ties.erase(it);
              continue;
            }
          }
          NoteEvent ev;
          ev.pitch = midi;
          ev.onset = onset;
          ev.duration = dur;
          ev.hand = hand;
          ev.voice = voice;
          ev.measure_index = measure_index;
          score.events.push_back(ev);
          if (tie_start) open_ties[key] = score.events.size() - 1;
        }
      }
      cursor = furthest;
    }
    score.bars = std::max(score.bars, measure_index);
    ++part_index;
  }
  if (!any_part) throw FormatError("document has no <part> element");
  if (score.divisions <= 0) throw FormatError("document never declares <divisions>");
  score.tempo_bpm = tempo.value_or(120.0);
  score.normalize();
  score.validate();
  return result;
}

ParseResult parse_musicxml_file(const std::filesystem::path& path, ParseOptions opts) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".mxl")
    throw FormatError(path.string() + ": compressed .mxl is not supported; extract the .musicxml first");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (opts.id.empty()) opts.id = path.stem().string();
  try {
    return parse_musicxml(buf.str(), opts);
  } catch (const Error& e) {
    // keep the category, add the file name
    if (dynamic_cast<const ParseError*>(&e)) throw ParseError(path.string() + ": " + e.what());
    if (dynamic_cast<const RangeError*>(&e)) throw RangeError(path.string() + ": " + e.what());
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace pdiff::score
