// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/score.hpp"

#include <string>
#include <vector>

namespace pdiff::testing {

/// Minimal one-part MusicXML document; `notes` is the inner XML of measure 1.
inline std::string musicxml(const std::string& measure_body, int divisions = 1, const std::string& extra_measures = {}) {
  return R"(<?xml version="1.0" encoding="UTF-8"?>
<!DOCTYPE score-partwise PUBLIC "-//Recordare//DTD MusicXML 3.1 Partwise//EN" "http://www.musicxml.org/dtds/partwise.dtd">
<score-partwise version="3.1">
  <part-list><score-part id="P1"><part-name>Piano</part-name></score-part></part-list>
  <part id="P1">
    <measure number="1">
      <attributes><divisions>)" + std::to_string(divisions) + R"(</divisions><staves>2</staves></attributes>
)" + measure_body + R"(
    </measure>)" + extra_measures + R"(
  </part>
</score-partwise>
)";
}

inline std::string note_xml(char step, int octave, int duration, int staff = 1, bool chord = false, int alter = 0,
                            const std::string& extra = {}) {
  std::string s = "<note>";
  if (chord) s += "<chord/>";
  s += "<pitch><step>" + std::string(1, step) + "</step>";
  if (alter != 0) s += "<alter>" + std::to_string(alter) + "</alter>";
  s += "<octave>" + std::to_string(octave) + "</octave></pitch>";
  s += "<duration>" + std::to_string(duration) + "</duration>" + extra;
  s += "<staff>" + std::to_string(staff) + "</staff></note>\n";
  return s;
}

/// Monophonic right-hand score with one note per quarter.
inline score::Score mono_score(const std::vector<int>& pitches, double tempo = 120.0, Hand hand = Hand::Right) {
  score::Score s;
  s.id = "mono";
  s.tempo_bpm = tempo;
  for (std::size_t i = 0; i < pitches.size(); ++i) {
    score::NoteEvent e;
    e.pitch = pitches[i];
    e.onset = Rational(static_cast<std::int64_t>(i));
    e.hand = hand;
    s.events.push_back(e);
  }
  s.normalize();
  return s;
}

}  // namespace pdiff::testing
