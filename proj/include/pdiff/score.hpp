// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pdiff::score {

struct NoteEvent {
  int pitch = 60;
  Rational onset{0};
  Rational duration{1};
  Hand hand = Hand::Right;
  int voice = 1;
  int measure_index = 1;

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

/// Canonical event order: onset, then hand (left first), then pitch.
bool event_less(const NoteEvent& a, const NoteEvent& b);

struct Score {
  std::string id;
  double tempo_bpm = 120.0;
  int divisions = 1;
  int bars = 0;
  std::vector<NoteEvent> events;

  /// Sorts events canonically and checks the type invariants.
  void normalize();
  void validate() const;
};

struct OnsetSlice {
  int index = 0;  // 0-based here; row index into feature matrices
  Rational onset{0};
  std::vector<NoteEvent> notes;
};

/// Partitions events by exact onset. Throws DataError on an empty score.
std::vector<OnsetSlice> onset_slices(const Score& score);

/// Number of distinct onsets.
int onset_count(const Score& score);

// --- labels ---------------------------------------------------------------

struct DifficultyLabel {
  int class3 = 1;
  int bartok_index = 1;
  std::optional<int> henle_grade;

  friend bool operator==(const DifficultyLabel&, const DifficultyLabel&) = default;
};

/// Volume grouping: 1-66 beginner, 67-121 moderate, 122-153 professional.
int class_for_bartok_index(int bartok_index);
DifficultyLabel make_label(int bartok_index, std::optional<int> henle_grade);

// --- MusicXML -------------------------------------------------------------

struct ParseOptions {
  int right_hand_staff = 1;  // the other staff is the left hand
  std::string id;
};

struct ParseResult {
  Score score;
  std::vector<std::string> warnings;
};

/// Parses an uncompressed partwise MusicXML document.
ParseResult parse_musicxml(std::string_view xml_text, const ParseOptions& opts = {});
/// Reads and parses a file; `.mxl` archives are rejected.
ParseResult parse_musicxml_file(const std::filesystem::path& path, ParseOptions opts = {});

// --- manifest -------------------------------------------------------------

struct LabeledScore {
  Score score;
  DifficultyLabel label;
};

struct ManifestProblem {
  int line = 0;
  std::string file;
  std::string message;
};

struct Manifest {
  std::vector<LabeledScore> entries;
  std::vector<ManifestProblem> problems;  // missing or unparseable files
};

/// CSV header `file,bartok_index,henle_grade`. Label and duplicate errors
/// throw; per-file problems are collected.
Manifest load_manifest(std::string_view csv_text, const std::filesystem::path& root);

// --- internal JSON --------------------------------------------------------

nlohmann::ordered_json score_to_json(const Score& score);
Score score_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json label_to_json(const DifficultyLabel& label);
DifficultyLabel label_from_json(const nlohmann::ordered_json& j);

// --- synthetic corpus -----------------------------------------------------

struct SyntheticInfo {
  int onset_count = 0;  // ground-truth distinct onsets
};

struct SyntheticScore {
  Score score;
  DifficultyLabel label;
  SyntheticInfo info;
};

SyntheticScore generate_synthetic_score(std::uint64_t seed, int class3);

/// `per_class` scores for each class, seeds derived from `seed`.
std::vector<LabeledScore> generate_synthetic_corpus(std::uint64_t seed, int per_class);

}  // namespace pdiff::score
