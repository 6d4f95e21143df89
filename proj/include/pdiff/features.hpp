// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/fingering.hpp"
#include "pdiff/score.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdiff::features {

enum class FeatureKind { K, PF, PV, NF, NP };

inline constexpr std::array<FeatureKind, 5> kAllKinds = {FeatureKind::K, FeatureKind::NF, FeatureKind::PF,
                                                         FeatureKind::NP, FeatureKind::PV};

std::string kind_name(FeatureKind k);
FeatureKind kind_from_name(const std::string& name);
int kind_width(FeatureKind k);  // 88 for K, 10 otherwise
bool uses_dp(FeatureKind k);
bool uses_hmm(FeatureKind k);

/// Finger columns: left 5..1 -> 0..4, right 1..5 -> 5..9.
int finger_column(int signed_finger);
/// Key columns: MIDI 21..108 -> 0..87.
int key_column(int pitch);

/// Onset-indexed feature matrix, row-major.
struct FeatureMatrix {
  FeatureKind kind = FeatureKind::K;
  int rows = 0;
  int cols = 0;
  std::vector<double> cells;

  double at(int r, int c) const { return cells[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
  double& at(int r, int c) { return cells[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
  std::span<const double> row(int r) const {
    return {cells.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols), static_cast<std::size_t>(cols)};
  }
};

/// Builds one representation. `dp` is required for PF/PV, `hmm` for NF/NP.
FeatureMatrix build_feature_matrix(const score::Score& score, FeatureKind kind,
                                   const fingering::FingeringAssignment* dp = nullptr,
                                   const fingering::FingeringAssignment* hmm = nullptr);

struct WindowSegment {
  std::string score_id;
  int start_onset_index = 0;  // 0-based
  int rows = 0;
  int cols = 0;
  std::vector<double> cells;  // rows x cols, zero-padded past the end of the piece
  int label = 0;              // class3 inherited from the score
};

int window_count(int onsets, int w, int s);

std::vector<WindowSegment> window_segments(const FeatureMatrix& m, int w, int s,
                                           const std::string& score_id = {}, int label = 0);

/// Row-major w x cols vector.
std::vector<double> flatten(const WindowSegment& seg);
WindowSegment reshape(std::span<const double> flat, int w, int cols);

/// Number of windows (stride 1) covering each onset.
std::vector<int> coverage_counts(int onsets, int w);

// --- export ---------------------------------------------------------------

nlohmann::ordered_json matrix_to_json(const FeatureMatrix& m);
FeatureMatrix matrix_from_json(const nlohmann::ordered_json& j);

/// "PDFM" magic, u32 version, u32 kind, u32 rows, u32 cols, then rows*cols
/// little-endian IEEE-754 binary32 cells.
std::string matrix_to_binary(const FeatureMatrix& m);
FeatureMatrix matrix_from_binary(std::string_view bytes);

}  // namespace pdiff::features
