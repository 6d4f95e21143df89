// SPDX-License-Identifier: Apache-2.0
#include "pdiff/features.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace pdiff::features {

std::string kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::K: return "K";
    case FeatureKind::PF: return "PF";
    case FeatureKind::PV: return "PV";
    case FeatureKind::NF: return "NF";
    case FeatureKind::NP: return "NP";
  }
  return "?";
}

FeatureKind kind_from_name(const std::string& name) {
  std::string up = name;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  for (auto k : kAllKinds)
    if (kind_name(k) == up) return k;
  throw UsageError("unknown feature kind '" + name + "' (expected K, PF, PV, NF or NP)");
}

int kind_width(FeatureKind k) { return k == FeatureKind::K ? kNumKeys : 2 * kFingersPerHand; }
bool uses_dp(FeatureKind k) { return k == FeatureKind::PF || k == FeatureKind::PV; }
bool uses_hmm(FeatureKind k) { return k == FeatureKind::NF || k == FeatureKind::NP; }

int finger_column(int f) {
  if (f == 0 || std::abs(f) > 5) throw RangeError("finger " + std::to_string(f) + " outside +-1..5");
  return f < 0 ? 5 + f : 4 + f;
}

int key_column(int pitch) {
  if (pitch < kLowestPitch || pitch > kHighestPitch) throw RangeError("pitch outside the piano range");
  return pitch - kLowestPitch;
}

FeatureMatrix build_feature_matrix(const score::Score& score, FeatureKind kind,
                                   const fingering::FingeringAssignment* dp,
                                   const fingering::FingeringAssignment* hmm) {
  const fingering::FingeringAssignment* fa = nullptr;
  if (uses_dp(kind)) {
    if (!dp) throw DataError(kind_name(kind) + " needs a DP fingering");
    fa = dp;
  } else if (uses_hmm(kind)) {
    if (!hmm) throw DataError(kind_name(kind) + " needs an HMM fingering");
    fa = hmm;
  }
  if (fa && (fa->fingers.size() != score.events.size() || fa->scalars.size() != score.events.size()))
    throw ConstraintError("fingering for '" + score.id + "' is not aligned with its events");
  if (score.events.empty()) throw DataError("score '" + score.id + "' is empty");

  FeatureMatrix m;
  m.kind = kind;
  m.rows = score::onset_count(score);
  m.cols = kind_width(kind);
  m.cells.assign(static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols), 0.0);
  const bool binary = kind == FeatureKind::PF || kind == FeatureKind::NF;

  int row = -1;
  std::vector<bool> filled(static_cast<std::size_t>(m.cols));
  for (std::size_t i = 0; i < score.events.size(); ++i) {
    const auto& e = score.events[i];
    if (i == 0 || e.onset != score.events[i - 1].onset) {
      ++row;
      std::fill(filled.begin(), filled.end(), false);
    }
    if (kind == FeatureKind::K) {
      m.at(row, key_column(e.pitch)) = 1.0;
      continue;
    }
    const int col = finger_column(fa->fingers[i]);
    if (filled[static_cast<std::size_t>(col)])
      throw ConstraintError("score '" + score.id + "', onset " + std::to_string(to_double(e.onset)) + ": finger " +
                            std::to_string(fa->fingers[i]) + " assigned to two notes");
    filled[static_cast<std::size_t>(col)] = true;
    const double v = binary ? 1.0 : fingering::feature_value(fa->engine, fa->scalars[i]);
    if (!(v >= 0.0 && v <= 1.0)) throw RangeError("feature value outside [0,1] in '" + score.id + "'");
    m.at(row, col) = v;
  }
  return m;
}

int window_count(int onsets, int w, int s) {
  if (w < 1 || s < 1) throw UsageError("window size and stride must be positive");
  if (onsets < 1) throw DataError("cannot window a score with no onsets");
  if (onsets < w) return 1;
  return (onsets - w) / s + 1;
}

std::vector<WindowSegment> window_segments(const FeatureMatrix& m, int w, int s, const std::string& score_id, int label) {
  const int n = window_count(m.rows, w, s);
  std::vector<WindowSegment> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    WindowSegment seg;
    seg.score_id = score_id;
    seg.start_onset_index = k * s;
    seg.rows = w;
    seg.cols = m.cols;
    seg.label = label;
    seg.cells.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(m.cols), 0.0);
    const int avail = std::min(w, m.rows - seg.start_onset_index);
    std::copy_n(m.cells.begin() + static_cast<std::ptrdiff_t>(seg.start_onset_index) * m.cols,
                static_cast<std::ptrdiff_t>(avail) * m.cols, seg.cells.begin());
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<double> flatten(const WindowSegment& seg) { return seg.cells; }

WindowSegment reshape(std::span<const double> flat, int w, int cols) {
  if (static_cast<std::size_t>(w) * static_cast<std::size_t>(cols) != flat.size())
    throw ShapeError("flat vector length does not match w x cols");
  WindowSegment seg;
  seg.rows = w;
  seg.cols = cols;
  seg.cells.assign(flat.begin(), flat.end());
  return seg;
}

std::vector<int> coverage_counts(int onsets, int w) {
  std::vector<int> cover(static_cast<std::size_t>(onsets), 0);
  const int n = window_count(onsets, w, 1);
  for (int k = 0; k < n; ++k)
    for (int r = k; r < std::min(onsets, k + w); ++r) ++cover[static_cast<std::size_t>(r)];
  return cover;
}

nlohmann::ordered_json matrix_to_json(const FeatureMatrix& m) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["kind"] = kind_name(m.kind);
  j["rows"] = m.rows;
  j["cols"] = m.cols;
  j["cells"] = m.cells;
  return j;
}

FeatureMatrix matrix_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported matrix version");
    FeatureMatrix m;
    m.kind = kind_from_name(j.at("kind").get<std::string>());
    m.rows = j.at("rows").get<int>();
    m.cols = j.at("cols").get<int>();
    m.cells = j.at("cells").get<std::vector<double>>();
    if (m.cols != kind_width(m.kind) || m.cells.size() != static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols))
      throw FormatError("matrix shape does not match its cells");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed matrix JSON: ") + e.what());
  }
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

}  // namespace

std::string matrix_to_binary(const FeatureMatrix& m) {
  std::string out = "PDFM";
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(m.kind));
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  for (double v : m.cells) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

FeatureMatrix matrix_from_binary(std::string_view bytes) {
  if (bytes.size() < 20 || bytes.substr(0, 4) != "PDFM") throw FormatError("not a feature matrix file");
  if (get_u32(bytes, 4) != 1) throw FormatError("unsupported matrix version");
  FeatureMatrix m;
  const auto kind = get_u32(bytes, 8);
  if (kind > static_cast<std::uint32_t>(FeatureKind::NP)) throw FormatError("unknown feature kind in header");
  m.kind = static_cast<FeatureKind>(kind);
  m.rows = static_cast<int>(get_u32(bytes, 12));
  m.cols = static_cast<int>(get_u32(bytes, 16));
  const std::size_t n = static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols);
  if (m.cols != kind_width(m.kind) || bytes.size() != 20 + 4 * n) throw FormatError("matrix file size does not match its header");
  m.cells.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.cells[i] = std::bit_cast<float>(get_u32(bytes, 20 + 4 * i));
  return m;
}

}  // namespace pdiff::features
