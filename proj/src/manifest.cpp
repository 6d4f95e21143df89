// SPDX-License-Identifier: Apache-2.0
#include "pdiff/score.hpp"

#include <set>
#include <sstream>

namespace pdiff::score {
namespace {

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  s.erase(0, b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(strip(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(strip(cur));
  return out;
}

}  // namespace

Manifest load_manifest(std::string_view csv_text, const std::filesystem::path& root) {
  std::istringstream in{std::string(csv_text)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::set<int> seen;
  Manifest out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (strip(line).empty()) continue;
    auto cols = split_csv_line(line);
    if (!header_seen) {
      if (cols.size() < 3 || cols[0] != "file" || cols[1] != "bartok_index" || cols[2] != "henle_grade")
        throw ManifestError("manifest header must be 'file,bartok_index,henle_grade'");
      header_seen = true;
      continue;
    }
    if (cols.size() < 2)
      throw ManifestError("manifest line " + std::to_string(line_no) + ": expected 3 columns");
    int bartok = 0;
    try {
      bartok = std::stoi(cols[1]);
    } catch (const std::exception&) {
      throw LabelError("manifest line " + std::to_string(line_no) + ": invalid bartok_index '" + cols[1] + "'");
    }
    std::optional<int> henle;
    if (cols.size() >= 3 && !cols[2].empty()) {
      try {
        henle = std::stoi(cols[2]);
      } catch (const std::exception&) {
        throw LabelError("manifest line " + std::to_string(line_no) + ": invalid henle_grade '" + cols[2] + "'");
      }
    }
    DifficultyLabel label;
    try {
      label = make_label(bartok, henle);
    } catch (const LabelError& e) {
      throw LabelError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(bartok).second)
      throw ManifestError("manifest line " + std::to_string(line_no) + ": duplicate bartok_index " + std::to_string(bartok));

    const auto path = root / cols[0];
    if (!std::filesystem::exists(path)) {
      out.problems.push_back({line_no, cols[0], "file not found"});
      continue;
    }
    try {
      ParseOptions opts;
      opts.id = cols[0];
      auto parsed = parse_musicxml_file(path, opts);
      out.entries.push_back({std::move(parsed.score), label});
    } catch (const Error& e) {
      out.problems.push_back({line_no, cols[0], e.what()});
    }
  }
  if (!header_seen) throw ManifestError("manifest is empty");
  return out;
}

}  // namespace pdiff::score
