// SPDX-License-Identifier: Apache-2.0
#include "pdiff/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pdiff::report {

std::vector<Probs> aggregate_onset_probs(std::span<const Probs> window_probs, int onsets, int w, int s) {
  const int n = features::window_count(onsets, w, s);
  if (static_cast<int>(window_probs.size()) != n)
    throw ShapeError("expected " + std::to_string(n) + " window predictions for " + std::to_string(onsets) +
                     " onsets, got " + std::to_string(window_probs.size()));
  std::vector<Probs> sum(static_cast<std::size_t>(onsets), Probs{});
  std::vector<int> count(static_cast<std::size_t>(onsets), 0);
  for (int k = 0; k < n; ++k) {
    const int end = k == n - 1 ? onsets : std::min(onsets, k * s + w);
    for (int i = k * s; i < end; ++i) {
      for (std::size_t c = 0; c < 3; ++c) sum[static_cast<std::size_t>(i)][c] += window_probs[static_cast<std::size_t>(k)][c];
      ++count[static_cast<std::size_t>(i)];
    }
  }
  for (int i = 0; i < onsets; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (count[ui] == 0) throw InternalError("onset " + std::to_string(i) + " is not covered by any window");
    for (double& x : sum[ui]) x /= count[ui];
  }
  return sum;
}

std::vector<double> attention_feedback(std::span<const double> attention) {
  if (attention.empty()) throw DataError("empty attention trace");
  double m = 0;
  for (double a : attention) {
    if (!(a >= 0) || !std::isfinite(a)) throw DataError("attention weights must be finite and nonnegative");
    m = std::max(m, a);
  }
  if (m <= 0) throw InternalError("attention trace is all zero");
  std::vector<double> out;
  out.reserve(attention.size());
  for (double a : attention) out.push_back(a / m);
  return out;
}

int display_class(const Probs& p) { return metrics::argmax_class(p); }

const char* class_color(int class3) {
  switch (class3) {
    case 1: return "#2ca02c";
    case 2: return "#f2c80f";
    case 3: return "#d62728";
  }
  throw RangeError("class must be 1, 2 or 3");
}

// --- annotation -------------------------------------------------------------------

void FeedbackAnnotation::validate() const {
  double att_sum = 0;
  std::size_t att_n = 0;
  for (std::size_t i = 0; i < onsets.size(); ++i) {
    const auto& o = onsets[i];
    if (o.probs) {
      double s = 0;
      for (double x : *o.probs) {
        if (!(x >= 0) || !std::isfinite(x)) throw DataError("onset " + std::to_string(i) + ": invalid probability");
        s += x;
      }
      if (std::abs(s - 1) > 1e-6) throw DataError("onset " + std::to_string(i) + ": probabilities do not sum to 1");
    }
    if (o.attention) {
      if (!(*o.attention >= 0) || !std::isfinite(*o.attention))
        throw DataError("onset " + std::to_string(i) + ": invalid attention weight");
      att_sum += *o.attention;
      ++att_n;
    }
  }
  if (att_n && att_n != onsets.size()) throw DataError("attention must be given for every onset or none");
  if (att_n && std::abs(att_sum - 1) > 1e-6) throw DataError("attention weights do not sum to 1");
}

nlohmann::ordered_json FeedbackAnnotation::to_json() const {
  nlohmann::ordered_json j;
  j["score_id"] = score_id;
  j["colormap"] = {{"1", "green"}, {"2", "yellow"}, {"3", "red"}};
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < onsets.size(); ++i) {
    nlohmann::ordered_json o;
    o["i"] = i;
    if (onsets[i].probs) o["probs"] = *onsets[i].probs;
    if (onsets[i].attention) o["attention"] = *onsets[i].attention;
    arr.push_back(std::move(o));
  }
  j["onsets"] = std::move(arr);
  return j;
}

FeedbackAnnotation FeedbackAnnotation::from_json(const nlohmann::ordered_json& j) {
  FeedbackAnnotation a;
  try {
    a.score_id = j.at("score_id").get<std::string>();
    for (const auto& o : j.at("onsets")) {
      const auto i = o.at("i").get<std::size_t>();
      if (i != a.onsets.size()) throw FormatError("annotation onsets out of order at onset " + std::to_string(i));
      OnsetFeedback f;
      if (o.contains("probs")) f.probs = o.at("probs").get<Probs>();
      if (o.contains("attention")) f.attention = o.at("attention").get<double>();
      a.onsets.push_back(f);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("annotation: ") + e.what());
  }
  a.validate();
  return a;
}

// --- rendering ----------------------------------------------------------------------

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double x, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string pitch_name(int pitch) {
  static const char* names[] = {"C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};
  return std::string(names[pitch % 12]) + std::to_string(pitch / 12 - 1);
}

constexpr int kCell = 14, kRow = 6, kMargin = 30;
constexpr const char* kNeutral = "#4a4a4a";

}  // namespace

std::string render_report(const score::Score& score, const FeedbackAnnotation& annotation) {
  annotation.validate();
  const auto slices = score::onset_slices(score);
  if (annotation.onsets.size() != slices.size()) {
    const std::size_t first = std::min(annotation.onsets.size(), slices.size());
    throw DataError("annotation for '" + annotation.score_id + "' has " + std::to_string(annotation.onsets.size()) +
                    " onsets but the score has " + std::to_string(slices.size()) + "; first unmatched onset is " +
                    std::to_string(first));
  }
  int lo = kHighestPitch, hi = kLowestPitch;
  for (const auto& e : score.events) lo = std::min(lo, e.pitch), hi = std::max(hi, e.pitch);
  const bool has_attention = !annotation.onsets.empty() && annotation.onsets[0].attention.has_value();
  std::vector<double> intensity;
  if (has_attention) {
    std::vector<double> a;
    for (const auto& o : annotation.onsets) a.push_back(*o.attention);
    intensity = attention_feedback(a);
  }
  const int width = 2 * kMargin + static_cast<int>(slices.size()) * kCell;
  const int height = 2 * kMargin + (hi - lo + 1) * kRow;

  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>" << escape(score.id)
    << " difficulty feedback</title>\n<style>\nbody{font-family:sans-serif;margin:1.5em}\n"
       ".legend span{display:inline-block;margin-right:1.2em}\n"
       ".swatch{display:inline-block;width:1em;height:1em;vertical-align:middle;margin-right:.3em}\n"
       "rect.note{stroke:#222;stroke-width:.4}\n</style>\n</head>\n<body>\n<h1>"
    << escape(score.id) << "</h1>\n<div class=\"legend\">";
  for (int c = 1; c <= 3; ++c)
    h << "<span><i class=\"swatch\" style=\"background:" << class_color(c) << "\"></i>level " << c << "</span>";
  if (has_attention) h << "<span>opacity: attention weight (darker = more attention)</span>";
  h << "</div>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  h << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#fafafa\"/>\n";
  for (int p = lo; p <= hi; ++p)
    if (p % 12 == 0)
      h << "<text x=\"2\" y=\"" << kMargin + (hi - p) * kRow + kRow << "\" font-size=\"9\">" << pitch_name(p)
        << "</text>\n";
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const auto& fb = annotation.onsets[i];
    const char* color = fb.probs ? class_color(display_class(*fb.probs)) : kNeutral;
    const double opacity = has_attention ? 0.15 + 0.85 * intensity[i] : 1.0;
    std::string tip = "onset " + std::to_string(i);
    if (fb.probs)
      tip += " p=(" + num((*fb.probs)[0]) + ", " + num((*fb.probs)[1]) + ", " + num((*fb.probs)[2]) + ")";
    if (fb.attention) tip += " attention=" + num(*fb.attention, 4) + " intensity=" + num(intensity[i]);
    for (const auto& note : slices[i].notes) {
      h << "<rect class=\"note\" data-onset=\"" << i << "\" x=\"" << kMargin + static_cast<int>(i) * kCell + 1
        << "\" y=\"" << kMargin + (hi - note.pitch) * kRow << "\" width=\"" << kCell - 2 << "\" height=\"" << kRow
        << "\" fill=\"" << color << "\" fill-opacity=\"" << num(opacity) << "\"><title>"
        << escape(tip + " " + pitch_name(note.pitch) + (note.hand == Hand::Left ? " LH" : " RH")) << "</title></rect>\n";
    }
  }
  h << "</svg>\n</body>\n</html>\n";
  return h.str();
}

}  // namespace pdiff::report
