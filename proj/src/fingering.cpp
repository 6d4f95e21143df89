// SPDX-License-Identifier: Apache-2.0
#include "pdiff/fingering.hpp"
#include "pdiff/fingering_dp.hpp"

#include <iomanip>
#include <set>
#include <sstream>

namespace pdiff::fingering {

std::string engine_name(Engine e) { return e == Engine::DP ? "dp" : "hmm"; }

Engine engine_from_name(const std::string& name) {
  if (name == "dp") return Engine::DP;
  if (name == "hmm") return Engine::HMM;
  throw UsageError("unknown fingering engine '" + name + "' (expected dp or hmm)");
}

double feature_value(Engine engine, double scalar) {
  return engine == Engine::DP ? dp::pv_scalar(scalar) : scalar;
}

void check_assignment(const score::Score& score, const FingeringAssignment& fa) {
  if (fa.fingers.size() != score.events.size() || fa.scalars.size() != score.events.size())
    throw ConstraintError("fingering for '" + score.id + "' is not aligned with its events");
  std::size_t i = 0;
  const auto& ev = score.events;
  while (i < ev.size()) {
    std::size_t j = i;
    while (j < ev.size() && ev[j].onset == ev[i].onset) ++j;
    for (Hand hand : {Hand::Left, Hand::Right}) {
      int prev_pitch = -1, prev_finger = 0;
      std::set<int> used;
      for (std::size_t k = i; k < j; ++k) {
        if (ev[k].hand != hand) continue;
        const int f = fa.fingers[k];
        const int mag = std::abs(f);
        const bool sign_ok = hand == Hand::Right ? f > 0 : f < 0;
        if (mag < 1 || mag > 5 || !sign_ok)
          throw ConstraintError("onset " + std::to_string(to_double(ev[i].onset)) + ": invalid finger " + std::to_string(f));
        if (!used.insert(mag).second)
          throw ConstraintError("onset " + std::to_string(to_double(ev[i].onset)) + ": finger " +
                                std::to_string(f) + " used twice in one hand");
        // events are pitch-ascending within a hand; finger numbers must follow
        // on the right hand and mirror on the left
        if (prev_pitch >= 0) {
          const bool monotone = hand == Hand::Right ? mag > prev_finger : mag < prev_finger;
          if (!monotone)
            throw ConstraintError("onset " + std::to_string(to_double(ev[i].onset)) + ": fingers not pitch-monotone");
        }
        prev_pitch = ev[k].pitch;
        prev_finger = mag;
      }
    }
    i = j;
  }
  for (double s : fa.scalars)
    if (!(s >= 0.0)) throw ConstraintError("negative or non-finite fingering scalar in '" + score.id + "'");
}

std::string export_tsv(const score::Score& score, const FingeringAssignment& fa) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < score.events.size(); ++i) {
    const auto& e = score.events[i];
    out << to_double(e.onset) << '\t' << e.pitch << '\t' << hand_code(e.hand) << '\t'
        << fa.fingers[i] << '\t' << fa.scalars[i] << '\n';
  }
  return out.str();
}

nlohmann::ordered_json assignment_to_json(const FingeringAssignment& fa) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["engine"] = engine_name(fa.engine);
  j["fingers"] = fa.fingers;
  j["scalars"] = fa.scalars;
  return j;
}

FingeringAssignment assignment_from_json(const nlohmann::ordered_json& j) {
  try {
    FingeringAssignment fa;
    fa.engine = engine_from_name(j.at("engine").get<std::string>());
    fa.fingers = j.at("fingers").get<std::vector<int>>();
    fa.scalars = j.at("scalars").get<std::vector<double>>();
    return fa;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed fingering JSON: ") + e.what());
  }
}

}  // namespace pdiff::fingering
