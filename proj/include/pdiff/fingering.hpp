// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "pdiff/score.hpp"

#include <string>
#include <vector>

namespace pdiff::fingering {

enum class Engine { DP, HMM };

std::string engine_name(Engine e);
Engine engine_from_name(const std::string& name);

/// One finger and one scalar per score event, aligned with `Score::events`.
/// Fingers are signed: right hand +1..+5, left hand -1..-5. The scalar is
/// the raw velocity cost (DP) or the transition probability (HMM).
struct FingeringAssignment {
  Engine engine = Engine::DP;
  std::vector<int> fingers;
  std::vector<double> scalars;
};

/// The value the feature matrices store for a note: the bounded velocity
/// for DP assignments, the probability itself for HMM assignments.
double feature_value(Engine engine, double scalar);

/// Checks alignment and the per-slice chord rules (distinct, pitch-monotone
/// fingers per hand). Throws ConstraintError naming the offending onset.
void check_assignment(const score::Score& score, const FingeringAssignment& fa);

/// Tab-separated `onset_quarters pitch hand finger scalar`, one line per note.
std::string export_tsv(const score::Score& score, const FingeringAssignment& fa);

nlohmann::ordered_json assignment_to_json(const FingeringAssignment& fa);
FingeringAssignment assignment_from_json(const nlohmann::ordered_json& j);

}  // namespace pdiff::fingering
