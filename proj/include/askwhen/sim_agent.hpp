#pragma once

#include <optional>
#include <string>
#include <vector>

#include "askwhen/trial.hpp"

namespace askwhen {

// Trajectory-commitment model for a synthetic agent. Commitment C(t) is the
// irrecoverable share of the oracle/no-clarification success gap at
// trajectory fraction t; the shape controls how fast that share accrues.
enum class CommitmentShape { concave, linear, constraint_reconcile };

struct CommitmentProfile {
  std::string name;           // variant id prefix, e.g. "goal"
  Dimension dimension = Dimension::goal;
  CommitmentShape shape = CommitmentShape::linear;
  double alpha = 0.35;                // concave exponent, in (0,1)
  double reconciliation_rate = 0.1;   // subtractive cost, constraint_reconcile only
  double p_oracle = 1.0;
  double p_nc = 0.0;
  int trajectory_length = 7;

  // Used when synthesizing a variant corpus from the profile.
  std::string benchmark = "sim";
  AmbiguityClass ambiguity_class = AmbiguityClass::outcome_critical;
  int count = 1;

  json to_json() const;
  static CommitmentProfile from_json(const json& j);
};

// Validates and throws ConfigError on bad anchors/shape parameters.
void validate_profile(const CommitmentProfile& p);

// C(t) for t in [0,1]. concave: t^alpha; linear and constraint_reconcile: t.
double commitment(const CommitmentProfile& p, double t);

// Expected success under a condition. Oracle and NC return the anchors;
// injection at fraction t interpolates the anchor gap by retained value
// 1 - C(t), minus reconciliation_rate * C(t) for constraint_reconcile,
// clamped to [0,1].
double success_probability(const CommitmentProfile& p, const Condition& c);

// One simulator decision. Either a tool call (name + parameters) or the
// terminal finish carrying the answer text.
struct SimAction {
  bool finished = false;
  std::string name;
  json parameters = json::object();
  std::string answer;
};

// Next action for the given conversation state. Deterministic in
// (profile, conversation, step_index, seed): the agent emits
// trajectory_length tool calls then finishes. Until a clarification is
// visible in the conversation (oracle framing in the opening turn, a later
// user turn, or an ask answer), step i is marked divergent via a
// counter-based draw against C(i / trajectory_length); divergent steps get
// an "_divergent" name suffix. After clarification every action is
// oracle-matching.
SimAction sim_act(const CommitmentProfile& p, const std::vector<Turn>& conversation,
                  int step_index, std::uint64_t seed);

// Bernoulli verdict for a completed trial, drawn once per
// (variant_id, condition, seed) from the counter-based generator.
bool grade_sim(const CommitmentProfile& p, const std::string& variant_id,
               const Condition& condition, std::uint64_t seed);

// Synthetic prompts a profile-driven variant uses. The oracle prompt is the
// underspecified one plus the withheld note, so the simulator can recognize
// oracle trials from conversation text alone.
std::string sim_underspecified_prompt(const std::string& variant_id);
std::string sim_oracle_prompt(const std::string& variant_id, const std::string& segment_value);
std::string sim_segment_value(const std::string& variant_id);

// Expands a profile into `count` task variants ("name-0000", "name-0001", ...)
// with sim graders.
std::vector<TaskVariant> synthesize_variants(const CommitmentProfile& p);

struct ProfileSet {
  std::vector<CommitmentProfile> profiles;

  // Profile owning a variant id of the form "<name>-<index>".
  const CommitmentProfile* for_variant(const std::string& variant_id) const;

  static ProfileSet load(const std::string& path);
  static ProfileSet from_json(const json& j);
};

// Four anchored fixture profiles (goal, input, constraint, context) matching
// the shipped simulate-mode defaults.
ProfileSet default_profiles();

}  // namespace askwhen
