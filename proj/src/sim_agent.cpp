#include "askwhen/sim_agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "askwhen/counter_rng.hpp"
#include "askwhen/errors.hpp"

namespace askwhen {

namespace {

std::string shape_to_string(CommitmentShape s) {
  switch (s) {
    case CommitmentShape::concave: return "concave";
    case CommitmentShape::linear: return "linear";
    case CommitmentShape::constraint_reconcile: return "constraint_reconcile";
  }
  throw std::logic_error("bad CommitmentShape");
}

CommitmentShape shape_from_string(const std::string& s) {
  if (s == "concave") return CommitmentShape::concave;
  if (s == "linear") return CommitmentShape::linear;
  if (s == "constraint_reconcile") return CommitmentShape::constraint_reconcile;
  throw ConfigError("unknown commitment shape: " + s);
}

}  // namespace

json CommitmentProfile::to_json() const {
  json j{{"name", name},
         {"dimension", askwhen::to_string(dimension)},
         {"shape", shape_to_string(shape)},
         {"p_oracle", p_oracle},
         {"p_nc", p_nc},
         {"trajectory_length", trajectory_length},
         {"benchmark", benchmark},
         {"ambiguity_class", askwhen::to_string(ambiguity_class)},
         {"count", count}};
  if (shape == CommitmentShape::concave) j["alpha"] = alpha;
  if (shape == CommitmentShape::constraint_reconcile) {
    j["reconciliation_rate"] = reconciliation_rate;
  }
  return j;
}

CommitmentProfile CommitmentProfile::from_json(const json& j) {
  CommitmentProfile p;
  p.name = j.at("name").get<std::string>();
  p.dimension = dimension_from_string(j.at("dimension").get<std::string>());
  p.shape = shape_from_string(j.at("shape").get<std::string>());
  p.alpha = j.value("alpha", 0.35);
  p.reconciliation_rate = j.value("reconciliation_rate", 0.1);
  p.p_oracle = j.at("p_oracle").get<double>();
  p.p_nc = j.at("p_nc").get<double>();
  p.trajectory_length = j.at("trajectory_length").get<int>();
  p.benchmark = j.value("benchmark", std::string("sim"));
  p.ambiguity_class = ambiguity_class_from_string(
      j.value("ambiguity_class", std::string("outcome_critical")));
  p.count = j.value("count", 1);
  validate_profile(p);
  return p;
}

void validate_profile(const CommitmentProfile& p) {
  if (p.name.empty()) throw ConfigError("profile name empty");
  if (p.p_oracle < 0 || p.p_oracle > 1 || p.p_nc < 0 || p.p_nc > 1) {
    throw ConfigError("profile " + p.name + ": anchors must lie in [0,1]");
  }
  if (p.p_oracle < p.p_nc) {
    throw ConfigError("profile " + p.name + ": p_oracle < p_nc");
  }
  if (p.shape == CommitmentShape::concave && (p.alpha <= 0 || p.alpha >= 1)) {
    throw ConfigError("profile " + p.name + ": alpha must lie in (0,1)");
  }
  if (p.shape == CommitmentShape::constraint_reconcile && p.reconciliation_rate < 0) {
    throw ConfigError("profile " + p.name + ": reconciliation_rate must be >= 0");
  }
  if (p.trajectory_length < 1) {
    throw ConfigError("profile " + p.name + ": trajectory_length must be >= 1");
  }
  if (p.count < 1) throw ConfigError("profile " + p.name + ": count must be >= 1");
}

double commitment(const CommitmentProfile& p, double t) {
  if (t < 0.0 || t > 1.0) {
    throw std::invalid_argument("commitment: t outside [0,1]");
  }
  switch (p.shape) {
    case CommitmentShape::concave: return std::pow(t, p.alpha);
    case CommitmentShape::linear:
    case CommitmentShape::constraint_reconcile: return t;
  }
  throw std::logic_error("bad CommitmentShape");
}

double success_probability(const CommitmentProfile& p, const Condition& c) {
  switch (c.kind()) {
    case Condition::Kind::oracle: return p.p_oracle;
    case Condition::Kind::no_clarification: return p.p_nc;
    case Condition::Kind::injection: break;
  }
  const double ct = commitment(p, c.fraction());
  const double rate =
      p.shape == CommitmentShape::constraint_reconcile ? p.reconciliation_rate : 0.0;
  const double raw = p.p_nc + (p.p_oracle - p.p_nc) * (1.0 - ct) - rate * ct;
  return std::clamp(raw, 0.0, 1.0);
}

std::string sim_underspecified_prompt(const std::string& variant_id) {
  return "Task " + variant_id + ": complete the objective.";
}

std::string sim_segment_value(const std::string& variant_id) {
  return "the full requirement for task " + variant_id;
}

std::string sim_oracle_prompt(const std::string& variant_id, const std::string& segment_value) {
  return sim_underspecified_prompt(variant_id) + " Note: " + segment_value + ".";
}

namespace {

// Variant id from the opening turn, which starts "Task <id>: ...".
std::string parse_variant_id(const std::vector<Turn>& conversation) {
  for (const Turn& t : conversation) {
    if (t.role != "user") continue;
    const std::string& s = t.text;
    if (s.rfind("Task ", 0) == 0) {
      const auto colon = s.find(':');
      if (colon != std::string::npos) return s.substr(5, colon - 5);
    }
    return "";
  }
  return "";
}

// Clarification is visible if the opening task turn carries the oracle note
// or if any later user turn arrived (an injection, or an ask answer, which
// the engine records as the user speaking).
bool clarification_seen(const std::vector<Turn>& conversation) {
  bool first_user_seen = false;
  for (const Turn& t : conversation) {
    if (t.role != "user") continue;
    if (!first_user_seen) {
      first_user_seen = true;
      if (t.text.find(" Note: ") != std::string::npos) return true;
    } else {
      return true;
    }
  }
  return false;
}

}  // namespace

SimAction sim_act(const CommitmentProfile& p, const std::vector<Turn>& conversation,
                  int step_index, std::uint64_t seed) {
  if (step_index < 1) throw std::invalid_argument("sim_act: step_index must be >= 1");
  SimAction out;
  const int T = p.trajectory_length;
  if (step_index > T) {
    out.finished = true;
    out.answer = "done";
    return out;
  }
  std::string name =
      step_index == T ? "produce_output" : (step_index % 2 == 1 ? "explore" : "commit_step");
  if (!clarification_seen(conversation)) {
    const std::string vid = parse_variant_id(conversation);
    const double u = uniform_at(
        "divergence|" + vid + "|" + std::to_string(seed), std::uint64_t(step_index));
    const double ct = commitment(p, double(step_index) / double(T));
    if (u < ct) name += "_divergent";
  }
  out.name = name;
  out.parameters = json{{"step", step_index}};
  return out;
}

bool grade_sim(const CommitmentProfile& p, const std::string& variant_id,
               const Condition& condition, std::uint64_t seed) {
  const double prob = success_probability(p, condition);
  const double u = uniform_at(
      "grade|" + variant_id + "|" + condition.key() + "|" + std::to_string(seed), 0);
  return u < prob;
}

std::vector<TaskVariant> synthesize_variants(const CommitmentProfile& p) {
  validate_profile(p);
  std::vector<TaskVariant> out;
  out.reserve(std::size_t(p.count));
  for (int i = 0; i < p.count; ++i) {
    char idx[16];
    std::snprintf(idx, sizeof idx, "%04d", i);
    TaskVariant v;
    v.variant_id = p.name + "-" + idx;
    v.benchmark = p.benchmark;
    const std::string value = sim_segment_value(v.variant_id);
    v.underspecified_prompt = sim_underspecified_prompt(v.variant_id);
    v.oracle_prompt = sim_oracle_prompt(v.variant_id, value);
    v.removed_segments.push_back(RemovedSegment{p.dimension, "", value});
    v.primary_dimension = p.dimension;
    v.ambiguity_class = p.ambiguity_class;
    v.grader.kind = "sim";
    out.push_back(std::move(v));
  }
  return out;
}

const CommitmentProfile* ProfileSet::for_variant(const std::string& variant_id) const {
  const auto dash = variant_id.rfind('-');
  const std::string prefix =
      dash == std::string::npos ? variant_id : variant_id.substr(0, dash);
  for (const auto& p : profiles) {
    if (p.name == prefix) return &p;
  }
  return nullptr;
}

ProfileSet ProfileSet::from_json(const json& j) {
  const json* list = nullptr;
  if (j.is_array()) {
    list = &j;
  } else if (j.is_object() && j.contains("profiles") && j["profiles"].is_array()) {
    list = &j["profiles"];
  } else {
    throw ConfigError("profile config: expected an array of profiles or {\"profiles\": [...]}");
  }
  ProfileSet set;
  for (const json& p : *list) {
    set.profiles.push_back(CommitmentProfile::from_json(p));
  }
  if (set.profiles.empty()) throw ConfigError("profile set is empty");
  return set;
}

ProfileSet ProfileSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing profile config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed profile config " + path + ": " + e.what());
  }
  return from_json(j);
}

ProfileSet default_profiles() {
  ProfileSet set;
  CommitmentProfile goal;
  goal.name = "goal";
  goal.dimension = Dimension::goal;
  goal.shape = CommitmentShape::concave;
  goal.alpha = 0.35;
  goal.p_oracle = 0.80;
  goal.p_nc = 0.40;
  goal.trajectory_length = 7;
  goal.ambiguity_class = AmbiguityClass::outcome_critical;

  CommitmentProfile input;
  input.name = "input";
  input.dimension = Dimension::input;
  input.shape = CommitmentShape::linear;
  input.p_oracle = 0.57;
  input.p_nc = 0.33;
  input.trajectory_length = 12;
  input.ambiguity_class = AmbiguityClass::divergent;

  CommitmentProfile constraint;
  constraint.name = "constraint";
  constraint.dimension = Dimension::constraint;
  constraint.shape = CommitmentShape::constraint_reconcile;
  constraint.reconciliation_rate = 0.1;
  constraint.p_oracle = 0.12;
  constraint.p_nc = 0.12;
  constraint.trajectory_length = 9;
  constraint.ambiguity_class = AmbiguityClass::outcome_critical;

  CommitmentProfile context;
  context.name = "context";
  context.dimension = Dimension::context;
  context.shape = CommitmentShape::concave;
  context.alpha = 0.35;
  context.p_oracle = 0.80;
  context.p_nc = 0.60;
  context.trajectory_length = 7;
  context.ambiguity_class = AmbiguityClass::benign;

  set.profiles = {goal, input, constraint, context};
  for (CommitmentProfile& p : set.profiles) p.count = 50;
  return set;
}

}  // namespace askwhen
