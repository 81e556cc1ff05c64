#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace askwhen {

using json = nlohmann::json;

enum class Dimension { goal, constraint, input, context };
enum class AmbiguityClass { outcome_critical, divergent, benign };

std::string to_string(Dimension d);
std::string to_string(AmbiguityClass c);
Dimension dimension_from_string(const std::string& s);
AmbiguityClass ambiguity_class_from_string(const std::string& s);

// Experimental condition: oracle, no-clarification, or injection at one of
// five fixed trajectory fractions. The fraction is held as integer tenths so
// condition keys and arithmetic on budgets stay exact; keys render fractions
// as decimal strings ("injection@0.3") to keep grouping float-free.
class Condition {
 public:
  enum class Kind { oracle, no_clarification, injection };

  static Condition oracle() { return Condition(Kind::oracle, 0); }
  static Condition no_clarification() { return Condition(Kind::no_clarification, 0); }
  static Condition injection(double fraction);
  static Condition injection_tenths(int tenths);

  // The full condition set, in canonical order: oracle, NC, then the five
  // injection fractions ascending.
  static const std::vector<Condition>& all();

  static Condition from_key(const std::string& key);

  Kind kind() const { return kind_; }
  bool is_injection() const { return kind_ == Kind::injection; }
  int fraction_tenths() const;
  double fraction() const;
  std::string fraction_string() const;  // "0.1" .. "0.9"
  std::string key() const;              // "oracle" | "no_clarification" | "injection@0.1"
  std::string display_label() const;    // "Oracle" | "NC" | "Inj-10" ..

  bool operator==(const Condition& o) const {
    return kind_ == o.kind_ && tenths_ == o.tenths_;
  }
  bool operator!=(const Condition& o) const { return !(*this == o); }
  bool operator<(const Condition& o) const;

  json to_json() const;
  static Condition from_json(const json& j);

 private:
  Condition(Kind k, int tenths) : kind_(k), tenths_(tenths) {}
  Kind kind_;
  int tenths_;  // 1,3,5,7,9 for injection; 0 otherwise
};

// One withheld prompt segment: the dimension it belongs to, an optional
// subdimension key ("format", "temporal", ...) and the withheld text itself.
struct RemovedSegment {
  Dimension dimension = Dimension::goal;
  std::string subdimension;
  std::string value;

  json to_json() const;
  static RemovedSegment from_json(const json& j);
  bool operator==(const RemovedSegment& o) const = default;
};

// How a trial outcome is judged.
//   exact_match: final answer equals `expected` byte-for-byte.
//   command: external predicate; receives the trial JSON on stdin.
//   sim: Bernoulli draw from the simulator profile bound to the variant.
struct GraderSpec {
  std::string kind;  // "exact_match" | "command" | "sim"
  std::string expected;
  std::vector<std::string> command;

  json to_json() const;
  static GraderSpec from_json(const json& j);
  bool operator==(const GraderSpec& o) const = default;
};

struct TaskVariant {
  std::string variant_id;
  std::string benchmark;
  std::string oracle_prompt;
  std::string underspecified_prompt;
  std::vector<RemovedSegment> removed_segments;
  Dimension primary_dimension = Dimension::goal;
  AmbiguityClass ambiguity_class = AmbiguityClass::outcome_critical;
  GraderSpec grader;

  json to_json() const;
  static TaskVariant from_json(const json& j);
};

// Structural checks on a variant. Violations are returned, not thrown, so
// corpus loaders can report every problem at once.
std::vector<std::string> validate_variant(const TaskVariant& v);

// One agent action: a tool call or a bare message turn. Indices are 1-based
// and consecutive within a trial.
struct Action {
  int index = 0;
  std::string name;
  json parameters = json::object();
  std::string result;
  bool is_pre_injection = false;

  json to_json() const;
  static Action from_json(const json& j);
};

struct Turn {
  std::string role;  // "system" | "user" | "assistant" | "tool"
  std::string text;
  bool injected = false;  // marks the synthetic mid-trajectory user turn

  json to_json() const;
  static Turn from_json(const json& j);
  bool operator==(const Turn& o) const = default;
};

struct AskEvent {
  int action_index = 0;
  std::string question;

  bool operator==(const AskEvent& o) const = default;
};

struct Trial {
  std::string variant_id;
  std::string model;
  Condition condition = Condition::oracle();
  std::optional<int> injection_point;
  std::uint64_t seed = 0;
  std::vector<Action> actions;
  std::vector<Turn> conversation;
  bool task_success = false;
  int total_actions = 0;
  int pre_injection_actions = 0;
  int post_injection_actions = 0;
  double duration_seconds = 0.0;
  std::vector<AskEvent> ask_events;
  std::vector<std::string> annotations;

  // Unknown fields seen when parsing; carried through serialization untouched.
  json extra = json::object();

  bool has_annotation(const std::string& a) const;

  json to_json() const;
  static Trial from_json(const json& j);
};

// Structural checks on a trial record; empty result means well-formed.
std::vector<std::string> validate_trial(const Trial& t);

}  // namespace askwhen
