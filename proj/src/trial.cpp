#include "askwhen/trial.hpp"

#include <algorithm>
#include <cmath>

#include "askwhen/errors.hpp"

namespace askwhen {

std::string to_string(Dimension d) {
  switch (d) {
    case Dimension::goal: return "goal";
    case Dimension::constraint: return "constraint";
    case Dimension::input: return "input";
    case Dimension::context: return "context";
  }
  throw std::logic_error("bad Dimension");
}

std::string to_string(AmbiguityClass c) {
  switch (c) {
    case AmbiguityClass::outcome_critical: return "outcome_critical";
    case AmbiguityClass::divergent: return "divergent";
    case AmbiguityClass::benign: return "benign";
  }
  throw std::logic_error("bad AmbiguityClass");
}

Dimension dimension_from_string(const std::string& s) {
  if (s == "goal") return Dimension::goal;
  if (s == "constraint") return Dimension::constraint;
  if (s == "input") return Dimension::input;
  if (s == "context") return Dimension::context;
  throw ConfigError("unknown dimension: " + s);
}

AmbiguityClass ambiguity_class_from_string(const std::string& s) {
  if (s == "outcome_critical") return AmbiguityClass::outcome_critical;
  if (s == "divergent") return AmbiguityClass::divergent;
  if (s == "benign") return AmbiguityClass::benign;
  throw ConfigError("unknown ambiguity class: " + s);
}

Condition Condition::injection_tenths(int tenths) {
  if (tenths != 1 && tenths != 3 && tenths != 5 && tenths != 7 && tenths != 9) {
    throw ConfigError("injection fraction must be one of 0.1, 0.3, 0.5, 0.7, 0.9");
  }
  return Condition(Kind::injection, tenths);
}

Condition Condition::injection(double fraction) {
  for (int t : {1, 3, 5, 7, 9}) {
    if (std::fabs(fraction - t / 10.0) < 1e-9) return injection_tenths(t);
  }
  throw ConfigError("injection fraction must be one of 0.1, 0.3, 0.5, 0.7, 0.9");
}

const std::vector<Condition>& Condition::all() {
  static const std::vector<Condition> k = {
      oracle(),
      no_clarification(),
      injection_tenths(1),
      injection_tenths(3),
      injection_tenths(5),
      injection_tenths(7),
      injection_tenths(9),
  };
  return k;
}

int Condition::fraction_tenths() const {
  if (!is_injection()) throw std::logic_error("fraction on non-injection condition");
  return tenths_;
}

double Condition::fraction() const { return fraction_tenths() / 10.0; }

std::string Condition::fraction_string() const {
  return "0." + std::to_string(fraction_tenths());
}

std::string Condition::key() const {
  switch (kind_) {
    case Kind::oracle: return "oracle";
    case Kind::no_clarification: return "no_clarification";
    case Kind::injection: return "injection@" + fraction_string();
  }
  throw std::logic_error("bad Condition kind");
}

std::string Condition::display_label() const {
  switch (kind_) {
    case Kind::oracle: return "Oracle";
    case Kind::no_clarification: return "NC";
    case Kind::injection: return "Inj-" + std::to_string(tenths_ * 10);
  }
  throw std::logic_error("bad Condition kind");
}

Condition Condition::from_key(const std::string& key) {
  for (const Condition& c : all()) {
    if (c.key() == key) return c;
  }
  throw ConfigError("unknown condition key: " + key);
}

bool Condition::operator<(const Condition& o) const {
  if (kind_ != o.kind_) return int(kind_) < int(o.kind_);
  return tenths_ < o.tenths_;
}

json Condition::to_json() const {
  json j = json::object();
  switch (kind_) {
    case Kind::oracle: j["kind"] = "oracle"; break;
    case Kind::no_clarification: j["kind"] = "no_clarification"; break;
    case Kind::injection:
      j["kind"] = "injection";
      j["fraction"] = fraction_string();
      break;
  }
  return j;
}

Condition Condition::from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "oracle") return oracle();
  if (kind == "no_clarification") return no_clarification();
  if (kind == "injection") {
    const json& f = j.at("fraction");
    if (f.is_string()) {
      const std::string s = f.get<std::string>();
      for (int t : {1, 3, 5, 7, 9}) {
        if (s == "0." + std::to_string(t)) return injection_tenths(t);
      }
      throw ConfigError("bad injection fraction string: " + s);
    }
    return injection(f.get<double>());
  }
  throw ConfigError("unknown condition kind: " + kind);
}

json RemovedSegment::to_json() const {
  return json{{"dimension", askwhen::to_string(dimension)},
              {"subdimension", subdimension},
              {"value", value}};
}

RemovedSegment RemovedSegment::from_json(const json& j) {
  RemovedSegment s;
  s.dimension = dimension_from_string(j.at("dimension").get<std::string>());
  s.subdimension = j.value("subdimension", std::string());
  s.value = j.at("value").get<std::string>();
  return s;
}

json GraderSpec::to_json() const {
  json j{{"kind", kind}};
  if (kind == "exact_match") j["expected"] = expected;
  if (kind == "command") j["command"] = command;
  return j;
}

GraderSpec GraderSpec::from_json(const json& j) {
  GraderSpec g;
  g.kind = j.at("kind").get<std::string>();
  if (g.kind == "exact_match") {
    g.expected = j.at("expected").get<std::string>();
  } else if (g.kind == "command") {
    g.command = j.at("command").get<std::vector<std::string>>();
  } else if (g.kind != "sim") {
    throw ConfigError("unknown grader kind: " + g.kind);
  }
  return g;
}

json TaskVariant::to_json() const {
  json segs = json::array();
  for (const auto& s : removed_segments) segs.push_back(s.to_json());
  return json{{"variant_id", variant_id},
              {"benchmark", benchmark},
              {"oracle_prompt", oracle_prompt},
              {"underspecified_prompt", underspecified_prompt},
              {"removed_segments", segs},
              {"primary_dimension", askwhen::to_string(primary_dimension)},
              {"ambiguity_class", askwhen::to_string(ambiguity_class)},
              {"grader", grader.to_json()}};
}

TaskVariant TaskVariant::from_json(const json& j) {
  TaskVariant v;
  v.variant_id = j.at("variant_id").get<std::string>();
  v.benchmark = j.value("benchmark", std::string());
  v.oracle_prompt = j.at("oracle_prompt").get<std::string>();
  v.underspecified_prompt = j.at("underspecified_prompt").get<std::string>();
  for (const json& s : j.at("removed_segments")) {
    v.removed_segments.push_back(RemovedSegment::from_json(s));
  }
  v.primary_dimension = dimension_from_string(j.at("primary_dimension").get<std::string>());
  v.ambiguity_class = ambiguity_class_from_string(j.at("ambiguity_class").get<std::string>());
  v.grader = GraderSpec::from_json(j.at("grader"));
  return v;
}

std::vector<std::string> validate_variant(const TaskVariant& v) {
  std::vector<std::string> out;
  if (v.variant_id.empty()) out.push_back("variant_id empty");
  if (v.removed_segments.empty()) out.push_back("removed_segments empty");
  if (v.oracle_prompt == v.underspecified_prompt) out.push_back("prompts identical");
  if (v.oracle_prompt.empty()) out.push_back("oracle_prompt empty");
  if (v.underspecified_prompt.empty()) out.push_back("underspecified_prompt empty");
  for (std::size_t i = 0; i < v.removed_segments.size(); ++i) {
    if (v.removed_segments[i].value.empty()) {
      out.push_back("removed_segments[" + std::to_string(i) + "].value empty");
    }
  }
  if (v.grader.kind.empty()) out.push_back("grader.kind empty");
  return out;
}

json Action::to_json() const {
  return json{{"index", index},
              {"action_name", name},
              {"parameters", parameters},
              {"result", result},
              {"is_pre_injection", is_pre_injection}};
}

Action Action::from_json(const json& j) {
  Action a;
  a.index = j.at("index").get<int>();
  a.name = j.at("action_name").get<std::string>();
  a.parameters = j.value("parameters", json::object());
  a.result = j.value("result", std::string());
  a.is_pre_injection = j.value("is_pre_injection", false);
  return a;
}

json Turn::to_json() const {
  json j{{"role", role}, {"text", text}};
  if (injected) j["injected"] = true;
  return j;
}

Turn Turn::from_json(const json& j) {
  Turn t;
  t.role = j.at("role").get<std::string>();
  t.text = j.at("text").get<std::string>();
  t.injected = j.value("injected", false);
  return t;
}

bool Trial::has_annotation(const std::string& a) const {
  return std::find(annotations.begin(), annotations.end(), a) != annotations.end();
}

json Trial::to_json() const {
  // Start from the unknown-field carryover so round-trips preserve fields
  // this version does not model.
  json j = extra;
  j["variant_id"] = variant_id;
  j["model"] = model;
  j["condition"] = condition.to_json();
  if (injection_point) {
    j["injection_point"] = *injection_point;
  } else {
    j.erase("injection_point");
  }
  j["seed"] = seed;
  json acts = json::array();
  for (const auto& a : actions) acts.push_back(a.to_json());
  j["actions"] = acts;
  json conv = json::array();
  for (const auto& t : conversation) conv.push_back(t.to_json());
  j["conversation"] = conv;
  j["task_success"] = task_success;
  j["total_actions"] = total_actions;
  j["pre_injection_actions"] = pre_injection_actions;
  j["post_injection_actions"] = post_injection_actions;
  j["duration_seconds"] = duration_seconds;
  json asks = json::array();
  for (const auto& e : ask_events) asks.push_back(json::array({e.action_index, e.question}));
  j["ask_events"] = asks;
  if (!annotations.empty()) {
    j["annotations"] = annotations;
  } else {
    j.erase("annotations");
  }
  return j;
}

Trial Trial::from_json(const json& j) {
  Trial t;
  t.variant_id = j.at("variant_id").get<std::string>();
  t.model = j.at("model").get<std::string>();
  t.condition = Condition::from_json(j.at("condition"));
  if (j.contains("injection_point") && !j.at("injection_point").is_null()) {
    t.injection_point = j.at("injection_point").get<int>();
  }
  t.seed = j.value("seed", std::uint64_t(0));
  for (const json& a : j.at("actions")) t.actions.push_back(Action::from_json(a));
  for (const json& c : j.value("conversation", json::array())) {
    t.conversation.push_back(Turn::from_json(c));
  }
  t.task_success = j.at("task_success").get<bool>();
  t.total_actions = j.at("total_actions").get<int>();
  t.pre_injection_actions = j.value("pre_injection_actions", 0);
  t.post_injection_actions = j.value("post_injection_actions", 0);
  t.duration_seconds = j.value("duration_seconds", 0.0);
  for (const json& e : j.value("ask_events", json::array())) {
    t.ask_events.push_back(AskEvent{e.at(0).get<int>(), e.at(1).get<std::string>()});
  }
  if (j.contains("annotations")) {
    t.annotations = j.at("annotations").get<std::vector<std::string>>();
  }
  static const char* known[] = {
      "variant_id", "model", "condition", "injection_point", "seed",
      "actions", "conversation", "task_success", "total_actions",
      "pre_injection_actions", "post_injection_actions", "duration_seconds",
      "ask_events", "annotations"};
  t.extra = json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool is_known = false;
    for (const char* k : known) {
      if (it.key() == k) { is_known = true; break; }
    }
    if (!is_known) t.extra[it.key()] = it.value();
  }
  return t;
}

std::vector<std::string> validate_trial(const Trial& t) {
  std::vector<std::string> out;
  if (t.variant_id.empty()) out.push_back("variant_id empty");
  if (t.model.empty()) out.push_back("model empty");
  if (t.total_actions != int(t.actions.size())) {
    out.push_back("total_actions != actions.size()");
  }
  if (t.pre_injection_actions + t.post_injection_actions != t.total_actions) {
    out.push_back("pre + post != total_actions");
  }
  if (t.condition.is_injection()) {
    if (!t.injection_point) {
      out.push_back("injection trial missing injection_point");
    } else if (t.pre_injection_actions != *t.injection_point) {
      out.push_back("pre_injection_actions != injection_point");
    }
  } else {
    if (t.injection_point) out.push_back("injection_point on non-injection trial");
    if (t.pre_injection_actions != 0) {
      out.push_back("pre_injection_actions nonzero on non-injection trial");
    }
  }
  for (std::size_t i = 0; i < t.actions.size(); ++i) {
    const Action& a = t.actions[i];
    if (a.index != int(i) + 1) {
      out.push_back("action index not consecutive at position " + std::to_string(i));
      break;
    }
    const bool expect_pre =
        t.condition.is_injection() && t.injection_point && a.index <= *t.injection_point;
    if (a.is_pre_injection != expect_pre) {
      out.push_back("is_pre_injection wrong at action " + std::to_string(a.index));
      break;
    }
  }
  for (const AskEvent& e : t.ask_events) {
    if (e.action_index < 1 || e.action_index > t.total_actions) {
      out.push_back("ask_event index out of range");
      break;
    }
  }
  if (t.duration_seconds < 0) out.push_back("duration_seconds negative");
  return out;
}

}  // namespace askwhen
