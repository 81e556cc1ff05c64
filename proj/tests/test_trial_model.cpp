#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "askwhen/archive.hpp"
#include "askwhen/errors.hpp"
#include "askwhen/trial.hpp"
#include "support/temp_dir.hpp"

using namespace askwhen;
using askwhen::testing::TempDir;

namespace {

TaskVariant make_variant(const std::string& id = "demo-0001") {
  TaskVariant v;
  v.variant_id = id;
  v.benchmark = "bench";
  v.oracle_prompt = "Do the task. Note: output CSV.";
  v.underspecified_prompt = "Do the task.";
  v.removed_segments.push_back(RemovedSegment{Dimension::goal, "format", "CSV"});
  v.primary_dimension = Dimension::goal;
  v.ambiguity_class = AmbiguityClass::outcome_critical;
  v.grader.kind = "exact_match";
  v.grader.expected = "42";
  return v;
}

Trial make_trial(const Condition& c, int n_actions, std::optional<int> inject_at) {
  Trial t;
  t.variant_id = "demo-0001";
  t.model = "m";
  t.condition = c;
  t.seed = 1;
  t.injection_point = inject_at;
  for (int i = 1; i <= n_actions; ++i) {
    Action a;
    a.index = i;
    a.name = "explore";
    a.parameters = json{{"step", i}};
    a.result = "ok";
    a.is_pre_injection = inject_at && i <= *inject_at;
    t.actions.push_back(a);
  }
  t.total_actions = n_actions;
  t.pre_injection_actions = inject_at.value_or(0);
  t.post_injection_actions = n_actions - inject_at.value_or(0);
  t.conversation.push_back(Turn{"user", "Do the task.", false});
  t.task_success = true;
  t.duration_seconds = 0.5;
  return t;
}

}  // namespace

TEST_CASE("condition set is canonical and keyed exactly") {
  const auto& all = Condition::all();
  REQUIRE(all.size() == 7);
  CHECK(all[0].key() == "oracle");
  CHECK(all[1].key() == "no_clarification");
  CHECK(all[2].key() == "injection@0.1");
  CHECK(all[6].key() == "injection@0.9");
  CHECK(all[2].display_label() == "Inj-10");
  CHECK(all[0].display_label() == "Oracle");
  CHECK(all[1].display_label() == "NC");
  CHECK(all[4].fraction_string() == "0.5");
  CHECK(all[4].fraction() == doctest::Approx(0.5));

  for (const auto& c : all) CHECK(Condition::from_key(c.key()) == c);
  CHECK(Condition::injection(0.3) == Condition::injection_tenths(3));
  CHECK_THROWS_AS(Condition::injection(0.2), ConfigError);
  CHECK_THROWS_AS(Condition::injection_tenths(10), ConfigError);
  CHECK_THROWS_AS(Condition::from_key("injection@0.2"), ConfigError);

  // Strict weak order follows the canonical sequence.
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    CHECK(all[i] < all[i + 1]);
    CHECK_FALSE(all[i + 1] < all[i]);
  }
}

TEST_CASE("condition serialization carries the fraction as a string") {
  const json inj = Condition::injection_tenths(7).to_json();
  CHECK(inj["kind"] == "injection");
  CHECK(inj["fraction"] == "0.7");
  CHECK_FALSE(Condition::oracle().to_json().contains("fraction"));

  for (const auto& c : Condition::all()) {
    CHECK(Condition::from_json(c.to_json()) == c);
  }
  CHECK_THROWS_AS(Condition::from_json(json{{"kind", "injection"}, {"fraction", "0.2"}}),
                  ConfigError);
}

TEST_CASE("variant validation reports every violation") {
  CHECK(validate_variant(make_variant()).empty());

  TaskVariant bad = make_variant();
  bad.removed_segments.clear();
  bad.underspecified_prompt = bad.oracle_prompt;
  const auto violations = validate_variant(bad);
  CHECK(std::find(violations.begin(), violations.end(), "removed_segments empty") !=
        violations.end());
  CHECK(std::find(violations.begin(), violations.end(), "prompts identical") !=
        violations.end());

  TaskVariant empty_value = make_variant();
  empty_value.removed_segments[0].value.clear();
  const auto v2 = validate_variant(empty_value);
  CHECK(std::find(v2.begin(), v2.end(), "removed_segments[0].value empty") != v2.end());
}

TEST_CASE("variant JSON round-trips") {
  const TaskVariant v = make_variant();
  const TaskVariant back = TaskVariant::from_json(v.to_json());
  CHECK(back.variant_id == v.variant_id);
  CHECK(back.oracle_prompt == v.oracle_prompt);
  CHECK(back.removed_segments == v.removed_segments);
  CHECK(back.primary_dimension == v.primary_dimension);
  CHECK(back.grader == v.grader);
}

TEST_CASE("trial serialization shape") {
  Trial t = make_trial(Condition::injection_tenths(3), 5, 2);
  t.ask_events.push_back(AskEvent{2, "which format?"});
  const json j = t.to_json();

  CHECK(j["condition"]["fraction"] == "0.3");
  CHECK(j["injection_point"] == 2);
  CHECK(j["actions"][0]["action_name"] == "explore");
  CHECK(j["actions"][0]["is_pre_injection"] == true);
  CHECK(j["actions"][4]["is_pre_injection"] == false);
  CHECK(j["ask_events"][0] == json::array({2, "which format?"}));
  CHECK_FALSE(j.contains("annotations"));  // only present when non-empty

  const Trial nc = make_trial(Condition::no_clarification(), 3, std::nullopt);
  CHECK_FALSE(nc.to_json().contains("injection_point"));
}

TEST_CASE("trial round-trip preserves unknown fields") {
  Trial t = make_trial(Condition::oracle(), 2, std::nullopt);
  json j = t.to_json();
  j["custom_telemetry"] = json{{"tokens", 123}};
  j["another_field"] = "kept";

  const Trial back = Trial::from_json(j);
  CHECK(back.extra["custom_telemetry"]["tokens"] == 123);
  CHECK(back.extra["another_field"] == "kept");

  const json again = back.to_json();
  CHECK(again["custom_telemetry"]["tokens"] == 123);
  CHECK(again["another_field"] == "kept");
  CHECK(again["variant_id"] == "demo-0001");
}

TEST_CASE("trial validation") {
  CHECK(validate_trial(make_trial(Condition::injection_tenths(1), 4, 1)).empty());
  CHECK(validate_trial(make_trial(Condition::oracle(), 3, std::nullopt)).empty());

  SUBCASE("injection trial must carry an injection point") {
    Trial t = make_trial(Condition::injection_tenths(5), 4, std::nullopt);
    t.pre_injection_actions = 0;
    t.post_injection_actions = 4;
    CHECK_FALSE(validate_trial(t).empty());
  }
  SUBCASE("totals must match the action list") {
    Trial t = make_trial(Condition::oracle(), 3, std::nullopt);
    t.total_actions = 5;
    CHECK_FALSE(validate_trial(t).empty());
  }
  SUBCASE("indices must be 1-based and consecutive") {
    Trial t = make_trial(Condition::oracle(), 3, std::nullopt);
    t.actions[1].index = 7;
    CHECK_FALSE(validate_trial(t).empty());
  }
  SUBCASE("pre/post split must add up") {
    Trial t = make_trial(Condition::injection_tenths(3), 4, 2);
    t.post_injection_actions = 3;
    CHECK_FALSE(validate_trial(t).empty());
  }
  SUBCASE("ask index must point at an action") {
    Trial t = make_trial(Condition::oracle(), 3, std::nullopt);
    t.ask_events.push_back(AskEvent{9, "?"});
    CHECK_FALSE(validate_trial(t).empty());
  }
}

TEST_CASE("archive append, load, and filter") {
  TempDir tmp;
  const std::string dir = tmp.sub("run");
  {
    ArchiveWriter w(dir);
    for (int seed = 0; seed < 3; ++seed) {
      Trial t = make_trial(Condition::oracle(), 3, std::nullopt);
      t.seed = std::uint64_t(seed);
      w.append(t);
    }
    for (int seed = 0; seed < 3; ++seed) {
      Trial t = make_trial(Condition::no_clarification(), 3, std::nullopt);
      t.seed = std::uint64_t(seed);
      w.append(t);
    }
    CHECK(w.count() == 6);
  }

  CHECK(load_trials(dir).size() == 6);

  const auto oracle_only =
      load_trials(dir, [](const std::string&, const std::string&, const Condition& c) {
        return c.kind() == Condition::Kind::oracle;
      });
  CHECK(oracle_only.size() == 3);
  CHECK(oracle_only[0].seed == 0);
  CHECK(oracle_only[2].seed == 2);
}

TEST_CASE("archive writer rejects malformed trials") {
  TempDir tmp;
  ArchiveWriter w(tmp.sub("run"));
  Trial t = make_trial(Condition::oracle(), 3, std::nullopt);
  t.total_actions = 99;
  CHECK_THROWS_AS(w.append(t), ConfigError);
  CHECK(w.count() == 0);
}

TEST_CASE("loading names the malformed line") {
  TempDir tmp;
  const std::string dir = tmp.sub("run");
  {
    ArchiveWriter w(dir);
    w.append(make_trial(Condition::oracle(), 2, std::nullopt));
  }
  {
    std::ofstream out(dir + "/trials.jsonl", std::ios::app | std::ios::binary);
    out << "{broken\n";
  }
  try {
    load_trials(dir);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }

  CHECK_THROWS_AS(load_trials(tmp.sub("nowhere")), ConfigError);
}

TEST_CASE("manifest round-trips through its file") {
  TempDir tmp;
  Manifest m;
  m.config_hash = "abc123";
  m.protocol = "forced";
  m.seeds = {0, 1, 2};
  m.agents = {"sim"};
  m.variants["demo-0001"] =
      VariantMeta{"bench", Dimension::goal, AmbiguityClass::outcome_critical};
  m.conditions = {"oracle", "no_clarification"};
  m.skipped_cells.push_back(SkippedCell{"sim", "demo-0001", "no oracle run terminated"});

  m.save(tmp.path());
  const Manifest back = Manifest::load(tmp.path());
  CHECK(back.config_hash == "abc123");
  CHECK(back.protocol == "forced");
  CHECK(back.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(back.variants.at("demo-0001").benchmark == "bench");
  CHECK(back.variants.at("demo-0001").dimension == Dimension::goal);
  CHECK(back.skipped_cells.size() == 1);
  CHECK(back.skipped_cells[0].reason == "no oracle run terminated");
}
