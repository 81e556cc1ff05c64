// Tests for the trajectory-commitment simulator: commitment curves, success
// probabilities, deterministic acting, grading calibration, and the
// profile-driven variant corpus.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "askwhen/errors.hpp"
#include "askwhen/sim_agent.hpp"
#include "askwhen/trial.hpp"

#include "support/temp_dir.hpp"

using namespace askwhen;

namespace {

CommitmentProfile concave_goal() {
  CommitmentProfile p;
  p.name = "goal";
  p.dimension = Dimension::goal;
  p.shape = CommitmentShape::concave;
  p.alpha = 0.35;
  p.p_oracle = 0.80;
  p.p_nc = 0.40;
  p.trajectory_length = 7;
  return p;
}

CommitmentProfile linear_input() {
  CommitmentProfile p;
  p.name = "input";
  p.dimension = Dimension::input;
  p.shape = CommitmentShape::linear;
  p.p_oracle = 0.57;
  p.p_nc = 0.33;
  p.trajectory_length = 12;
  p.ambiguity_class = AmbiguityClass::divergent;
  return p;
}

CommitmentProfile reconcile_constraint() {
  CommitmentProfile p;
  p.name = "constraint";
  p.dimension = Dimension::constraint;
  p.shape = CommitmentShape::constraint_reconcile;
  p.reconciliation_rate = 0.1;
  p.p_oracle = 0.12;
  p.p_nc = 0.12;
  p.trajectory_length = 9;
  return p;
}

std::vector<Turn> underspecified_convo(const std::string& vid) {
  return {Turn{"user", sim_underspecified_prompt(vid), false}};
}

std::vector<Turn> oracle_convo(const std::string& vid) {
  return {Turn{"user", sim_oracle_prompt(vid, sim_segment_value(vid)), false}};
}

}  // namespace

TEST_CASE("commitment curve golden values") {
  const CommitmentProfile g = concave_goal();
  // Independent evaluation of t^alpha via exp/log.
  const double expected = std::exp(0.35 * std::log(0.1));
  CHECK(commitment(g, 0.1) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(commitment(g, 0.1) == doctest::Approx(0.4466835921509630).epsilon(1e-9));
  CHECK(commitment(g, 0.0) == 0.0);
  CHECK(commitment(g, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

  const CommitmentProfile in = linear_input();
  CHECK(commitment(in, 0.25) == 0.25);
  CHECK(commitment(in, 0.0) == 0.0);
  CHECK(commitment(in, 1.0) == 1.0);

  const CommitmentProfile c = reconcile_constraint();
  CHECK(commitment(c, 0.5) == 0.5);  // reconcile shape commits linearly
}

TEST_CASE("concave commitment front-loads against the linear ramp") {
  const CommitmentProfile g = concave_goal();
  for (double t : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    CHECK(commitment(g, t) > t);
  }
  // Monotone nondecreasing on a fine grid.
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double v = commitment(g, i / 100.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("commitment rejects fractions outside the unit interval") {
  const CommitmentProfile g = concave_goal();
  CHECK_THROWS_AS(commitment(g, -0.01), std::invalid_argument);
  CHECK_THROWS_AS(commitment(g, 1.01), std::invalid_argument);
}

TEST_CASE("success probability anchors and interpolation") {
  const CommitmentProfile g = concave_goal();
  CHECK(success_probability(g, Condition::oracle()) == 0.80);
  CHECK(success_probability(g, Condition::no_clarification()) == 0.40);
  // p_nc + (p_oracle - p_nc) * (1 - 0.1^0.35), computed independently.
  const double c01 = std::exp(0.35 * std::log(0.1));
  const double expect01 = 0.40 + 0.40 * (1.0 - c01);
  CHECK(success_probability(g, Condition::injection(0.1)) ==
        doctest::Approx(expect01).epsilon(1e-12));
  CHECK(success_probability(g, Condition::injection(0.1)) ==
        doctest::Approx(0.6213265631).epsilon(1e-9));

  const CommitmentProfile in = linear_input();
  CHECK(success_probability(in, Condition::injection(0.5)) ==
        doctest::Approx(0.33 + 0.24 * 0.5).epsilon(1e-12));

  const CommitmentProfile c = reconcile_constraint();
  // Flat anchors plus a subtractive reconciliation cost r * C(t).
  CHECK(success_probability(c, Condition::oracle()) == 0.12);
  CHECK(success_probability(c, Condition::no_clarification()) == 0.12);
  CHECK(success_probability(c, Condition::injection(0.5)) ==
        doctest::Approx(0.12 - 0.1 * 0.5).epsilon(1e-12));
  CHECK(success_probability(c, Condition::injection(0.9)) ==
        doctest::Approx(0.12 - 0.1 * 0.9).epsilon(1e-12));
}

TEST_CASE("success probability clamps to the unit interval") {
  CommitmentProfile p;
  p.name = "steep";
  p.shape = CommitmentShape::constraint_reconcile;
  p.reconciliation_rate = 1.0;
  p.p_oracle = 0.10;
  p.p_nc = 0.05;
  p.trajectory_length = 5;
  // raw = 0.05 + 0.05 * (1 - 0.9) - 1.0 * 0.9 < 0, so clamp to 0.
  CHECK(success_probability(p, Condition::injection(0.9)) == 0.0);
}

TEST_CASE("later injections never help under any default profile") {
  for (const CommitmentProfile& p : default_profiles().profiles) {
    double prev = success_probability(p, Condition::oracle());
    for (int tenths : {1, 3, 5, 7, 9}) {
      const double v = success_probability(p, Condition::injection_tenths(tenths));
      CHECK(v <= prev + 1e-12);
      prev = v;
    }
    CHECK(success_probability(p, Condition::no_clarification()) <=
          success_probability(p, Condition::oracle()));
  }
}

TEST_CASE("profile validation rejects malformed profiles") {
  auto expect_reject = [](CommitmentProfile p, const char* what) {
    CAPTURE(what);
    CHECK_THROWS_AS(validate_profile(p), ConfigError);
  };
  CommitmentProfile base = concave_goal();

  CommitmentProfile p = base;
  p.name = "";
  expect_reject(p, "empty name");

  p = base;
  p.p_oracle = 1.2;
  expect_reject(p, "anchor above 1");

  p = base;
  p.p_oracle = 0.3;  // below p_nc = 0.4
  expect_reject(p, "inverted anchors");

  p = base;
  p.alpha = 0.0;
  expect_reject(p, "alpha at lower boundary");

  p = base;
  p.alpha = 1.0;
  expect_reject(p, "alpha at upper boundary");

  p = reconcile_constraint();
  p.reconciliation_rate = -0.1;
  expect_reject(p, "negative reconciliation rate");

  p = base;
  p.trajectory_length = 0;
  expect_reject(p, "zero trajectory length");

  p = base;
  p.count = 0;
  expect_reject(p, "zero count");

  CHECK_NOTHROW(validate_profile(base));
  // Linear shape ignores alpha, so an out-of-range alpha is fine there.
  p = linear_input();
  p.alpha = 5.0;
  CHECK_NOTHROW(validate_profile(p));
}

TEST_CASE("profile JSON round-trip preserves every field") {
  const CommitmentProfile g = concave_goal();
  const json j = g.to_json();
  CHECK(j.contains("alpha"));
  CHECK_FALSE(j.contains("reconciliation_rate"));
  const CommitmentProfile back = CommitmentProfile::from_json(j);
  CHECK(back.name == g.name);
  CHECK(back.dimension == g.dimension);
  CHECK(back.shape == g.shape);
  CHECK(back.alpha == g.alpha);
  CHECK(back.p_oracle == g.p_oracle);
  CHECK(back.p_nc == g.p_nc);
  CHECK(back.trajectory_length == g.trajectory_length);
  CHECK(back.benchmark == g.benchmark);
  CHECK(back.ambiguity_class == g.ambiguity_class);
  CHECK(back.count == g.count);

  const json jr = reconcile_constraint().to_json();
  CHECK(jr.contains("reconciliation_rate"));
  CHECK_FALSE(jr.contains("alpha"));
  const CommitmentProfile backr = CommitmentProfile::from_json(jr);
  CHECK(backr.reconciliation_rate == 0.1);

  // from_json validates: a profile with inverted anchors is rejected.
  json bad = j;
  bad["p_oracle"] = 0.1;
  CHECK_THROWS_AS(CommitmentProfile::from_json(bad), ConfigError);
}

TEST_CASE("synthetic prompts carry the variant id and withheld note") {
  CHECK(sim_underspecified_prompt("goal-0001") == "Task goal-0001: complete the objective.");
  const std::string value = sim_segment_value("goal-0001");
  CHECK(value == "the full requirement for task goal-0001");
  CHECK(sim_oracle_prompt("goal-0001", value) ==
        "Task goal-0001: complete the objective. Note: " + value + ".");
}

TEST_CASE("sim act walks the trajectory and then finishes") {
  const CommitmentProfile g = concave_goal();
  const auto convo = oracle_convo("goal-0000");
  for (int step = 1; step <= g.trajectory_length; ++step) {
    const SimAction a = sim_act(g, convo, step, 0);
    CHECK_FALSE(a.finished);
    CHECK(a.parameters == json{{"step", step}});
    if (step == g.trajectory_length) {
      CHECK(a.name == "produce_output");
    } else if (step % 2 == 1) {
      CHECK(a.name == "explore");
    } else {
      CHECK(a.name == "commit_step");
    }
  }
  const SimAction done = sim_act(g, convo, g.trajectory_length + 1, 0);
  CHECK(done.finished);
  CHECK(done.answer == "done");
  CHECK_THROWS_AS(sim_act(g, convo, 0, 0), std::invalid_argument);
}

TEST_CASE("sim act is deterministic in its inputs") {
  const CommitmentProfile g = concave_goal();
  const auto convo = underspecified_convo("goal-0007");
  for (int step = 1; step <= g.trajectory_length; ++step) {
    const SimAction a = sim_act(g, convo, step, 42);
    const SimAction b = sim_act(g, convo, step, 42);
    CHECK(a.name == b.name);
    CHECK(a.parameters == b.parameters);
    CHECK(a.finished == b.finished);
  }
  // Different seeds may mark different steps divergent; confirm the seed
  // actually reaches the draw by finding two seeds that disagree somewhere.
  bool any_difference = false;
  for (std::uint64_t seed = 1; seed < 50 && !any_difference; ++seed) {
    for (int step = 1; step <= g.trajectory_length; ++step) {
      if (sim_act(g, convo, step, 0).name != sim_act(g, convo, step, seed).name) {
        any_difference = true;
        break;
      }
    }
  }
  CHECK(any_difference);
}

TEST_CASE("clarified conversations never diverge") {
  const CommitmentProfile g = concave_goal();

  SUBCASE("oracle framing in the opening turn") {
    const auto convo = oracle_convo("goal-0000");
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      for (int step = 1; step <= g.trajectory_length; ++step) {
        const SimAction a = sim_act(g, convo, step, seed);
        CHECK(a.name.find("_divergent") == std::string::npos);
      }
    }
  }

  SUBCASE("a later user turn marks clarification received") {
    auto convo = underspecified_convo("goal-0000");
    convo.push_back(Turn{"assistant", "tool_call explore", false});
    convo.push_back(Turn{"user", "clarifying detail", true});
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      for (int step = 1; step <= g.trajectory_length; ++step) {
        const SimAction a = sim_act(g, convo, step, seed);
        CHECK(a.name.find("_divergent") == std::string::npos);
      }
    }
  }

  SUBCASE("an ask answer counts even when not flagged as injected") {
    auto convo = underspecified_convo("goal-0000");
    convo.push_back(Turn{"assistant", "ask_user", false});
    convo.push_back(Turn{"user", "the answer to your question", false});
    const SimAction a = sim_act(g, convo, g.trajectory_length, 3);
    CHECK(a.name == "produce_output");
  }
}

TEST_CASE("pre-clarification divergence tracks the commitment curve") {
  const CommitmentProfile g = concave_goal();
  const int trials = 4000;
  for (int step : {1, 4, 7}) {
    int divergent = 0;
    for (int i = 0; i < trials; ++i) {
      const auto convo = underspecified_convo("goal-" + std::to_string(i));
      const SimAction a = sim_act(g, convo, step, 0);
      if (a.name.find("_divergent") != std::string::npos) ++divergent;
    }
    const double expected = commitment(g, double(step) / g.trajectory_length);
    CHECK(double(divergent) / trials == doctest::Approx(expected).epsilon(0.08));
  }
  // At the final step commitment is 1, so divergence is certain.
  const auto convo = underspecified_convo("goal-0000");
  const SimAction last = sim_act(g, convo, g.trajectory_length, 11);
  CHECK(last.name == "produce_output_divergent");
}

TEST_CASE("grading is deterministic and calibrated to the profile") {
  const CommitmentProfile g = concave_goal();

  SUBCASE("same key, same verdict") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      CHECK(grade_sim(g, "goal-0000", Condition::no_clarification(), seed) ==
            grade_sim(g, "goal-0000", Condition::no_clarification(), seed));
    }
  }

  SUBCASE("degenerate probabilities are exact") {
    CommitmentProfile sure = g;
    sure.p_oracle = 1.0;
    sure.p_nc = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      CHECK(grade_sim(sure, "goal-0000", Condition::oracle(), seed));
      CHECK_FALSE(grade_sim(sure, "goal-0000", Condition::no_clarification(), seed));
    }
  }

  SUBCASE("long-run frequency approaches the success probability") {
    const int n = 5000;
    for (const Condition& c :
         {Condition::oracle(), Condition::no_clarification(), Condition::injection(0.5)}) {
      int hits = 0;
      char idx[16];
      for (int i = 0; i < n; ++i) {
        std::snprintf(idx, sizeof idx, "%04d", i);
        if (grade_sim(g, std::string("goal-") + idx, c, 0)) ++hits;
      }
      const double expected = success_probability(g, c);
      // Deterministic draw; tolerance covers hash-stream binomial spread.
      CHECK(double(hits) / n == doctest::Approx(expected).epsilon(0.05));
    }
  }

  SUBCASE("conditions draw from distinct streams") {
    // With flat anchors the probabilities match, yet verdicts may differ
    // because the draw is keyed by the condition string too.
    CommitmentProfile flat = reconcile_constraint();
    flat.p_oracle = 0.5;
    flat.p_nc = 0.5;
    flat.reconciliation_rate = 0.0;
    bool any_difference = false;
    for (int i = 0; i < 200 && !any_difference; ++i) {
      const std::string vid = "constraint-" + std::to_string(i);
      if (grade_sim(flat, vid, Condition::oracle(), 0) !=
          grade_sim(flat, vid, Condition::no_clarification(), 0)) {
        any_difference = true;
      }
    }
    CHECK(any_difference);
  }
}

TEST_CASE("variant synthesis expands a profile into a graded corpus") {
  CommitmentProfile g = concave_goal();
  g.count = 50;
  const std::vector<TaskVariant> variants = synthesize_variants(g);
  REQUIRE(variants.size() == 50);
  CHECK(variants.front().variant_id == "goal-0000");
  CHECK(variants.back().variant_id == "goal-0049");

  std::set<std::string> ids;
  for (const TaskVariant& v : variants) {
    ids.insert(v.variant_id);
    CHECK(validate_variant(v).empty());
    CHECK(v.benchmark == "sim");
    CHECK(v.grader.kind == "sim");
    CHECK(v.primary_dimension == Dimension::goal);
    CHECK(v.ambiguity_class == AmbiguityClass::outcome_critical);
    REQUIRE(v.removed_segments.size() == 1);
    CHECK(v.removed_segments[0].dimension == Dimension::goal);
    CHECK(v.removed_segments[0].value == sim_segment_value(v.variant_id));
    CHECK(v.underspecified_prompt == sim_underspecified_prompt(v.variant_id));
    CHECK(v.oracle_prompt ==
          sim_oracle_prompt(v.variant_id, v.removed_segments[0].value));
  }
  CHECK(ids.size() == 50);

  CommitmentProfile bad = g;
  bad.p_oracle = 0.1;
  CHECK_THROWS_AS(synthesize_variants(bad), ConfigError);
}

TEST_CASE("profile set resolves variants by id prefix") {
  const ProfileSet set = default_profiles();
  REQUIRE(set.profiles.size() == 4);

  const CommitmentProfile* goal = set.for_variant("goal-0012");
  REQUIRE(goal != nullptr);
  CHECK(goal->name == "goal");
  CHECK(goal->shape == CommitmentShape::concave);
  CHECK(goal->p_oracle == 0.80);
  CHECK(goal->p_nc == 0.40);
  CHECK(goal->trajectory_length == 7);
  CHECK(goal->ambiguity_class == AmbiguityClass::outcome_critical);

  const CommitmentProfile* input = set.for_variant("input-0000");
  REQUIRE(input != nullptr);
  CHECK(input->shape == CommitmentShape::linear);
  CHECK(input->p_oracle == 0.57);
  CHECK(input->p_nc == 0.33);
  CHECK(input->trajectory_length == 12);
  CHECK(input->ambiguity_class == AmbiguityClass::divergent);

  const CommitmentProfile* constraint = set.for_variant("constraint-0031");
  REQUIRE(constraint != nullptr);
  CHECK(constraint->shape == CommitmentShape::constraint_reconcile);
  CHECK(constraint->p_oracle == 0.12);
  CHECK(constraint->p_nc == 0.12);
  CHECK(constraint->reconciliation_rate == 0.1);
  CHECK(constraint->trajectory_length == 9);

  const CommitmentProfile* context = set.for_variant("context-0007");
  REQUIRE(context != nullptr);
  CHECK(context->shape == CommitmentShape::concave);
  CHECK(context->p_oracle == 0.80);
  CHECK(context->p_nc == 0.60);
  CHECK(context->ambiguity_class == AmbiguityClass::benign);

  for (const CommitmentProfile& p : set.profiles) {
    CHECK(p.count == 50);
    CHECK(p.benchmark == "sim");
  }

  CHECK(set.for_variant("nope-0001") == nullptr);
  // No dash: the whole id is the prefix.
  CHECK(set.for_variant("goal") == goal);
  // Multi-dash ids strip only the final index component.
  ProfileSet two;
  CommitmentProfile named = concave_goal();
  named.name = "goal-extra";
  two.profiles.push_back(named);
  CHECK(two.for_variant("goal-extra-0001") == &two.profiles[0]);
}

TEST_CASE("profile sets load from bare arrays or wrapped objects") {
  const json arr = json::array({concave_goal().to_json()});
  CHECK(ProfileSet::from_json(arr).profiles.size() == 1);
  const json wrapped = json{{"profiles", arr}};
  CHECK(ProfileSet::from_json(wrapped).profiles.size() == 1);
  CHECK_THROWS_AS(ProfileSet::from_json(json::object()), ConfigError);
  CHECK_THROWS_AS(ProfileSet::from_json(json::array()), ConfigError);

  askwhen::testing::TempDir dir;
  CHECK_THROWS_AS(ProfileSet::load(dir.sub("missing.json")), ConfigError);
}
