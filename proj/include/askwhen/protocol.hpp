#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "askwhen/archive.hpp"
#include "askwhen/gateway.hpp"
#include "askwhen/sim_agent.hpp"
#include "askwhen/templates.hpp"
#include "askwhen/trial.hpp"

namespace askwhen {

// Per-(model, variant) action budget, calibrated from oracle runs.
struct Budget {
  std::string model;
  std::string variant_id;
  int value = 1;
};

// Mean of the oracle trajectory lengths, rounded half-up, never below 1.
// Throws ConfigError on an empty length list.
int calibrate_budget(const std::vector<int>& oracle_lengths);

// Action index after which the clarification is injected:
// max(1, floor(budget * fraction)). Exact integer arithmetic; the fraction
// must be one of the five condition fractions.
int injection_action(int budget, double fraction);
int injection_action(int budget, const Condition& condition);

struct InjectionPlan {
  Condition condition = Condition::injection_tenths(1);
  int budget = 1;
  int inject_action = 1;
};

InjectionPlan plan_injection(int budget, const Condition& condition);

struct EngineOptions {
  int max_actions_per_trial = 512;
  MessageTemplates templates = MessageTemplates::defaults();
  // Tools offered on every request (the ask tool is appended for natural
  // sessions). Defaults to the simulator's action vocabulary.
  std::vector<ToolDescriptor> base_tools;

  EngineOptions();
};

// The simulator's action vocabulary as tool descriptors.
std::vector<ToolDescriptor> sim_tool_catalog();

// Runs one forced-protocol trial. The ask tool is never offered. For
// injection conditions `plan` must be present; the synthetic clarification
// is delivered as an injected user turn immediately after the planned
// action's result (or, if the agent finishes early, after its last action,
// with an "early-termination injection" annotation).
//
// Transport failures and protocol violations mark the trial failed with an
// annotation instead of propagating; the trial always comes back recordable.
Trial run_forced_trial(const TaskVariant& variant, AgentHandle& agent,
                       const std::string& model, const Condition& condition,
                       std::uint64_t seed, const std::optional<InjectionPlan>& plan,
                       const EngineOptions& opts, const ProfileSet* profiles = nullptr);

// Runs one natural-ask session: underspecified prompt plus the auto-grader
// notice, ask tool offered, every ask answered with the rendered withheld
// segments. Recorded under the no-clarification condition with ask_events
// filled in.
Trial run_natural_session(const TaskVariant& variant, AgentHandle& agent,
                          const std::string& model, std::uint64_t seed,
                          const EngineOptions& opts, const ProfileSet* profiles = nullptr);

// True if the trial carries a transport, protocol, grading, or action-limit
// annotation (as opposed to an honest graded failure).
bool trial_errored(const Trial& t);

using ProgressFn = std::function<void(const std::string& model,
                                      const std::string& variant_id,
                                      std::size_t trials_done)>;

struct ExperimentConfig {
  std::string protocol = "forced";  // "forced" | "natural"
  std::vector<TaskVariant> variants;
  std::vector<AgentEndpoint> agents;
  std::vector<Condition> conditions = Condition::all();  // forced protocol only
  int trials_per_cell = 3;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int parallelism = 1;
  std::string out_dir;
  std::string config_hash;
  const ProfileSet* profiles = nullptr;
  EngineOptions engine;
  ProgressFn progress;
};

struct RunResult {
  std::string archive_dir;
  std::size_t trials_recorded = 0;
  std::size_t cells_total = 0;
  std::size_t cells_wholly_failed = 0;
  std::vector<SkippedCell> skipped;
};

// Runs the full (agents x variants) grid, one cell at a time per worker, and
// writes the archive. Cells execute concurrently up to `parallelism`, but
// trials are appended in canonical grid order (agent, variant, condition,
// seed), so reruns with the same config are byte-identical apart from
// duration_seconds. Within a forced-protocol cell, oracle trials run first
// to calibrate the budget; if none of them terminates, the cell's injection
// conditions are skipped and recorded in the manifest.
RunResult run_experiment(const ExperimentConfig& config);

}  // namespace askwhen
