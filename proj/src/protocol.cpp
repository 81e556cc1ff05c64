#include "askwhen/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <numeric>
#include <thread>

#include "askwhen/errors.hpp"

namespace askwhen {

int calibrate_budget(const std::vector<int>& oracle_lengths) {
  if (oracle_lengths.empty()) {
    throw ConfigError("cannot calibrate budget from zero oracle runs");
  }
  long long sum = 0;
  for (int len : oracle_lengths) {
    if (len < 0) throw ConfigError("negative trajectory length");
    sum += len;
  }
  const long long n = (long long)oracle_lengths.size();
  // Round half-up of sum/n without touching floats: floor((2*sum + n) / (2*n)).
  const long long value = (2 * sum + n) / (2 * n);
  return int(std::max(1LL, value));
}

int injection_action(int budget, double fraction) {
  return injection_action(budget, Condition::injection(fraction));
}

int injection_action(int budget, const Condition& condition) {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (!condition.is_injection()) {
    throw ConfigError("injection_action needs an injection condition");
  }
  const int floored = budget * condition.fraction_tenths() / 10;
  return std::max(1, floored);
}

InjectionPlan plan_injection(int budget, const Condition& condition) {
  InjectionPlan p;
  p.condition = condition;
  p.budget = budget;
  p.inject_action = injection_action(budget, condition);
  return p;
}

std::vector<ToolDescriptor> sim_tool_catalog() {
  std::vector<ToolDescriptor> out;
  for (const char* base : {"explore", "commit_step", "produce_output"}) {
    for (const char* suffix : {"", "_divergent"}) {
      ToolDescriptor t;
      t.name = std::string(base) + suffix;
      t.description = "Simulator trajectory step.";
      ToolParam step;
      step.name = "step";
      step.semantic_type = "integer";
      step.description = "1-based trajectory position.";
      step.required = true;
      t.params = {step};
      out.push_back(std::move(t));
    }
  }
  return out;
}

EngineOptions::EngineOptions() : base_tools(sim_tool_catalog()) {}

bool trial_errored(const Trial& t) {
  for (const std::string& a : t.annotations) {
    if (a.rfind("transport-failure:", 0) == 0 || a.rfind("protocol-violation:", 0) == 0 ||
        a.rfind("ungraded:", 0) == 0 || a == "action-limit") {
      return true;
    }
  }
  return false;
}

namespace {

struct TrialRun {
  Trial trial;
  bool finished = false;  // agent reached its finish response
};

void grade_into(Trial& t, const TaskVariant& variant, const ProfileSet* profiles) {
  if (trial_errored(t)) {
    // Transport failures, protocol violations, and capped sessions are
    // failures by fiat; the grader never sees them.
    t.task_success = false;
    return;
  }
  try {
    t.task_success = grade(variant.grader, t, profiles);
  } catch (const GradingError& e) {
    t.task_success = false;
    t.annotations.push_back(std::string("ungraded: ") + e.what());
  }
}

// Core loop shared by both protocols. `inject_after` delivers the forced
// clarification after that action index; `ask_answer` non-empty enables the
// natural protocol's ask handling.
TrialRun drive_trial(const TaskVariant& variant, AgentHandle& agent,
                     const std::string& model, const Condition& condition,
                     std::uint64_t seed, const std::optional<InjectionPlan>& plan,
                     const std::string& opening_prompt,
                     const std::vector<ToolDescriptor>& tools,
                     const std::string& ask_answer, const EngineOptions& opts) {
  TrialRun run;
  Trial& t = run.trial;
  t.variant_id = variant.variant_id;
  t.model = model;
  t.condition = condition;
  t.seed = seed;
  t.conversation.push_back(Turn{"user", opening_prompt, false});

  const auto started = std::chrono::steady_clock::now();
  agent.begin_trial(variant.variant_id, seed);

  bool injected = false;
  const int planned = plan ? plan->inject_action : -1;
  try {
    for (int step = 1; step <= opts.max_actions_per_trial; ++step) {
      AgentRequest req;
      req.conversation = t.conversation;
      req.tools = tools;
      req.step_index = step;
      req.max_actions_remaining = opts.max_actions_per_trial - step + 1;
      const AgentResponse resp = agent.exchange(req);

      if (resp.kind == AgentResponse::Kind::finish) {
        t.conversation.push_back(Turn{"assistant", resp.answer, false});
        run.finished = true;
        break;
      }

      Action a;
      a.index = step;
      if (resp.kind == AgentResponse::Kind::message) {
        a.name = "message";
        t.conversation.push_back(Turn{"assistant", resp.text, false});
      } else {
        a.name = resp.tool_name;
        a.parameters = resp.arguments;
        t.conversation.push_back(
            Turn{"assistant", "[" + resp.tool_name + "] " + resp.arguments.dump(), false});
        if (resp.tool_name == "ask_user") {
          std::string question;
          if (resp.arguments.contains("question") && resp.arguments["question"].is_string()) {
            question = resp.arguments["question"].get<std::string>();
          } else {
            throw ProtocolViolation("ask_user call without a question argument");
          }
          t.ask_events.push_back(AskEvent{step, question});
          a.result = ask_answer;
          t.conversation.push_back(Turn{"user", ask_answer, false});
        } else {
          a.result = "ok";
          t.conversation.push_back(Turn{"tool", "ok", false});
        }
      }
      a.is_pre_injection = plan.has_value() && !injected;
      t.actions.push_back(a);

      if (plan && !injected && step == planned) {
        const std::string msg = opts.templates.render(variant.removed_segments);
        t.conversation.push_back(Turn{"user", msg, true});
        injected = true;
      }
    }
    if (!run.finished) t.annotations.push_back("action-limit");
  } catch (const TransportError& e) {
    t.annotations.push_back(std::string("transport-failure: ") + e.what());
  } catch (const ProtocolViolation& e) {
    t.annotations.push_back(std::string("protocol-violation: ") + e.what());
  }

  // A forced clarification that never fired (early finish, failure, or cap)
  // is still delivered ahead of grading so every injection trial contains it.
  if (plan && !injected) {
    const std::string msg = opts.templates.render(variant.removed_segments);
    t.conversation.push_back(Turn{"user", msg, true});
    if (run.finished) {
      t.annotations.push_back("early-termination injection (planned action " +
                             std::to_string(planned) + ")");
    }
  }

  t.total_actions = int(t.actions.size());
  if (plan) {
    t.injection_point = injected ? planned : t.total_actions;
    t.pre_injection_actions = *t.injection_point;
    t.post_injection_actions = t.total_actions - t.pre_injection_actions;
    for (Action& a : t.actions) a.is_pre_injection = a.index <= *t.injection_point;
  } else {
    t.pre_injection_actions = 0;
    t.post_injection_actions = t.total_actions;
  }

  t.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

}  // namespace

Trial run_forced_trial(const TaskVariant& variant, AgentHandle& agent,
                       const std::string& model, const Condition& condition,
                       std::uint64_t seed, const std::optional<InjectionPlan>& plan,
                       const EngineOptions& opts, const ProfileSet* profiles) {
  if (condition.is_injection() && !plan) {
    throw ConfigError("injection condition needs an injection plan");
  }
  if (!condition.is_injection() && plan) {
    throw ConfigError("injection plan given for non-injection condition");
  }
  const std::string prompt = condition.kind() == Condition::Kind::oracle
                                 ? variant.oracle_prompt
                                 : variant.underspecified_prompt;
  TrialRun run = drive_trial(variant, agent, model, condition, seed, plan, prompt,
                             opts.base_tools, std::string(), opts);
  grade_into(run.trial, variant, profiles);
  return run.trial;
}

Trial run_natural_session(const TaskVariant& variant, AgentHandle& agent,
                          const std::string& model, std::uint64_t seed,
                          const EngineOptions& opts, const ProfileSet* profiles) {
  std::vector<ToolDescriptor> tools = opts.base_tools;
  tools.push_back(ask_user_tool());
  const std::string prompt =
      variant.underspecified_prompt + "\n\n" + ask_prompt_suffix();
  const std::string answer = opts.templates.render(variant.removed_segments);
  TrialRun run = drive_trial(variant, agent, model, Condition::no_clarification(), seed,
                             std::nullopt, prompt, tools, answer, opts);
  grade_into(run.trial, variant, profiles);
  return run.trial;
}

namespace {

struct CellOutcome {
  std::vector<Trial> trials;
  std::optional<SkippedCell> skipped;
  bool wholly_failed = false;
};

CellOutcome run_cell(const ExperimentConfig& config, const AgentEndpoint& endpoint,
                     const TaskVariant& variant) {
  CellOutcome out;
  std::unique_ptr<AgentHandle> handle;
  auto session = [&]() -> AgentHandle& {
    if (!handle) handle = open_session(endpoint, config.profiles);
    return *handle;
  };
  auto run_one = [&](const Condition& c, std::uint64_t seed,
                     const std::optional<InjectionPlan>& plan) {
    Trial t;
    try {
      t = config.protocol == "natural"
              ? run_natural_session(variant, session(), endpoint.id, seed,
                                    config.engine, config.profiles)
              : run_forced_trial(variant, session(), endpoint.id, c, seed, plan,
                                 config.engine, config.profiles);
    } catch (const TransportError& e) {
      // Session could not even open; synthesize the failed record.
      t = Trial();
      t.variant_id = variant.variant_id;
      t.model = endpoint.id;
      t.condition = c;
      t.seed = seed;
      if (c.is_injection()) {
        t.injection_point = 0;
      }
      t.annotations.push_back(std::string("transport-failure: ") + e.what());
      handle.reset();
    }
    if (trial_errored(t)) handle.reset();  // next trial gets a fresh session
    out.trials.push_back(std::move(t));
  };

  if (config.protocol == "natural") {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      run_one(Condition::no_clarification(), config.seeds[i], std::nullopt);
    }
  } else {
    std::vector<Condition> conditions = config.conditions;
    std::sort(conditions.begin(), conditions.end());
    conditions.erase(std::unique(conditions.begin(), conditions.end()), conditions.end());

    const bool wants_oracle =
        std::find(conditions.begin(), conditions.end(), Condition::oracle()) !=
        conditions.end();
    const bool wants_injection =
        std::any_of(conditions.begin(), conditions.end(),
                    [](const Condition& c) { return c.is_injection(); });

    std::vector<int> oracle_lengths;
    if (wants_oracle) {
      for (std::uint64_t seed : config.seeds) {
        run_one(Condition::oracle(), seed, std::nullopt);
        const Trial& t = out.trials.back();
        if (!trial_errored(t)) oracle_lengths.push_back(t.total_actions);
      }
    }

    std::optional<int> budget;
    if (wants_injection) {
      if (!oracle_lengths.empty()) {
        budget = calibrate_budget(oracle_lengths);
      } else {
        out.skipped = SkippedCell{
            endpoint.id, variant.variant_id,
            wants_oracle ? "uncalibrated: no oracle trial terminated"
                         : "uncalibrated: no oracle condition in run"};
      }
    }

    for (const Condition& c : conditions) {
      if (c.kind() == Condition::Kind::oracle) continue;
      if (c.is_injection() && !budget) continue;
      const std::optional<InjectionPlan> plan =
          c.is_injection() ? std::optional<InjectionPlan>(plan_injection(*budget, c))
                           : std::nullopt;
      for (std::uint64_t seed : config.seeds) run_one(c, seed, plan);
    }
  }

  if (handle) handle->close();
  out.wholly_failed =
      out.trials.empty() ||
      std::all_of(out.trials.begin(), out.trials.end(),
                  [](const Trial& t) { return trial_errored(t); });
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("experiment needs an output directory");
  if (config.agents.empty()) throw ConfigError("experiment needs at least one agent");
  if (config.variants.empty()) throw ConfigError("experiment needs at least one variant");
  if (config.protocol != "forced" && config.protocol != "natural") {
    throw ConfigError("unknown protocol: " + config.protocol);
  }
  if (config.trials_per_cell < 1) throw ConfigError("trials_per_cell must be >= 1");
  if (config.seeds.size() != std::size_t(config.trials_per_cell)) {
    throw ConfigError("seed list length must equal trials_per_cell");
  }
  if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");

  std::vector<std::string> problems;
  for (const TaskVariant& v : config.variants) {
    for (const std::string& violation : validate_variant(v)) {
      problems.push_back(v.variant_id + ": " + violation);
    }
  }
  {
    // Duplicate ids would make cells collide during analysis.
    std::vector<std::string> ids;
    for (const TaskVariant& v : config.variants) ids.push_back(v.variant_id);
    std::sort(ids.begin(), ids.end());
    const auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) problems.push_back("duplicate variant_id: " + *dup);
  }
  if (!problems.empty()) {
    std::string msg = "invalid variant corpus:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }

  struct CellJob {
    const AgentEndpoint* endpoint;
    const TaskVariant* variant;
  };
  std::vector<CellJob> jobs;
  for (const AgentEndpoint& a : config.agents) {
    for (const TaskVariant& v : config.variants) jobs.push_back(CellJob{&a, &v});
  }

  std::vector<CellOutcome> outcomes(jobs.size());
  std::mutex mu;
  std::size_t next_job = 0;
  std::exception_ptr worker_error;

  auto worker = [&]() {
    for (;;) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next_job >= jobs.size() || worker_error) return;
        idx = next_job++;
      }
      try {
        CellOutcome outcome = run_cell(config, *jobs[idx].endpoint, *jobs[idx].variant);
        std::lock_guard<std::mutex> lock(mu);
        if (config.progress) {
          config.progress(jobs[idx].endpoint->id, jobs[idx].variant->variant_id,
                          outcome.trials.size());
        }
        outcomes[idx] = std::move(outcome);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!worker_error) worker_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(std::size_t(config.parallelism), jobs.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (std::thread& th : threads) th.join();
  }
  if (worker_error) std::rethrow_exception(worker_error);

  ArchiveWriter writer(config.out_dir);
  RunResult result;
  result.archive_dir = config.out_dir;
  result.cells_total = jobs.size();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (const Trial& t : outcomes[i].trials) writer.append(t);
    result.trials_recorded += outcomes[i].trials.size();
    if (outcomes[i].skipped) result.skipped.push_back(*outcomes[i].skipped);
    if (outcomes[i].wholly_failed) ++result.cells_wholly_failed;
  }

  Manifest manifest;
  manifest.config_hash = config.config_hash;
  manifest.protocol = config.protocol;
  manifest.seeds = config.seeds;
  for (const AgentEndpoint& a : config.agents) manifest.agents.push_back(a.id);
  for (const TaskVariant& v : config.variants) {
    manifest.variants[v.variant_id] =
        VariantMeta{v.benchmark, v.primary_dimension, v.ambiguity_class};
  }
  if (config.protocol == "natural") {
    manifest.conditions = {Condition::no_clarification().key()};
  } else {
    std::vector<Condition> conditions = config.conditions;
    std::sort(conditions.begin(), conditions.end());
    conditions.erase(std::unique(conditions.begin(), conditions.end()), conditions.end());
    for (const Condition& c : conditions) manifest.conditions.push_back(c.key());
  }
  manifest.skipped_cells = result.skipped;
  writer.write_manifest(manifest);
  return result;
}

}  // namespace askwhen
