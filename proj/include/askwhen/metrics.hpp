#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "askwhen/trial.hpp"

namespace askwhen {

// Probability that at least one of k trials drawn without replacement from a
// cell of n trials with c successes succeeds: 1 - C(n-c,k)/C(n,k). Exact
// rational arithmetic (128-bit running fraction) for n <= 64, which covers
// every practical cell; the factor-by-factor product form beyond that, well
// defined through n = 10,000. Requires 0 <= c <= n and 1 <= k <= n.
double pass_at_k(int n, int c, int k);

struct CellSummary {
  std::string model;
  std::string variant_id;
  Condition condition = Condition::oracle();
  int n_trials = 0;
  int n_success = 0;
  int k_used = 0;
  double pass_at_k_value = 0.0;
};

// Groups graded trials into (model, variant, condition) cells and computes
// pass@k with k = min(k, cell size). Trials annotated "ungraded:" carry no
// verdict and are left out; errored-but-graded failures count as failures.
// Cells come back sorted by (model, variant_id, condition).
std::vector<CellSummary> cell_summaries(const std::vector<Trial>& trials, int k = 3);

struct GroupMean {
  double mean = 0.0;
  std::size_t n_cells = 0;
};

// Mean of pass@k over cells sharing a key, each cell weighted equally.
std::map<std::string, GroupMean> group_mean(
    const std::vector<CellSummary>& cells,
    const std::function<std::string(const CellSummary&)>& key);

enum class WastedMode { fraction, absolute };

// Pre-injection actions of an injection trial that have no counterpart in
// the oracle trace, under multiset matching on (action name, argument map)
// with string argument values compared case- and whitespace-insensitively.
// fraction mode divides by pre_injection_actions (0 pre-injection actions
// yield 0.0); absolute mode returns the raw count. Throws on a
// non-injection trial.
double wasted_compute(const Trial& trial, const std::vector<Action>& oracle_trace,
                      WastedMode mode);

// Oracle trial whose trajectory length is the median of the given oracle
// trials (lower median for even counts; ties broken by seed order). Used to
// pick the reference trace for wasted-compute diffs.
const Trial& select_oracle_trace(const std::vector<Trial>& oracle_trials);

struct AskSummary {
  std::size_t sessions = 0;
  std::size_t asking_sessions = 0;
  double ask_rate = 0.0;
  std::size_t total_ask_calls = 0;
  // First-ask action index over total actions, across asking sessions.
  // Absent exactly when no session asked.
  std::optional<double> mean_first_ask_timing;
  std::optional<double> median_first_ask_timing;
  double calls_per_asking_session = 0.0;
};

// Ask-behavior bookkeeping over natural-protocol sessions.
AskSummary ask_stats(const std::vector<Trial>& sessions);

}  // namespace askwhen
