#include "askwhen/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace askwhen {

namespace {

using u128 = unsigned __int128;

u128 gcd_u128(u128 a, u128 b) {
  while (b != 0) {
    const u128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

double pass_at_k(int n, int c, int k) {
  if (n < 0 || c < 0 || c > n) {
    throw std::invalid_argument("pass_at_k: need 0 <= c <= n");
  }
  if (k < 1 || k > n) {
    throw std::invalid_argument("pass_at_k: need 1 <= k <= n");
  }
  if (n - c < k) return 1.0;  // every k-subset contains a success
  if (c == 0) return 0.0;
  if (n <= 64) {
    u128 num = 1;
    u128 den = 1;
    for (int i = 0; i < k; ++i) {
      num *= u128(n - c - i);
      den *= u128(n - i);
      const u128 g = gcd_u128(num, den);
      num /= g;
      den /= g;
    }
    return double(den - num) / double(den);
  }
  double ratio = 1.0;
  for (int i = 0; i < k; ++i) {
    ratio *= double(n - c - i) / double(n - i);
  }
  return 1.0 - ratio;
}

std::vector<CellSummary> cell_summaries(const std::vector<Trial>& trials, int k) {
  if (k < 1) throw std::invalid_argument("cell_summaries: k must be >= 1");
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<int, int>> cells;
  std::map<std::tuple<std::string, std::string, std::string>, Condition> conditions;
  for (const Trial& t : trials) {
    bool ungraded = false;
    for (const std::string& a : t.annotations) {
      if (a.rfind("ungraded:", 0) == 0) { ungraded = true; break; }
    }
    if (ungraded) continue;
    const auto key = std::make_tuple(t.model, t.variant_id, t.condition.key());
    auto& [n, c] = cells[key];
    ++n;
    if (t.task_success) ++c;
    conditions.emplace(key, t.condition);
  }
  std::vector<CellSummary> out;
  out.reserve(cells.size());
  for (const auto& [key, counts] : cells) {
    CellSummary s;
    s.model = std::get<0>(key);
    s.variant_id = std::get<1>(key);
    s.condition = conditions.at(key);
    s.n_trials = counts.first;
    s.n_success = counts.second;
    s.k_used = std::min(k, s.n_trials);
    s.pass_at_k_value = pass_at_k(s.n_trials, s.n_success, s.k_used);
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::string, GroupMean> group_mean(
    const std::vector<CellSummary>& cells,
    const std::function<std::string(const CellSummary&)>& key) {
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const CellSummary& c : cells) {
    auto& [sum, n] = sums[key(c)];
    sum += c.pass_at_k_value;
    ++n;
  }
  std::map<std::string, GroupMean> out;
  for (const auto& [k, v] : sums) {
    out[k] = GroupMean{v.first / double(v.second), v.second};
  }
  return out;
}

namespace {

std::string normalize_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  bool started = false;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (started) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(char(std::tolower(static_cast<unsigned char>(ch))));
    started = true;
  }
  return out;
}

json normalize_params(const json& params) {
  if (!params.is_object()) return params;
  json out = json::object();
  for (auto it = params.begin(); it != params.end(); ++it) {
    if (it.value().is_string()) {
      out[it.key()] = normalize_text(it.value().get<std::string>());
    } else {
      out[it.key()] = it.value();
    }
  }
  return out;
}

std::string action_match_key(const Action& a) {
  return a.name + "\x1f" + normalize_params(a.parameters).dump();
}

}  // namespace

double wasted_compute(const Trial& trial, const std::vector<Action>& oracle_trace,
                      WastedMode mode) {
  if (!trial.condition.is_injection()) {
    throw std::invalid_argument("wasted_compute: trial is not an injection trial");
  }
  std::map<std::string, int> available;
  for (const Action& a : oracle_trace) ++available[action_match_key(a)];
  int pre = 0;
  int wasted = 0;
  for (const Action& a : trial.actions) {
    if (!a.is_pre_injection) continue;
    ++pre;
    auto it = available.find(action_match_key(a));
    if (it != available.end() && it->second > 0) {
      --it->second;
    } else {
      ++wasted;
    }
  }
  if (mode == WastedMode::absolute) return double(wasted);
  return pre == 0 ? 0.0 : double(wasted) / double(pre);
}

const Trial& select_oracle_trace(const std::vector<Trial>& oracle_trials) {
  if (oracle_trials.empty()) {
    throw std::invalid_argument("select_oracle_trace: no oracle trials");
  }
  std::vector<std::size_t> order(oracle_trials.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (oracle_trials[a].total_actions != oracle_trials[b].total_actions) {
      return oracle_trials[a].total_actions < oracle_trials[b].total_actions;
    }
    return oracle_trials[a].seed < oracle_trials[b].seed;
  });
  return oracle_trials[order[(order.size() - 1) / 2]];
}

AskSummary ask_stats(const std::vector<Trial>& sessions) {
  if (sessions.empty()) {
    throw std::invalid_argument("ask_stats: no sessions given");
  }
  AskSummary s;
  s.sessions = sessions.size();
  std::vector<double> first_timings;
  for (const Trial& t : sessions) {
    s.total_ask_calls += t.ask_events.size();
    if (t.ask_events.empty()) continue;
    ++s.asking_sessions;
    if (t.total_actions <= 0) {
      throw std::invalid_argument("ask_stats: asking session with no actions");
    }
    first_timings.push_back(double(t.ask_events.front().action_index) /
                            double(t.total_actions));
  }
  s.ask_rate = double(s.asking_sessions) / double(s.sessions);
  if (s.asking_sessions > 0) {
    double sum = 0.0;
    for (double v : first_timings) sum += v;
    s.mean_first_ask_timing = sum / double(first_timings.size());
    std::vector<double> sorted = first_timings;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median_first_ask_timing =
        n % 2 == 1 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    s.calls_per_asking_session = double(s.total_ask_calls) / double(s.asking_sessions);
  }
  return s;
}

}  // namespace askwhen
