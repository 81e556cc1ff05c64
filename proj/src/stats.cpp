#include "askwhen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "askwhen/counter_rng.hpp"

namespace askwhen {

namespace {

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / double(v.size());
}

// C(n, k), saturating at cap + 1. Intermediate values are themselves
// binomials bounded by the final count, so saturation is safe to check per
// step.
std::size_t choose_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned long long result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    result = result * (n - k + i) / i;
    if (result > cap) return cap + 1;
  }
  return std::size_t(result);
}

double subset_mean_diff(const std::vector<double>& pool, const std::vector<char>& in_a,
                        std::size_t na) {
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (in_a[i] ? sum_a : sum_b) += pool[i];
  }
  return sum_a / double(na) - sum_b / double(pool.size() - na);
}

}  // namespace

StatResult permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                            std::size_t n_permutations, std::uint64_t seed,
                            PermutationMode mode) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("permutation_test: both groups must be non-empty");
  }
  if (n_permutations == 0) {
    throw std::invalid_argument("permutation_test: n_permutations must be >= 1");
  }
  const std::size_t na = a.size();
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());

  StatResult result;
  result.statistic = mean_of(a) - mean_of(b);

  double max_abs = 0.0;
  for (double v : pool) max_abs = std::max(max_abs, std::fabs(v));
  const double eps = 1e-12 * std::max(1.0, max_abs);
  const double threshold = result.statistic - eps;

  const std::size_t exact_cap =
      std::max<std::size_t>(n_permutations, std::size_t(1) << 22);
  const std::size_t exact_total = choose_capped(pool.size(), na, exact_cap);
  if (mode == PermutationMode::exact && exact_total > exact_cap) {
    throw std::invalid_argument(
        "permutation_test: exact enumeration infeasible for these group sizes");
  }
  const bool exact = mode == PermutationMode::exact ||
                     (mode == PermutationMode::automatic && exact_total <= n_permutations);

  if (exact) {
    // Walk every labeling via the standard combination successor.
    std::vector<std::size_t> idx(na);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<char> in_a(pool.size(), 0);
    std::size_t total = 0;
    std::size_t hits = 0;
    for (;;) {
      std::fill(in_a.begin(), in_a.end(), 0);
      for (std::size_t i : idx) in_a[i] = 1;
      ++total;
      if (subset_mean_diff(pool, in_a, na) >= threshold) ++hits;
      // next combination
      std::size_t i = na;
      while (i > 0) {
        --i;
        if (idx[i] != i + pool.size() - na) {
          ++idx[i];
          for (std::size_t j = i + 1; j < na; ++j) idx[j] = idx[j - 1] + 1;
          break;
        }
        if (i == 0) {
          result.p_value = double(hits) / double(total);
          result.method = "permutation-exact";
          result.n_permutations = total;
          return result;
        }
      }
    }
  }

  CounterRng rng("perm|" + std::to_string(seed));
  std::vector<double> shuffled = pool;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < n_permutations; ++p) {
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
      const std::size_t j = std::size_t(rng.next_below(i + 1));
      std::swap(shuffled[i], shuffled[j]);
    }
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      (i < na ? sum_a : sum_b) += shuffled[i];
    }
    const double stat = sum_a / double(na) - sum_b / double(shuffled.size() - na);
    if (stat >= threshold) ++hits;
  }
  result.p_value = double(1 + hits) / double(1 + n_permutations);
  result.method = "permutation";
  result.n_permutations = n_permutations;
  return result;
}

PonrResult point_of_no_return(const std::map<int, std::vector<double>>& injection_cells,
                              const std::vector<double>& nc_cells, double alpha,
                              std::size_t n_permutations, std::uint64_t seed) {
  if (nc_cells.empty()) {
    throw std::invalid_argument("point_of_no_return: no NC cells");
  }
  PonrResult out;
  out.alpha = alpha;
  out.n_comparisons = injection_cells.size();
  if (injection_cells.empty()) return out;
  const double corrected_alpha = alpha / double(out.n_comparisons);
  for (const auto& [tenths, values] : injection_cells) {
    const Condition c = Condition::injection_tenths(tenths);
    if (values.empty()) {
      throw std::invalid_argument("point_of_no_return: empty cell at fraction " +
                                  c.fraction_string());
    }
    const std::uint64_t fraction_seed =
        fnv1a64("ponr|" + std::to_string(seed) + "|" + c.fraction_string());
    StatResult r = permutation_test(values, nc_cells, n_permutations, fraction_seed);
    r.corrected = true;
    r.correction_factor = double(out.n_comparisons);
    if (r.p_value < corrected_alpha) out.fraction = c;
    out.per_fraction[c.fraction_string()] = std::move(r);
  }
  return out;
}

namespace {

struct PairData {
  std::vector<double> x;
  std::vector<double> y;
};

PairData complete_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("kendall_tau: vectors differ in length");
  }
  PairData out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    out.x.push_back(x[i]);
    out.y.push_back(y[i]);
  }
  return out;
}

// Inversions in v (pairs i < j with v[i] > v[j]) by merge counting.
long long count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                           std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long inv = count_inversions(v, scratch, lo, mid) +
                  count_inversions(v, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += (long long)(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + long(lo), scratch.begin() + long(hi), v.begin() + long(lo));
  return inv;
}

long long tie_sum(const std::vector<double>& sorted,
                  long long (*term)(long long)) {
  long long total = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    total += term((long long)(j - i));
    i = j;
  }
  return total;
}

long long pairs2(long long t) { return t * (t - 1) / 2; }

double normal_two_sided_p(double z) {
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

// C - D for the given y ordering, where x is implicitly the identity order
// with tie runs described by x_runs (run lengths of equal x after sorting).
long long concordant_minus_discordant(const std::vector<double>& y_in_x_order,
                                      const std::vector<std::size_t>& x_runs) {
  long long c = 0;
  long long d = 0;
  std::size_t run_start = 0;
  std::vector<std::size_t> run_of(y_in_x_order.size());
  std::size_t run_idx = 0;
  for (std::size_t len : x_runs) {
    for (std::size_t i = 0; i < len; ++i) run_of[run_start + i] = run_idx;
    run_start += len;
    ++run_idx;
  }
  for (std::size_t i = 0; i < y_in_x_order.size(); ++i) {
    for (std::size_t j = i + 1; j < y_in_x_order.size(); ++j) {
      if (run_of[i] == run_of[j]) continue;  // tied in x
      if (y_in_x_order[i] < y_in_x_order[j]) ++c;
      else if (y_in_x_order[i] > y_in_x_order[j]) ++d;
    }
  }
  return c - d;
}

}  // namespace

KendallResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  const PairData data = complete_pairs(x, y);
  const std::size_t n = data.x.size();
  if (n < 2) {
    throw std::invalid_argument("kendall_tau: fewer than two complete pairs");
  }

  // Sort jointly by (x, y); equal-x runs then hold y ascending, so merge
  // inversions in the y sequence count exactly the discordant pairs.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (data.x[a] != data.x[b]) return data.x[a] < data.x[b];
    return data.y[a] < data.y[b];
  });
  std::vector<double> xs(n);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = data.x[order[i]];
    ys[i] = data.y[order[i]];
  }

  const long long n0 = pairs2((long long)n);
  const long long n1 = tie_sum(xs, pairs2);

  long long n3 = 0;  // pairs tied in both
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
      n3 += pairs2((long long)(j - i));
      i = j;
    }
  }

  std::vector<double> y_mut = ys;
  std::vector<double> scratch(n);
  const long long discordant = count_inversions(y_mut, scratch, 0, n);

  std::vector<double> y_sorted = ys;
  std::sort(y_sorted.begin(), y_sorted.end());
  const long long n2 = tie_sum(y_sorted, pairs2);

  const long long distinct_pairs = n0 - n1 - n2 + n3;  // untied in both
  const long long num = distinct_pairs - 2 * discordant;  // C - D

  KendallResult result;
  result.n_used = n;
  const long long denom_x = n0 - n1;
  const long long denom_y = n0 - n2;
  if (denom_x == 0 || denom_y == 0) {
    result.tau = std::numeric_limits<double>::quiet_NaN();
    result.p_value = std::numeric_limits<double>::quiet_NaN();
    result.method = "kendall-tau-b-undefined";
    return result;
  }
  result.tau = double(num) / std::sqrt(double(denom_x) * double(denom_y));

  if (n > 10) {
    const long long nn = (long long)n;
    const auto t25 = [](long long t) { return t * (t - 1) * (2 * t + 5); };
    const auto t012 = [](long long t) { return t * (t - 1) * (t - 2); };
    const auto t01 = [](long long t) { return t * (t - 1); };
    const long long v0 = nn * (nn - 1) * (2 * nn + 5);
    const long long vt = tie_sum(xs, t25);
    const long long vu = tie_sum(y_sorted, t25);
    const double v1 = double(tie_sum(xs, t012)) * double(tie_sum(y_sorted, t012)) /
                      (9.0 * double(nn) * double(nn - 1) * double(nn - 2));
    const double v2 = double(tie_sum(xs, t01)) * double(tie_sum(y_sorted, t01)) /
                      (2.0 * double(nn) * double(nn - 1));
    const double var = double(v0 - vt - vu) / 18.0 + v1 + v2;
    if (var <= 0.0) {
      result.p_value = 1.0;
    } else {
      result.p_value = normal_two_sided_p(double(num) / std::sqrt(var));
    }
    result.method = "kendall-tau-b-normal";
    return result;
  }

  // Exact null distribution: every distinct ordering of y against fixed x tie
  // structure. |C - D| is compared on integers; the tau-b denominator is
  // invariant under reordering y.
  std::vector<std::size_t> x_runs;
  {
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j < n && xs[j] == xs[i]) ++j;
      x_runs.push_back(j - i);
      i = j;
    }
  }
  const long long observed_abs = std::llabs(num);
  std::vector<double> perm = y_sorted;
  long long total = 0;
  long long hits = 0;
  do {
    ++total;
    if (std::llabs(concordant_minus_discordant(perm, x_runs)) >= observed_abs) ++hits;
  } while (std::next_permutation(perm.begin(), perm.end()));
  result.p_value = double(hits) / double(total);
  result.method = "kendall-tau-b-exact";
  return result;
}

TauMatrix cross_model_tau_matrix(const std::vector<CellSummary>& cells,
                                 std::vector<std::string> models) {
  if (models.empty()) {
    for (const CellSummary& c : cells) models.push_back(c.model);
    std::sort(models.begin(), models.end());
    models.erase(std::unique(models.begin(), models.end()), models.end());
  }
  std::map<std::string, std::map<std::string, double>> by_model;
  for (const CellSummary& c : cells) {
    by_model[c.model][c.variant_id + "|" + c.condition.key()] = c.pass_at_k_value;
  }

  const std::size_t m = models.size();
  TauMatrix out;
  out.models = models;
  out.tau.assign(m, std::vector<double>(m, 1.0));
  out.p_value.assign(m, std::vector<double>(m, std::numeric_limits<double>::quiet_NaN()));
  out.n_units.assign(m, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    out.n_units[i][i] = by_model[models[i]].size();
  }

  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto& a = by_model[models[i]];
      const auto& b = by_model[models[j]];
      std::vector<double> va;
      std::vector<double> vb;
      for (const auto& [unit, value] : a) {
        const auto it = b.find(unit);
        if (it == b.end()) continue;
        va.push_back(value);
        vb.push_back(it->second);
      }
      out.n_units[i][j] = out.n_units[j][i] = va.size();
      if (va.size() < 2) {
        out.tau[i][j] = out.tau[j][i] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const KendallResult k = kendall_tau(va, vb);
      out.tau[i][j] = out.tau[j][i] = k.tau;
      out.p_value[i][j] = out.p_value[j][i] = k.p_value;
    }
  }
  return out;
}

}  // namespace askwhen
