#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "askwhen/metrics.hpp"

namespace askwhen {

struct StatResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
  std::optional<std::size_t> n_permutations;
  bool corrected = false;
  std::optional<double> correction_factor;
};

enum class PermutationMode { automatic, exact, monte_carlo };

// One-sided (greater) two-sample permutation test on mean(a) - mean(b).
// automatic mode enumerates every labeling exactly when C(|a|+|b|, |a|)
// fits inside n_permutations, otherwise draws n_permutations shuffles from
// the counter-based generator stream for `seed` and applies the add-one
// estimate (1 + hits) / (1 + n). p is always > 0; ties in the statistic are
// compared with a scale-aware epsilon so reordered float sums still tie.
StatResult permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                            std::size_t n_permutations = 10000, std::uint64_t seed = 0,
                            PermutationMode mode = PermutationMode::automatic);

struct PonrResult {
  // Latest injection fraction whose corrected test rejects; absent when none
  // does.
  std::optional<Condition> fraction;
  // Per-fraction uncorrected tests, keyed by fraction string ("0.1" ...),
  // with the Bonferroni factor recorded on each result.
  std::map<std::string, StatResult> per_fraction;
  double alpha = 0.05;
  std::size_t n_comparisons = 0;
};

// Bonferroni-guarded sweep: for each injection fraction, tests its cell
// values against the no-clarification cells (one-sided greater) and reports
// the latest fraction with p < alpha / #fractions.
PonrResult point_of_no_return(const std::map<int, std::vector<double>>& injection_cells,
                              const std::vector<double>& nc_cells, double alpha = 0.05,
                              std::size_t n_permutations = 10000, std::uint64_t seed = 0);

struct KendallResult {
  double tau = 0.0;
  double p_value = 1.0;
  std::string method;
  std::size_t n_used = 0;  // complete pairs entering the statistic
};

// Tie-corrected Kendall tau-b between paired vectors. Pairs with a NaN on
// either side are dropped first; fewer than two complete pairs is an error.
// p is two-sided: the tie-corrected normal approximation for n > 10, exact
// enumeration of all orderings of one vector for n <= 10. A constant vector
// leaves tau undefined (NaN result, method "kendall-tau-b-undefined").
KendallResult kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

struct TauMatrix {
  std::vector<std::string> models;
  std::vector<std::vector<double>> tau;      // symmetric, unit diagonal
  std::vector<std::vector<double>> p_value;  // NaN on the diagonal
  std::vector<std::vector<std::size_t>> n_units;
};

// Pairwise tau-b over per-(variant, condition) pass@k values, each pair
// restricted to units both models have. Models default to the sorted
// distinct set present in `cells`.
TauMatrix cross_model_tau_matrix(const std::vector<CellSummary>& cells,
                                 std::vector<std::string> models = {});

}  // namespace askwhen
