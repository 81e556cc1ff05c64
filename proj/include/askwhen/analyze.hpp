#pragma once

#include <optional>
#include <string>
#include <vector>

#include "askwhen/archive.hpp"

namespace askwhen {

struct AnalyzeOptions {
  // Restricts which trials enter the analysis; same shape as the CLI filter.
  TrialFilter filter;
  // Stream seed for permutation resampling; cmd_analyze wires the head of
  // the manifest seed list here.
  std::optional<std::uint64_t> permutation_seed;
  std::size_t n_permutations = 10000;
  double alpha = 0.05;
  int pass_k = 3;
};

// Reads a run archive and writes the analysis CSV set into out_dir:
//   voi_curves.csv    success-mean grid, one row per (benchmark, dimension)
//   voi_curves_n.csv  cell counts backing each mean
//   plot_voi.csv      long-format VOI curve points with reference lines
//   wasted_compute.csv  mean discarded pre-injection work per fraction
//   kendall_matrix.csv / kendall_pvalues.csv  cross-model rank agreement
//   ponr.csv          latest significant fraction per dimension x class
//   ask_summary.csv   ask-behavior table (natural-protocol archives only)
// Output is deterministic: rerunning over the same archive reproduces every
// file byte for byte.
void cmd_analyze(const std::string& run_dir, const std::string& out_dir,
                 const AnalyzeOptions& options = {});

}  // namespace askwhen
