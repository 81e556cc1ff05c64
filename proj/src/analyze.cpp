#include "askwhen/analyze.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "askwhen/csv.hpp"
#include "askwhen/errors.hpp"
#include "askwhen/metrics.hpp"
#include "askwhen/protocol.hpp"
#include "askwhen/stats.hpp"

namespace askwhen {

namespace {

struct MeanAccum {
  double sum = 0.0;
  std::size_t n = 0;

  void add(double v) {
    sum += v;
    ++n;
  }
  bool empty() const { return n == 0; }
  double mean() const { return sum / static_cast<double>(n); }
};

// Wide-grid column order: oracle, the five fractions ascending, NC.
constexpr std::array<const char*, 7> kConditionColumns = {
    "oracle", "inj_10", "inj_30", "inj_50", "inj_70", "inj_90", "nc"};

int condition_slot(const Condition& c) {
  switch (c.kind()) {
    case Condition::Kind::oracle:
      return 0;
    case Condition::Kind::no_clarification:
      return 6;
    case Condition::Kind::injection:
      return (c.fraction_tenths() + 1) / 2;  // 1,3,5,7,9 -> 1..5
  }
  return 0;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write analysis file: " + path);
  out << csv_join(header) << "\n";
  for (const auto& row : rows) out << csv_join(row) << "\n";
  out.flush();
  if (!out) throw ConfigError("short write on analysis file: " + path);
}

std::string fixed_or_dash(double v, int decimals) {
  return std::isnan(v) ? "--" : format_fixed(v, decimals);
}

std::string fixed_or_dash(const std::optional<double>& v, int decimals) {
  return v ? fixed_or_dash(*v, decimals) : "--";
}

}  // namespace

void cmd_analyze(const std::string& run_dir, const std::string& out_dir,
                 const AnalyzeOptions& options) {
  const Manifest manifest = Manifest::load(run_dir);
  const std::vector<Trial> trials = load_trials(run_dir, options.filter);
  std::filesystem::create_directories(out_dir);

  const std::vector<CellSummary> cells = cell_summaries(trials, options.pass_k);
  if (cells.empty()) {
    throw ConfigError("archive has no graded trials: nothing to analyze");
  }

  auto meta_of = [&](const std::string& variant_id) -> const VariantMeta* {
    auto it = manifest.variants.find(variant_id);
    return it == manifest.variants.end() ? nullptr : &it->second;
  };

  // ---- success-mean grids, keyed (benchmark, dimension) -------------------
  // Dimension keyed by enum value so rows come out goal, constraint, input,
  // context rather than alphabetically. Cells whose variant is missing from
  // the manifest have no grouping metadata and stay out of the grids.
  std::map<std::pair<std::string, int>, std::array<MeanAccum, 7>> grid;
  for (const auto& cell : cells) {
    const VariantMeta* meta = meta_of(cell.variant_id);
    if (!meta) continue;
    grid[{meta->benchmark, static_cast<int>(meta->dimension)}][condition_slot(cell.condition)]
        .add(cell.pass_at_k_value);
  }

  std::vector<std::string> grid_header = {"benchmark", "dimension"};
  grid_header.insert(grid_header.end(), kConditionColumns.begin(), kConditionColumns.end());

  std::vector<std::vector<std::string>> mean_rows;
  std::vector<std::vector<std::string>> count_rows;
  for (const auto& [key, accums] : grid) {
    std::vector<std::string> mean_row = {key.first, to_string(Dimension(key.second))};
    std::vector<std::string> count_row = mean_row;
    for (const auto& a : accums) {
      mean_row.push_back(a.empty() ? "--" : format_fixed(a.mean(), 4));
      count_row.push_back(std::to_string(a.n));
    }
    mean_rows.push_back(std::move(mean_row));
    count_rows.push_back(std::move(count_row));
  }
  write_csv(out_dir + "/voi_curves.csv", grid_header, mean_rows);
  write_csv(out_dir + "/voi_curves_n.csv", grid_header, count_rows);

  // ---- long-format curve points for plotting ------------------------------
  std::vector<std::vector<std::string>> plot_rows;
  for (const auto& [key, accums] : grid) {
    const MeanAccum& oracle_ref = accums[0];
    const MeanAccum& nc_ref = accums[6];
    for (int slot = 1; slot <= 5; ++slot) {
      if (accums[slot].empty()) continue;
      plot_rows.push_back({key.first, to_string(Dimension(key.second)),
                           Condition::injection_tenths(2 * slot - 1).fraction_string(),
                           format_fixed(accums[slot].mean(), 4), std::to_string(accums[slot].n),
                           oracle_ref.empty() ? "--" : format_fixed(oracle_ref.mean(), 4),
                           nc_ref.empty() ? "--" : format_fixed(nc_ref.mean(), 4)});
    }
  }
  write_csv(out_dir + "/plot_voi.csv",
            {"benchmark", "dimension", "fraction", "mean_pass" + std::to_string(options.pass_k),
             "n_cells", "oracle_ref", "nc_ref"},
            plot_rows);

  // ---- wasted compute -----------------------------------------------------
  // Reference trace per (model, variant) is the median-length oracle run;
  // errored trials never contribute a trace or a diff.
  std::map<std::pair<std::string, std::string>, std::vector<Trial>> oracle_by_cell;
  std::map<std::pair<std::string, std::string>, std::vector<const Trial*>> injection_by_cell;
  for (const auto& t : trials) {
    if (trial_errored(t)) continue;
    auto key = std::make_pair(t.model, t.variant_id);
    if (t.condition.kind() == Condition::Kind::oracle) {
      oracle_by_cell[key].push_back(t);
    } else if (t.condition.is_injection()) {
      injection_by_cell[key].push_back(&t);
    }
  }

  std::map<std::pair<std::string, int>, std::array<MeanAccum, 2>> wasted;  // [fraction, absolute]
  for (const auto& [key, injected] : injection_by_cell) {
    auto oracle_it = oracle_by_cell.find(key);
    if (oracle_it == oracle_by_cell.end()) continue;
    const Trial& reference = select_oracle_trace(oracle_it->second);
    for (const Trial* t : injected) {
      const VariantMeta* meta = meta_of(t->variant_id);
      if (!meta) continue;
      auto& accums = wasted[{meta->benchmark, t->condition.fraction_tenths()}];
      accums[0].add(wasted_compute(*t, reference.actions, WastedMode::fraction));
      accums[1].add(wasted_compute(*t, reference.actions, WastedMode::absolute));
    }
  }

  std::set<std::string> wasted_benchmarks;
  for (const auto& [key, accums] : wasted) wasted_benchmarks.insert(key.first);
  std::vector<std::vector<std::string>> wasted_rows;
  for (const auto& benchmark : wasted_benchmarks) {
    for (int mode = 0; mode < 2; ++mode) {
      std::vector<std::string> row = {benchmark, mode == 0 ? "fraction" : "absolute"};
      for (int tenths : {1, 3, 5, 7, 9}) {
        auto it = wasted.find({benchmark, tenths});
        row.push_back(it == wasted.end() || it->second[mode].empty()
                          ? "--"
                          : format_fixed(it->second[mode].mean(), 4));
      }
      wasted_rows.push_back(std::move(row));
    }
  }
  write_csv(out_dir + "/wasted_compute.csv",
            {"benchmark", "mode", "inj_10", "inj_30", "inj_50", "inj_70", "inj_90"}, wasted_rows);

  // ---- cross-model rank agreement ----------------------------------------
  const TauMatrix tau = cross_model_tau_matrix(cells);
  std::vector<std::string> tau_header = {"model"};
  tau_header.insert(tau_header.end(), tau.models.begin(), tau.models.end());
  std::vector<std::vector<std::string>> tau_rows;
  std::vector<std::vector<std::string>> tau_p_rows;
  for (std::size_t i = 0; i < tau.models.size(); ++i) {
    std::vector<std::string> t_row = {tau.models[i]};
    std::vector<std::string> p_row = {tau.models[i]};
    for (std::size_t j = 0; j < tau.models.size(); ++j) {
      t_row.push_back(fixed_or_dash(tau.tau[i][j], 4));
      p_row.push_back(fixed_or_dash(tau.p_value[i][j], 6));
    }
    tau_rows.push_back(std::move(t_row));
    tau_p_rows.push_back(std::move(p_row));
  }
  write_csv(out_dir + "/kendall_matrix.csv", tau_header, tau_rows);
  write_csv(out_dir + "/kendall_pvalues.csv", tau_header, tau_p_rows);

  // ---- point of no return per (dimension, ambiguity class) ---------------
  const std::uint64_t ponr_seed = options.permutation_seed
                                      ? *options.permutation_seed
                                      : (manifest.seeds.empty() ? 0 : manifest.seeds.front());

  struct PonrBucket {
    std::map<int, std::vector<double>> injection;
    std::vector<double> nc;
  };
  std::map<std::pair<int, int>, PonrBucket> ponr_cells;
  for (const auto& cell : cells) {
    const VariantMeta* meta = meta_of(cell.variant_id);
    if (!meta) continue;
    auto key = std::make_pair(static_cast<int>(meta->dimension),
                              static_cast<int>(meta->ambiguity_class));
    if (cell.condition.is_injection()) {
      ponr_cells[key].injection[cell.condition.fraction_tenths()].push_back(cell.pass_at_k_value);
    } else if (cell.condition.kind() == Condition::Kind::no_clarification) {
      ponr_cells[key].nc.push_back(cell.pass_at_k_value);
    }
  }

  std::set<int> dimensions_present;
  for (const auto& [id, meta] : manifest.variants) {
    dimensions_present.insert(static_cast<int>(meta.dimension));
  }

  // Cell text: a fraction when the sweep rejects somewhere, "none" when it
  // ran and nothing was significant, "--" when there was nothing to test.
  std::vector<std::vector<std::string>> ponr_rows;
  for (int d = 0; d < 4; ++d) {
    if (!dimensions_present.count(d)) continue;
    std::vector<std::string> row = {to_string(Dimension(d))};
    for (int c = 0; c < 3; ++c) {
      auto it = ponr_cells.find({d, c});
      if (it == ponr_cells.end() || it->second.nc.empty() || it->second.injection.empty()) {
        row.push_back("--");
        continue;
      }
      const PonrResult result =
          point_of_no_return(it->second.injection, it->second.nc, options.alpha,
                             options.n_permutations, ponr_seed);
      row.push_back(result.fraction ? result.fraction->fraction_string() : "none");
    }
    ponr_rows.push_back(std::move(row));
  }
  write_csv(out_dir + "/ponr.csv", {"dimension", "outcome_critical", "divergent", "benign"},
            ponr_rows);

  // ---- ask behavior (natural protocol only) -------------------------------
  if (manifest.protocol == "natural") {
    std::map<std::string, std::vector<Trial>> sessions_by_model;
    for (const auto& t : trials) sessions_by_model[t.model].push_back(t);
    std::vector<std::vector<std::string>> ask_rows;
    for (const auto& [model, sessions] : sessions_by_model) {
      const AskSummary s = ask_stats(sessions);
      ask_rows.push_back({model, std::to_string(s.sessions), format_fixed(s.ask_rate, 4),
                          std::to_string(s.total_ask_calls),
                          fixed_or_dash(s.mean_first_ask_timing, 4),
                          fixed_or_dash(s.median_first_ask_timing, 4),
                          format_fixed(s.calls_per_asking_session, 4)});
    }
    write_csv(out_dir + "/ask_summary.csv",
              {"model", "sessions", "ask_rate", "total_ask_calls", "mean_first_timing",
               "median_first_timing", "calls_per_asking_session"},
              ask_rows);
  }
}

}  // namespace askwhen
