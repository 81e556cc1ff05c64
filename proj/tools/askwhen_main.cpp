#include <cstdio>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "askwhen/analyze.hpp"
#include "askwhen/errors.hpp"
#include "askwhen/report.hpp"
#include "askwhen/run_config.hpp"

namespace {

// ASKWHEN_OUT beats --out wherever an output location is taken.
std::string effective_out(const std::string& flag_value) {
  if (const char* env = std::getenv("ASKWHEN_OUT"); env && *env) return env;
  return flag_value;
}

askwhen::TrialFilter filter_predicate(const askwhen::RunOverrides& o) {
  if (o.models.empty() && o.variants.empty() && o.conditions.empty()) return nullptr;
  std::set<std::string> models(o.models.begin(), o.models.end());
  std::set<std::string> variants(o.variants.begin(), o.variants.end());
  std::set<std::string> conditions;
  for (const auto& c : o.conditions) conditions.insert(c.key());
  return [models = std::move(models), variants = std::move(variants),
          conditions = std::move(conditions)](const std::string& variant_id,
                                              const std::string& model,
                                              const askwhen::Condition& condition) {
    return (models.empty() || models.count(model) > 0) &&
           (variants.empty() || variants.count(variant_id) > 0) &&
           (conditions.empty() || conditions.count(condition.key()) > 0);
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clarification-timing evaluation harness"};
  app.require_subcommand(1);

  std::string run_config_path;
  std::string run_out;
  int run_parallelism = 0;
  std::string run_seed_list;
  std::vector<std::string> run_filters;
  CLI::App* run = app.add_subcommand("run", "Execute an experiment grid and write its archive");
  run->add_option("--config", run_config_path, "Experiment config file (JSON)")->required();
  run->add_option("--out", run_out, "Output directory (overrides the config)");
  run->add_option("--parallelism", run_parallelism, "Concurrent cell workers");
  run->add_option("--seed-list", run_seed_list, "Comma-separated trial seeds, e.g. 0,1,2");
  run->add_option("--filter", run_filters,
                  "Restrict the grid: model=ID, variant=ID, condition=KEY (repeatable)");

  std::string analyze_run_dir;
  std::string analyze_out;
  std::vector<std::string> analyze_filters;
  CLI::App* analyze =
      app.add_subcommand("analyze", "Summarize a run archive into analysis CSV files");
  analyze->add_option("run_dir", analyze_run_dir, "Run directory holding trials.jsonl")
      ->required();
  analyze->add_option("--out", analyze_out, "Analysis output directory (default: run_dir/analysis)");
  analyze->add_option("--filter", analyze_filters,
                      "Restrict trials: model=ID, variant=ID, condition=KEY (repeatable)");

  std::string report_dir;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "Render analysis CSVs as a text report");
  report->add_option("analysis_dir", report_dir, "Directory written by analyze")->required();
  report->add_option("--out", report_out, "Report file path (default: analysis_dir/report.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      askwhen::RunOverrides overrides = askwhen::parse_filters(run_filters);
      if (!run_out.empty()) overrides.out_dir = run_out;
      if (run_parallelism > 0) overrides.parallelism = run_parallelism;
      if (!run_seed_list.empty()) overrides.seeds = askwhen::parse_seed_list(run_seed_list);
      return askwhen::cmd_run(run_config_path, overrides);
    }
    if (analyze->parsed()) {
      const askwhen::RunOverrides overrides = askwhen::parse_filters(analyze_filters);
      askwhen::AnalyzeOptions options;
      options.filter = filter_predicate(overrides);
      std::string out = effective_out(analyze_out);
      if (out.empty()) out = analyze_run_dir + "/analysis";
      askwhen::cmd_analyze(analyze_run_dir, out, options);
      std::printf("analysis written to %s\n", out.c_str());
      return 0;
    }
    if (report->parsed()) {
      // ASKWHEN_OUT names a directory, so for report it relocates the file.
      std::string out = report_out;
      if (const char* env = std::getenv("ASKWHEN_OUT"); env && *env) {
        out = std::string(env) + "/report.txt";
      }
      askwhen::cmd_report(report_dir, out);
      return 0;
    }
  } catch (const askwhen::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const askwhen::ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
