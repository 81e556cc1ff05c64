#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "askwhen/protocol.hpp"

namespace askwhen {

// Experiment configuration document. Field errors are reported with the
// offending field's name so a bad config fails before anything executes.
struct RunConfig {
  std::string mode = "forced";  // "forced" | "natural" | "simulate"
  std::string variants_path;    // task corpus (forced/natural)
  std::string profiles_path;    // commitment profiles (required for simulate)
  std::vector<AgentEndpoint> agents;
  std::vector<Condition> conditions = Condition::all();
  int trials_per_cell = 3;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::string out_dir = "run";
  int parallelism = 1;
  int max_actions = 512;
  json templates_overlay;  // null when the config does not override templates

  static RunConfig from_json(const json& j);
  static RunConfig load(const std::string& path);

  // Result-affecting fields only (out_dir and parallelism excluded), in a
  // canonical serialization. Two configs that must produce identical
  // archives hash identically.
  json canonical() const;
};

// 16-hex-digit FNV-1a over the canonical form.
std::string config_hash(const RunConfig& c);

// Command-line overrides. Selector lists are OR within a key and AND across
// keys; empty lists select everything.
struct RunOverrides {
  std::optional<std::string> out_dir;
  std::optional<int> parallelism;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::vector<std::string> models;
  std::vector<std::string> variants;
  std::vector<Condition> conditions;
};

// Parses repeated --filter arguments of the form key=value with keys
// model | variant | condition (condition values are condition keys).
// Commas separate multiple selectors inside one argument.
RunOverrides parse_filters(const std::vector<std::string>& filter_args);

// Parses a comma-separated seed list ("0,1,2").
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

// Folds CLI overrides into the config, then the two recognized environment
// variables (ASKWHEN_OUT, ASKWHEN_PARALLELISM) on top: environment beats
// flag beats config, for those two settings only.
void apply_overrides(RunConfig& config, const RunOverrides& overrides);

// Loads a task-variant corpus: a JSON array of variants, or an object with a
// "variants" array.
std::vector<TaskVariant> load_variant_corpus(const std::string& path);

// Executes a run end to end: builds the grid from the config (synthesizing
// the corpus from profiles in simulate mode), runs it, writes the archive,
// prints per-cell progress. Returns the process exit code: 0 on success, 1
// if any cell wholly failed. Config problems throw ConfigError instead.
int cmd_run(const std::string& config_path, const RunOverrides& overrides);

}  // namespace askwhen
