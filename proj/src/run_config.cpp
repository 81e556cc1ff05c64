#include "askwhen/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "askwhen/counter_rng.hpp"
#include "askwhen/errors.hpp"

namespace askwhen {

namespace {

[[noreturn]] void bad_field(const std::string& name, const std::string& why) {
  throw ConfigError("config field \"" + name + "\": " + why);
}

std::string string_field(const json& j, const char* name, const std::string& fallback) {
  if (!j.contains(name)) return fallback;
  if (!j[name].is_string()) bad_field(name, "expected a string");
  return j[name].get<std::string>();
}

int positive_int_field(const json& j, const char* name, int fallback) {
  if (!j.contains(name)) return fallback;
  if (!j[name].is_number_integer()) bad_field(name, "expected an integer");
  const int v = j[name].get<int>();
  if (v < 1) bad_field(name, "must be >= 1");
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    if (!text.empty() && text.front() == '-') throw std::invalid_argument("negative");
    const unsigned long long v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing junk");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(what + ": \"" + text + "\" is not a non-negative integer");
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root: expected a JSON object");

  static const std::set<std::string> known = {
      "mode",  "variants",    "profiles", "agents",      "conditions", "trials_per_cell",
      "seeds", "out_dir",     "parallelism", "max_actions", "templates"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) bad_field(key, "unknown field");
  }

  RunConfig c;
  c.mode = string_field(j, "mode", c.mode);
  if (c.mode != "forced" && c.mode != "natural" && c.mode != "simulate") {
    bad_field("mode", "expected forced, natural, or simulate");
  }
  c.variants_path = string_field(j, "variants", "");
  c.profiles_path = string_field(j, "profiles", "");
  c.out_dir = string_field(j, "out_dir", c.out_dir);
  c.trials_per_cell = positive_int_field(j, "trials_per_cell", c.trials_per_cell);
  c.parallelism = positive_int_field(j, "parallelism", c.parallelism);
  c.max_actions = positive_int_field(j, "max_actions", c.max_actions);

  if (j.contains("agents")) {
    if (!j["agents"].is_array()) bad_field("agents", "expected an array");
    c.agents.clear();
    for (std::size_t i = 0; i < j["agents"].size(); ++i) {
      try {
        c.agents.push_back(AgentEndpoint::from_json(j["agents"][i]));
      } catch (const std::exception& e) {
        bad_field("agents[" + std::to_string(i) + "]", e.what());
      }
    }
  }

  if (j.contains("conditions")) {
    if (!j["conditions"].is_array()) bad_field("conditions", "expected an array of condition keys");
    c.conditions.clear();
    for (std::size_t i = 0; i < j["conditions"].size(); ++i) {
      const json& entry = j["conditions"][i];
      if (!entry.is_string()) bad_field("conditions[" + std::to_string(i) + "]", "expected a string");
      try {
        c.conditions.push_back(Condition::from_key(entry.get<std::string>()));
      } catch (const std::exception& e) {
        bad_field("conditions[" + std::to_string(i) + "]", e.what());
      }
    }
    if (c.conditions.empty()) bad_field("conditions", "must not be empty");
  }

  if (j.contains("seeds")) {
    if (!j["seeds"].is_array()) bad_field("seeds", "expected an array of integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < j["seeds"].size(); ++i) {
      const json& entry = j["seeds"][i];
      if (!entry.is_number_integer() || (entry.is_number_integer() && entry.get<long long>() < 0)) {
        bad_field("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      }
      c.seeds.push_back(entry.get<std::uint64_t>());
    }
    if (c.seeds.empty()) bad_field("seeds", "must not be empty");
  }

  if (j.contains("templates")) {
    if (!j["templates"].is_object()) bad_field("templates", "expected an object");
    c.templates_overlay = j["templates"];
    try {
      MessageTemplates::from_json(c.templates_overlay);
    } catch (const std::exception& e) {
      bad_field("templates", e.what());
    }
  }

  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing config: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::canonical() const {
  json agents = json::array();
  for (const auto& a : this->agents) agents.push_back(a.to_json());
  json conditions = json::array();
  for (const auto& c : this->conditions) conditions.push_back(c.key());
  return json{{"mode", mode},
              {"variants", variants_path},
              {"profiles", profiles_path},
              {"agents", agents},
              {"conditions", conditions},
              {"trials_per_cell", trials_per_cell},
              {"seeds", seeds},
              {"max_actions", max_actions},
              {"templates", templates_overlay}};
}

std::string config_hash(const RunConfig& c) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx",
                static_cast<unsigned long long>(fnv1a64(c.canonical().dump())));
  return buffer;
}

RunOverrides parse_filters(const std::vector<std::string>& filter_args) {
  RunOverrides o;
  for (const auto& arg : filter_args) {
    std::size_t start = 0;
    while (start <= arg.size()) {
      const std::size_t comma = arg.find(',', start);
      const std::string item =
          arg.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      start = comma == std::string::npos ? arg.size() + 1 : comma + 1;
      if (item.empty()) continue;

      const std::size_t eq = item.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("filter \"" + item + "\": expected key=value");
      }
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (value.empty()) throw ConfigError("filter \"" + item + "\": empty value");
      if (key == "model") {
        o.models.push_back(value);
      } else if (key == "variant") {
        o.variants.push_back(value);
      } else if (key == "condition") {
        try {
          o.conditions.push_back(Condition::from_key(value));
        } catch (const std::exception& e) {
          throw ConfigError("filter \"" + item + "\": " + e.what());
        }
      } else {
        throw ConfigError("filter key \"" + key +
                          "\": expected model, variant, or condition");
      }
    }
  }
  return o;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    start = comma == std::string::npos ? text.size() + 1 : comma + 1;
    if (item.empty()) continue;
    seeds.push_back(parse_u64(item, "seed list"));
  }
  if (seeds.empty()) throw ConfigError("seed list: no seeds given");
  return seeds;
}

void apply_overrides(RunConfig& config, const RunOverrides& overrides) {
  if (overrides.seeds) config.seeds = *overrides.seeds;
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.parallelism) {
    if (*overrides.parallelism < 1) throw ConfigError("--parallelism must be >= 1");
    config.parallelism = *overrides.parallelism;
  }

  // Environment wins over flags, for these two settings only.
  if (const char* env_out = std::getenv("ASKWHEN_OUT"); env_out && *env_out) {
    config.out_dir = env_out;
  }
  if (const char* env_par = std::getenv("ASKWHEN_PARALLELISM"); env_par && *env_par) {
    const std::uint64_t v = parse_u64(env_par, "ASKWHEN_PARALLELISM");
    if (v < 1) throw ConfigError("ASKWHEN_PARALLELISM: must be >= 1");
    config.parallelism = static_cast<int>(v);
  }

  if (!overrides.models.empty()) {
    const std::set<std::string> keep(overrides.models.begin(), overrides.models.end());
    std::erase_if(config.agents,
                  [&](const AgentEndpoint& a) { return keep.count(a.id) == 0; });
    if (config.agents.empty()) throw ConfigError("filter matched no agents");
  }
  if (!overrides.conditions.empty()) {
    std::set<std::string> keep;
    for (const auto& c : overrides.conditions) keep.insert(c.key());
    std::erase_if(config.conditions,
                  [&](const Condition& c) { return keep.count(c.key()) == 0; });
    if (config.conditions.empty()) throw ConfigError("filter matched no conditions");
  }
}

std::vector<TaskVariant> load_variant_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing variant corpus: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  json j;
  try {
    j = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("variant corpus " + path + ": " + e.what());
  }
  const json* list = nullptr;
  if (j.is_array()) {
    list = &j;
  } else if (j.is_object() && j.contains("variants") && j["variants"].is_array()) {
    list = &j["variants"];
  } else {
    throw ConfigError("variant corpus " + path +
                      ": expected an array of variants or {\"variants\": [...]}");
  }
  std::vector<TaskVariant> variants;
  variants.reserve(list->size());
  for (std::size_t i = 0; i < list->size(); ++i) {
    try {
      variants.push_back(TaskVariant::from_json((*list)[i]));
    } catch (const std::exception& e) {
      throw ConfigError("variant corpus " + path + " entry " + std::to_string(i) + ": " +
                        e.what());
    }
  }
  return variants;
}

int cmd_run(const std::string& config_path, const RunOverrides& overrides) {
  RunConfig config = RunConfig::load(config_path);
  apply_overrides(config, overrides);

  ProfileSet profiles;
  bool have_profiles = false;
  std::vector<TaskVariant> variants;

  if (config.mode == "simulate") {
    if (config.profiles_path.empty()) {
      bad_field("profiles", "required in simulate mode");
    }
    if (!config.variants_path.empty()) {
      bad_field("variants", "simulate mode synthesizes its corpus; remove this field");
    }
    profiles = ProfileSet::load(config.profiles_path);
    have_profiles = true;
    for (const auto& p : profiles.profiles) {
      auto batch = synthesize_variants(p);
      variants.insert(variants.end(), batch.begin(), batch.end());
    }
    if (config.agents.empty()) {
      AgentEndpoint sim;
      sim.id = "sim";
      sim.kind = "sim";
      config.agents.push_back(sim);
    }
  } else {
    if (config.variants_path.empty()) bad_field("variants", "required");
    variants = load_variant_corpus(config.variants_path);
    if (!config.profiles_path.empty()) {
      profiles = ProfileSet::load(config.profiles_path);
      have_profiles = true;
    }
    if (config.agents.empty()) bad_field("agents", "at least one endpoint required");
  }

  if (!overrides.variants.empty()) {
    const std::set<std::string> keep(overrides.variants.begin(), overrides.variants.end());
    std::erase_if(variants, [&](const TaskVariant& v) { return keep.count(v.variant_id) == 0; });
    if (variants.empty()) throw ConfigError("filter matched no variants");
  }

  ExperimentConfig experiment;
  experiment.protocol = config.mode == "natural" ? "natural" : "forced";
  experiment.variants = std::move(variants);
  experiment.agents = config.agents;
  experiment.conditions = config.conditions;
  experiment.trials_per_cell = config.trials_per_cell;
  experiment.seeds = config.seeds;
  experiment.parallelism = config.parallelism;
  experiment.out_dir = config.out_dir;
  experiment.config_hash = config_hash(config);
  experiment.profiles = have_profiles ? &profiles : nullptr;
  experiment.engine.max_actions_per_trial = config.max_actions;
  if (!config.templates_overlay.is_null()) {
    experiment.engine.templates = MessageTemplates::from_json(config.templates_overlay);
  }
  experiment.progress = [](const std::string& model, const std::string& variant_id,
                           std::size_t trials_done) {
    std::printf("cell %s / %s: %zu trials\n", model.c_str(), variant_id.c_str(), trials_done);
    std::fflush(stdout);
  };

  const RunResult result = run_experiment(experiment);

  std::printf("run complete: %zu trials -> %s\n", result.trials_recorded,
              result.archive_dir.c_str());
  if (!result.skipped.empty()) {
    std::printf("skipped cells: %zu (see manifest)\n", result.skipped.size());
  }
  if (result.cells_wholly_failed > 0) {
    std::printf("cells wholly failed: %zu of %zu\n", result.cells_wholly_failed,
                result.cells_total);
  }
  std::fflush(stdout);
  return result.cells_wholly_failed > 0 ? 1 : 0;
}

}  // namespace askwhen
