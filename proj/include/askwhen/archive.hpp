#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "askwhen/trial.hpp"

namespace askwhen {

// Per-variant descriptive metadata copied into the manifest so analysis can
// group cells by benchmark/dimension/class without the original corpus.
struct VariantMeta {
  std::string benchmark;
  Dimension dimension = Dimension::goal;
  AmbiguityClass ambiguity_class = AmbiguityClass::outcome_critical;
};

struct SkippedCell {
  std::string model;
  std::string variant_id;
  std::string reason;
};

struct Manifest {
  std::string config_hash;
  std::string protocol;  // "forced" | "natural"
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> agents;
  std::map<std::string, VariantMeta> variants;
  std::vector<std::string> conditions;  // condition keys, canonical order
  std::vector<SkippedCell> skipped_cells;

  json to_json() const;
  static Manifest from_json(const json& j);

  void save(const std::string& dir) const;
  static Manifest load(const std::string& dir);
};

// Append-only JSONL sink for trial records: one validated trial per line,
// flushed after every append. Single writer per archive.
class ArchiveWriter {
 public:
  // Creates `dir` if needed and truncates any existing trials.jsonl.
  explicit ArchiveWriter(const std::string& dir);
  ~ArchiveWriter();

  ArchiveWriter(const ArchiveWriter&) = delete;
  ArchiveWriter& operator=(const ArchiveWriter&) = delete;

  // Validates, serializes, appends. Throws ConfigError listing the
  // violations if the trial is malformed.
  void append(const Trial& t);

  void write_manifest(const Manifest& m) const;

  const std::string& dir() const { return dir_; }
  std::size_t count() const { return count_; }

 private:
  std::string dir_;
  std::size_t count_ = 0;
  void* out_;  // FILE*
};

using TrialFilter =
    std::function<bool(const std::string& variant_id, const std::string& model,
                       const Condition& condition)>;

// Loads trials.jsonl from an archive directory in append order. A malformed
// record raises ParseError naming its line number; a missing file raises a
// distinct ConfigError.
std::vector<Trial> load_trials(const std::string& dir, const TrialFilter& filter = nullptr);

}  // namespace askwhen
