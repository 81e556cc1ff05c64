#include "askwhen/archive.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "askwhen/errors.hpp"

namespace askwhen {

namespace fs = std::filesystem;

json Manifest::to_json() const {
  json agents_j = json::array();
  for (const auto& a : agents) agents_j.push_back(a);
  json variants_j = json::object();
  for (const auto& [id, meta] : variants) {
    variants_j[id] = json{{"benchmark", meta.benchmark},
                          {"dimension", askwhen::to_string(meta.dimension)},
                          {"ambiguity_class", askwhen::to_string(meta.ambiguity_class)}};
  }
  json skipped_j = json::array();
  for (const auto& s : skipped_cells) {
    skipped_j.push_back(json{{"model", s.model},
                             {"variant_id", s.variant_id},
                             {"reason", s.reason}});
  }
  return json{{"config_hash", config_hash},
              {"protocol", protocol},
              {"seeds", seeds},
              {"agents", agents_j},
              {"variants", variants_j},
              {"conditions", conditions},
              {"skipped_cells", skipped_j}};
}

Manifest Manifest::from_json(const json& j) {
  Manifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.protocol = j.at("protocol").get<std::string>();
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.agents = j.at("agents").get<std::vector<std::string>>();
  if (j.contains("variants")) {
    for (auto it = j.at("variants").begin(); it != j.at("variants").end(); ++it) {
      VariantMeta meta;
      meta.benchmark = it.value().value("benchmark", std::string());
      meta.dimension = dimension_from_string(it.value().at("dimension").get<std::string>());
      meta.ambiguity_class =
          ambiguity_class_from_string(it.value().at("ambiguity_class").get<std::string>());
      m.variants[it.key()] = meta;
    }
  }
  m.conditions = j.value("conditions", std::vector<std::string>());
  for (const json& s : j.value("skipped_cells", json::array())) {
    m.skipped_cells.push_back(SkippedCell{s.at("model").get<std::string>(),
                                          s.at("variant_id").get<std::string>(),
                                          s.at("reason").get<std::string>()});
  }
  return m;
}

void Manifest::save(const std::string& dir) const {
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!out) throw ConfigError("cannot write manifest in " + dir);
  out << to_json().dump(2) << "\n";
}

Manifest Manifest::load(const std::string& dir) {
  const fs::path p = fs::path(dir) / "manifest.json";
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("missing manifest: " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed manifest " + p.string() + ": " + e.what());
  }
  return from_json(j);
}

ArchiveWriter::ArchiveWriter(const std::string& dir) : dir_(dir) {
  fs::create_directories(dir_);
  const fs::path p = fs::path(dir_) / "trials.jsonl";
  FILE* f = std::fopen(p.c_str(), "wb");
  if (!f) throw ConfigError("cannot open archive for writing: " + p.string());
  out_ = f;
}

ArchiveWriter::~ArchiveWriter() {
  if (out_) std::fclose(static_cast<FILE*>(out_));
}

void ArchiveWriter::append(const Trial& t) {
  const auto violations = validate_trial(t);
  if (!violations.empty()) {
    std::string msg = "refusing to append malformed trial:";
    for (const auto& v : violations) msg += " " + v + ";";
    throw ConfigError(msg);
  }
  const std::string line = t.to_json().dump();
  FILE* f = static_cast<FILE*>(out_);
  if (std::fwrite(line.data(), 1, line.size(), f) != line.size() ||
      std::fputc('\n', f) == EOF) {
    throw ConfigError("short write to archive in " + dir_);
  }
  std::fflush(f);
  ++count_;
}

void ArchiveWriter::write_manifest(const Manifest& m) const { m.save(dir_); }

std::vector<Trial> load_trials(const std::string& dir, const TrialFilter& filter) {
  const fs::path p = fs::path(dir) / "trials.jsonl";
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("missing archive: " + p.string());
  std::vector<Trial> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed trial record: ") + e.what(), lineno);
    }
    Trial t;
    try {
      t = Trial::from_json(j);
    } catch (const json::exception& e) {
      throw ParseError(std::string("trial record missing field: ") + e.what(), lineno);
    }
    if (filter && !filter(t.variant_id, t.model, t.condition)) continue;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace askwhen
