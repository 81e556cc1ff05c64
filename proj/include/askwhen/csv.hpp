#pragma once

#include <string>
#include <vector>

namespace askwhen {

// Minimal CSV support for the analysis outputs: comma separator, RFC-style
// double-quote escaping, one record per line.

std::string csv_escape(const std::string& field);
std::string csv_join(const std::vector<std::string>& fields);
std::vector<std::string> csv_split(const std::string& line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by header name, -1 if absent.
  int column(const std::string& name) const;
};

// Reads a whole CSV file; throws ConfigError when missing.
CsvTable read_csv(const std::string& path);

// Fixed-precision decimal rendering used everywhere analysis emits a float,
// so reruns are byte-identical.
std::string format_fixed(double value, int decimals);

}  // namespace askwhen
