#include "askwhen/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

#include "askwhen/csv.hpp"
#include "askwhen/errors.hpp"

namespace askwhen {

namespace {

std::string pad(const std::string& s, std::size_t width, bool left_align) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left_align ? s + fill : fill + s;
}

bool looks_numeric(const std::string& s);

// Plain-text table: text columns left-aligned, numeric columns right-aligned,
// a dashed rule under the header.
std::string render_table(const CsvTable& t) {
  std::vector<std::size_t> width(t.header.size(), 0);
  std::vector<bool> numeric(t.header.size(), true);
  for (std::size_t i = 0; i < t.header.size(); ++i) width[i] = t.header[i].size();
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], row[i].size());
      if (row[i] != "--" && !looks_numeric(row[i])) numeric[i] = false;
    }
  }

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < width.size(); ++i) {
      if (i) os << "  ";
      os << pad(i < row.size() ? row[i] : "", width[i], !numeric[i]);
    }
    os << "\n";
  };
  emit(t.header);
  std::vector<std::string> rule;
  rule.reserve(width.size());
  for (std::size_t w : width) rule.emplace_back(w, '-');
  emit(rule);
  for (const auto& row : t.rows) emit(row);
  return os.str();
}

void section(std::ostringstream& os, const std::string& title) {
  os << title << "\n" << std::string(title.size(), '-') << "\n";
}

bool looks_numeric(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if ((c < '0' || c > '9') && c != '.' && c != '-' && c != '+' && c != 'e') return false;
  }
  return true;
}

bool parse_number(const std::string& s, double* out) {
  if (s.empty() || s == "--") return false;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return false;
    *out = v;
    return true;
  } catch (...) {
    return false;
  }
}

std::string cell(const CsvTable& t, const std::vector<std::string>& row, const char* column) {
  const int i = t.column(column);
  if (i < 0 || static_cast<std::size_t>(i) >= row.size()) return "--";
  return row[static_cast<std::size_t>(i)];
}

constexpr std::array<std::pair<const char*, const char*>, 5> kFractionColumns = {{
    {"inj_10", "0.1"},
    {"inj_30", "0.3"},
    {"inj_50", "0.5"},
    {"inj_70", "0.7"},
    {"inj_90", "0.9"},
}};

}  // namespace

std::string render_report(const std::string& analysis_dir) {
  const CsvTable voi = read_csv(analysis_dir + "/voi_curves.csv");
  const CsvTable voi_n = read_csv(analysis_dir + "/voi_curves_n.csv");
  const CsvTable wasted = read_csv(analysis_dir + "/wasted_compute.csv");
  const CsvTable ponr = read_csv(analysis_dir + "/ponr.csv");
  const CsvTable tau = read_csv(analysis_dir + "/kendall_matrix.csv");
  const CsvTable tau_p = read_csv(analysis_dir + "/kendall_pvalues.csv");
  const std::string ask_path = analysis_dir + "/ask_summary.csv";
  const bool has_ask = std::filesystem::exists(ask_path);

  std::ostringstream os;
  os << "Clarification-Timing Evaluation\n";
  os << "===============================\n\n";

  section(os, "Success by condition (mean pass@k per cell)");
  os << render_table(voi) << "\n";

  section(os, "Cells behind each mean");
  os << render_table(voi_n) << "\n";

  section(os, "Wasted pre-injection compute (mean per injection trial)");
  os << render_table(wasted) << "\n";

  section(os, "Point of no return (latest fraction with a significant benefit)");
  os << render_table(ponr) << "\n";

  section(os, "Cross-model rank agreement (Kendall tau-b)");
  os << render_table(tau) << "\n";

  section(os, "Rank agreement p-values");
  os << render_table(tau_p) << "\n";

  if (has_ask) {
    section(os, "Ask behavior (natural protocol)");
    os << render_table(read_csv(ask_path)) << "\n";
  } else {
    os << "Ask behavior: not applicable; this archive was recorded under the forced protocol.\n\n";
  }

  section(os, "Findings");

  for (const auto& row : voi.rows) {
    const std::string benchmark = cell(voi, row, "benchmark");
    const std::string dimension = cell(voi, row, "dimension");
    const std::string oracle = cell(voi, row, "oracle");
    const std::string nc = cell(voi, row, "nc");

    std::vector<std::pair<std::string, std::string>> points;  // (fraction, value)
    for (const auto& [column, fraction] : kFractionColumns) {
      const std::string v = cell(voi, row, column);
      if (v != "--") points.emplace_back(fraction, v);
    }

    std::string line = "- " + benchmark + "/" + dimension + ": ";
    bool wrote = false;
    if (oracle != "--" && nc != "--") {
      line += "oracle " + oracle + ", no-clarification " + nc;
      wrote = true;
    }
    if (points.size() >= 2) {
      double first = 0.0;
      double last = 0.0;
      std::string verb = "moves";
      if (parse_number(points.front().second, &first) &&
          parse_number(points.back().second, &last)) {
        verb = last < first ? "falls" : (last > first ? "rises" : "holds");
      }
      line += (wrote ? "; " : "") + std::string("success ") + verb + " from " +
              points.front().second + " (fraction " + points.front().first + ") to " +
              points.back().second + " (fraction " + points.back().first + ")";
      wrote = true;
    } else if (points.size() == 1) {
      line += (wrote ? "; " : "") + std::string("injection mean ") + points.front().second +
              " at fraction " + points.front().first;
      wrote = true;
    }
    if (wrote) os << line << ".\n";
  }

  for (const auto& row : ponr.rows) {
    const std::string dimension = cell(ponr, row, "dimension");
    for (const char* cls : {"outcome_critical", "divergent", "benign"}) {
      const std::string v = cell(ponr, row, cls);
      if (v == "--") continue;
      if (v == "none") {
        os << "- " << dimension << "/" << cls
           << ": no injection fraction keeps a significant benefit over no-clarification.\n";
      } else {
        os << "- " << dimension << "/" << cls
           << ": clarification still pays off through fraction " << v << ".\n";
      }
    }
  }

  for (const auto& row : wasted.rows) {
    if (cell(wasted, row, "mode") != "fraction") continue;
    const std::string benchmark = cell(wasted, row, "benchmark");
    std::vector<std::pair<std::string, std::string>> points;
    for (const auto& [column, fraction] : kFractionColumns) {
      const std::string v = cell(wasted, row, column);
      if (v != "--") points.emplace_back(fraction, v);
    }
    if (points.size() < 2) continue;
    os << "- " << benchmark << ": mean discarded share of pre-injection work moves from "
       << points.front().second << " (fraction " << points.front().first << ") to "
       << points.back().second << " (fraction " << points.back().first << ").\n";
  }

  for (std::size_t i = 0; i + 1 < tau.rows.size(); ++i) {
    for (std::size_t j = i + 1; j < tau.rows.size(); ++j) {
      const std::string a = tau.rows[i].empty() ? "" : tau.rows[i][0];
      const std::string b = tau.rows[j].empty() ? "" : tau.rows[j][0];
      const std::string v = cell(tau, tau.rows[i], b.c_str());
      if (v == "--") continue;
      const std::string p = cell(tau_p, tau_p.rows[i], b.c_str());
      os << "- tau(" << a << ", " << b << ") = " << v;
      if (p != "--") os << " (p = " << p << ")";
      os << ".\n";
    }
  }

  if (has_ask) {
    const CsvTable ask = read_csv(ask_path);
    for (const auto& row : ask.rows) {
      const std::string model = cell(ask, row, "model");
      const std::string rate = cell(ask, row, "ask_rate");
      const std::string sessions = cell(ask, row, "sessions");
      const std::string calls = cell(ask, row, "total_ask_calls");
      const std::string timing = cell(ask, row, "mean_first_timing");
      os << "- " << model << ": ask rate " << rate << " over " << sessions << " sessions, "
         << calls << " ask calls";
      if (timing != "--") os << ", mean first-ask timing " << timing;
      os << ".\n";
    }
  }

  return os.str();
}

void cmd_report(const std::string& analysis_dir, const std::string& out_path) {
  const std::string text = render_report(analysis_dir);
  const std::string path = out_path.empty() ? analysis_dir + "/report.txt" : out_path;
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write report: " + path);
    out << text;
  }
  std::fwrite(text.data(), 1, text.size(), stdout);
  std::fflush(stdout);
}

}  // namespace askwhen
