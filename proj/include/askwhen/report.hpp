#pragma once

#include <string>

namespace askwhen {

// Renders the plain-text report from an analysis directory's CSV set. Every
// number in the output is copied verbatim from a CSV cell; the renderer does
// no arithmetic of its own, so the report is exactly as deterministic as the
// analysis it reads.
std::string render_report(const std::string& analysis_dir);

// Renders, writes report.txt (to out_path, or analysis_dir/report.txt when
// out_path is empty), and echoes the text to stdout.
void cmd_report(const std::string& analysis_dir, const std::string& out_path = "");

}  // namespace askwhen
