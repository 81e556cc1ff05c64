#pragma once

#include <map>
#include <string>
#include <vector>

#include "askwhen/trial.hpp"

namespace askwhen {

// Renders withheld prompt segments into the synthetic clarification message.
// The first segment is phrased by a per-(dimension, subdimension) template;
// follow-up segments are appended as "Also, {value}." then "And {value}.",
// joined by single spaces. The shipped table can be replaced or extended
// through configuration.
class MessageTemplates {
 public:
  static MessageTemplates defaults();

  // Overlays entries onto the defaults. Keys are "dimension/subdimension"
  // or "default" for the fallback; values contain a {value} placeholder.
  static MessageTemplates from_json(const json& j);

  // Template pattern for one segment, falling back to the default entry.
  const std::string& pattern_for(Dimension d, const std::string& subdimension) const;

  std::string render(const std::vector<RemovedSegment>& segments) const;

 private:
  std::map<std::string, std::string> patterns_;
  std::string fallback_;
};

// Renders with the default table. Throws ConfigError if `segments` is empty
// or any value is empty.
std::string build_injection_message(const std::vector<RemovedSegment>& segments);

}  // namespace askwhen
