#include "askwhen/templates.hpp"

#include "askwhen/errors.hpp"

namespace askwhen {

namespace {

std::string table_key(Dimension d, const std::string& sub) {
  return to_string(d) + "/" + sub;
}

std::string substitute(const std::string& pattern, const std::string& value) {
  const std::string placeholder = "{value}";
  const auto pos = pattern.find(placeholder);
  if (pos == std::string::npos) {
    throw ConfigError("template has no {value} placeholder: " + pattern);
  }
  std::string out = pattern;
  out.replace(pos, placeholder.size(), value);
  return out;
}

}  // namespace

MessageTemplates MessageTemplates::defaults() {
  MessageTemplates t;
  t.patterns_ = {
      {"goal/target", "By the way, I should clarify: I'm specifically looking for {value}."},
      {"goal/format", "By the way, please give me the result in {value}."},
      {"input/source", "By the way, you can find the data in {value}."},
      {"input/location", "By the way, it's located at {value}."},
      {"constraint/temporal", "By the way, I should have mentioned: I'm looking at {value}."},
      {"constraint/selection", "I should mention, only include those that are {value}."},
      {"context/background", "By the way, for context: {value}."},
      {"context/domain knowledge", "For context, {value}."},
  };
  t.fallback_ = "By the way, I should have mentioned: {value}.";
  return t;
}

MessageTemplates MessageTemplates::from_json(const json& j) {
  MessageTemplates t = defaults();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) {
      throw ConfigError("template entry must be a string: " + it.key());
    }
    if (it.value().get<std::string>().find("{value}") == std::string::npos) {
      throw ConfigError("template entry missing {value} placeholder: " + it.key());
    }
    if (it.key() == "default") {
      t.fallback_ = it.value().get<std::string>();
    } else {
      t.patterns_[it.key()] = it.value().get<std::string>();
    }
  }
  return t;
}

const std::string& MessageTemplates::pattern_for(Dimension d, const std::string& sub) const {
  const auto it = patterns_.find(table_key(d, sub));
  return it == patterns_.end() ? fallback_ : it->second;
}

std::string MessageTemplates::render(const std::vector<RemovedSegment>& segments) const {
  if (segments.empty()) {
    throw ConfigError("cannot build clarification message from zero segments");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].value.empty()) {
      throw ConfigError("segment " + std::to_string(i) + " has empty value");
    }
  }
  std::string out =
      substitute(pattern_for(segments[0].dimension, segments[0].subdimension),
                 segments[0].value);
  for (std::size_t i = 1; i < segments.size(); ++i) {
    const char* lead = i == 1 ? "Also, " : "And ";
    out += " " + (lead + segments[i].value + ".");
  }
  return out;
}

std::string build_injection_message(const std::vector<RemovedSegment>& segments) {
  static const MessageTemplates table = MessageTemplates::defaults();
  return table.render(segments);
}

}  // namespace askwhen
