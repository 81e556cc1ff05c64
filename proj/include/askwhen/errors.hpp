#pragma once

#include <stdexcept>
#include <string>

namespace askwhen {

// Configuration or input documents that fail validation. The CLI maps this
// family to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed archive or wire payloads. Carries the 1-based line number when
// the source is line-oriented (JSONL), 0 otherwise.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Agent transport failures: spawn errors, broken pipes, timeouts, oversized
// payloads, version mismatches.
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

// Agent responses that break the wire contract (unknown tool, malformed
// response record, response out of turn).
class ProtocolViolation : public std::runtime_error {
 public:
  explicit ProtocolViolation(const std::string& what) : std::runtime_error(what) {}
};

// Grader could not produce a verdict (crashed command, missing profile).
// Distinct from a graded failure.
class GradingError : public std::runtime_error {
 public:
  explicit GradingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace askwhen
