#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "askwhen/sim_agent.hpp"
#include "askwhen/trial.hpp"

namespace askwhen {

// Declared tool parameter. `semantic_type` is the JSON-schema style type
// string ("string", "integer", ...).
struct ToolParam {
  std::string name;
  std::string semantic_type = "string";
  std::string description;
  bool required = false;
  std::optional<std::string> default_value;
};

struct ToolDescriptor {
  std::string name;
  std::string description;
  std::vector<ToolParam> params;

  json to_json() const;
  static ToolDescriptor from_json(const json& j);
};

// The clarification tool offered in natural-ask sessions.
ToolDescriptor ask_user_tool();

// Notice appended to task prompts in natural-ask sessions.
const std::string& ask_prompt_suffix();

struct AgentRequest {
  std::vector<Turn> conversation;
  std::vector<ToolDescriptor> tools;
  int step_index = 1;              // 1 + number of prior agent actions
  int max_actions_remaining = 0;

  // Serialization is canonical: identical requests produce identical bytes.
  json to_json() const;
  std::string serialize() const;
  static AgentRequest from_json(const json& j);
};

struct AgentResponse {
  enum class Kind { tool_call, message, finish };
  Kind kind = Kind::finish;
  std::string tool_name;
  json arguments = json::object();
  std::string text;    // message body
  std::string answer;  // finish payload

  static AgentResponse make_tool_call(std::string name, json args);
  static AgentResponse make_message(std::string text);
  static AgentResponse make_finish(std::string answer);

  json to_json() const;
  std::string serialize() const;
  // Throws ProtocolViolation on unknown type or missing payload fields.
  static AgentResponse from_json(const json& j);
};

// Where an agent lives and how to reach it.
//   sim:     in-process simulator driven by a commitment profile set.
//   process: child process speaking newline-delimited JSON on stdio.
//   http:    single endpoint accepting one request record per POST.
struct AgentEndpoint {
  std::string id;
  std::string kind;  // "sim" | "process" | "http"
  std::vector<std::string> command;
  std::string url;
  double timeout_seconds = 300.0;
  std::size_t max_response_bytes = 1 << 20;
  json passthrough = json::object();

  json to_json() const;
  static AgentEndpoint from_json(const json& j);
};

// One live agent session: strict request/response alternation, one in-flight
// exchange at a time. Distinct handles may run concurrently.
class AgentHandle {
 public:
  virtual ~AgentHandle() = default;

  // Sends one request and blocks for its single response.
  // Throws TransportError on I/O failure, timeout, or oversized payload;
  // ProtocolViolation on malformed or out-of-contract responses (including
  // a tool_call naming a tool absent from request.tools).
  AgentResponse exchange(const AgentRequest& request);

  // Harness-side bookkeeping hint delivered before each trial. Not part of
  // the wire contract; the simulator uses it to select its draw streams,
  // remote transports ignore it.
  virtual void begin_trial(const std::string& variant_id, std::uint64_t seed) {
    (void)variant_id;
    (void)seed;
  }

  virtual void close() {}

 protected:
  virtual AgentResponse transport_exchange(const AgentRequest& request) = 0;

 private:
  bool in_flight_ = false;
};

// Opens a session, performing the version handshake for remote transports.
// The sim kind requires `profiles`; each trial's conversation tells the
// simulator which profile variant it is exercising.
std::unique_ptr<AgentHandle> open_session(const AgentEndpoint& endpoint,
                                          const ProfileSet* profiles = nullptr);

// Protocol version spoken by this harness.
extern const char* const kWireVersion;

// Grades a finished trial per the variant's grader spec.
//   exact_match: final assistant turn equals `expected`.
//   command:     external predicate, trial JSON on stdin; exit 0 pass, 1 fail,
//                anything else (including crashes) raises GradingError.
//   sim:         Bernoulli draw via the profile bound to the variant.
bool grade(const GraderSpec& spec, const Trial& trial, const ProfileSet* profiles = nullptr);

// Final answer recorded for a trial: text of the last assistant turn.
std::optional<std::string> final_answer(const Trial& trial);

}  // namespace askwhen
