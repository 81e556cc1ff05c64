#include "askwhen/gateway.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>

#include <httplib.h>

#include "askwhen/errors.hpp"

namespace askwhen {

const char* const kWireVersion = "1";

json ToolDescriptor::to_json() const {
  json props = json::object();
  json required = json::array();
  for (const ToolParam& p : params) {
    json prop{{"type", p.semantic_type}, {"description", p.description}};
    if (p.default_value) prop["default"] = *p.default_value;
    props[p.name] = prop;
    if (p.required) required.push_back(p.name);
  }
  return json{{"name", name},
              {"description", description},
              {"parameters", json{{"properties", props}, {"required", required}}}};
}

ToolDescriptor ToolDescriptor::from_json(const json& j) {
  ToolDescriptor t;
  t.name = j.at("name").get<std::string>();
  t.description = j.value("description", std::string());
  const json params = j.value("parameters", json::object());
  const json props = params.value("properties", json::object());
  const auto required = params.value("required", std::vector<std::string>());
  for (auto it = props.begin(); it != props.end(); ++it) {
    ToolParam p;
    p.name = it.key();
    p.semantic_type = it.value().value("type", std::string("string"));
    p.description = it.value().value("description", std::string());
    p.required = std::find(required.begin(), required.end(), p.name) != required.end();
    if (it.value().contains("default")) {
      p.default_value = it.value().at("default").get<std::string>();
    }
    t.params.push_back(std::move(p));
  }
  return t;
}

ToolDescriptor ask_user_tool() {
  ToolDescriptor t;
  t.name = "ask_user";
  t.description =
      "Ask the user a clarifying question to get more information about the task. "
      "Use this when the task is ambiguous or you need specific details to proceed.";
  ToolParam question;
  question.name = "question";
  question.semantic_type = "string";
  question.description = "The clarifying question to ask.";
  question.required = true;
  ToolParam context;
  context.name = "context";
  context.semantic_type = "string";
  context.description = "Optional additional context.";
  context.required = false;
  context.default_value = "";
  t.params = {question, context};
  return t;
}

const std::string& ask_prompt_suffix() {
  static const std::string s =
      "IMPORTANT: Your output will be checked by an auto-grader looking for exact "
      "answers. This task may be missing critical information. Use the ask_user tool "
      "to ask the user for any missing details.";
  return s;
}

json AgentRequest::to_json() const {
  json conv = json::array();
  for (const Turn& t : conversation) conv.push_back(t.to_json());
  json tools_j = json::array();
  for (const ToolDescriptor& t : tools) tools_j.push_back(t.to_json());
  return json{{"type", "request"},
              {"conversation", conv},
              {"tools", tools_j},
              {"step_index", step_index},
              {"limits", json{{"max_actions_remaining", max_actions_remaining}}}};
}

std::string AgentRequest::serialize() const { return to_json().dump(); }

AgentRequest AgentRequest::from_json(const json& j) {
  AgentRequest r;
  for (const json& t : j.at("conversation")) r.conversation.push_back(Turn::from_json(t));
  for (const json& t : j.value("tools", json::array())) {
    r.tools.push_back(ToolDescriptor::from_json(t));
  }
  r.step_index = j.at("step_index").get<int>();
  r.max_actions_remaining =
      j.value("limits", json::object()).value("max_actions_remaining", 0);
  return r;
}

AgentResponse AgentResponse::make_tool_call(std::string name, json args) {
  AgentResponse r;
  r.kind = Kind::tool_call;
  r.tool_name = std::move(name);
  r.arguments = std::move(args);
  return r;
}

AgentResponse AgentResponse::make_message(std::string text) {
  AgentResponse r;
  r.kind = Kind::message;
  r.text = std::move(text);
  return r;
}

AgentResponse AgentResponse::make_finish(std::string answer) {
  AgentResponse r;
  r.kind = Kind::finish;
  r.answer = std::move(answer);
  return r;
}

json AgentResponse::to_json() const {
  switch (kind) {
    case Kind::tool_call:
      return json{{"type", "tool_call"}, {"name", tool_name}, {"arguments", arguments}};
    case Kind::message:
      return json{{"type", "message"}, {"text", text}};
    case Kind::finish:
      return json{{"type", "finish"}, {"answer", answer}};
  }
  throw std::logic_error("bad AgentResponse kind");
}

std::string AgentResponse::serialize() const { return to_json().dump(); }

AgentResponse AgentResponse::from_json(const json& j) {
  std::string type;
  try {
    type = j.at("type").get<std::string>();
    if (type == "tool_call") {
      AgentResponse r = make_tool_call(j.at("name").get<std::string>(),
                                       j.value("arguments", json::object()));
      if (!r.arguments.is_object()) {
        throw ProtocolViolation("tool_call arguments must be an object");
      }
      return r;
    }
    if (type == "message") return make_message(j.at("text").get<std::string>());
    if (type == "finish") return make_finish(j.at("answer").get<std::string>());
  } catch (const json::exception& e) {
    throw ProtocolViolation(std::string("malformed agent response: ") + e.what());
  }
  throw ProtocolViolation("unknown agent response type: " + type);
}

json AgentEndpoint::to_json() const {
  json j{{"id", id}, {"kind", kind}};
  if (!command.empty()) j["command"] = command;
  if (!url.empty()) j["url"] = url;
  j["timeout_seconds"] = timeout_seconds;
  j["max_response_bytes"] = max_response_bytes;
  if (!passthrough.empty()) j["passthrough"] = passthrough;
  return j;
}

AgentEndpoint AgentEndpoint::from_json(const json& j) {
  AgentEndpoint e;
  e.id = j.at("id").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  e.command = j.value("command", std::vector<std::string>());
  e.url = j.value("url", std::string());
  e.timeout_seconds = j.value("timeout_seconds", 300.0);
  e.max_response_bytes = j.value("max_response_bytes", std::size_t(1) << 20);
  e.passthrough = j.value("passthrough", json::object());
  if (e.kind != "sim" && e.kind != "process" && e.kind != "http") {
    throw ConfigError("unknown agent endpoint kind: " + e.kind);
  }
  if (e.kind == "process" && e.command.empty()) {
    throw ConfigError("process endpoint " + e.id + " has no command");
  }
  if (e.kind == "http" && e.url.empty()) {
    throw ConfigError("http endpoint " + e.id + " has no url");
  }
  return e;
}

AgentResponse AgentHandle::exchange(const AgentRequest& request) {
  if (in_flight_) {
    throw ProtocolViolation("exchange already in flight on this handle");
  }
  in_flight_ = true;
  AgentResponse response;
  try {
    response = transport_exchange(request);
  } catch (...) {
    in_flight_ = false;
    throw;
  }
  in_flight_ = false;
  if (response.kind == AgentResponse::Kind::tool_call) {
    bool offered = false;
    for (const ToolDescriptor& t : request.tools) {
      if (t.name == response.tool_name) { offered = true; break; }
    }
    if (!offered) {
      throw ProtocolViolation("agent called tool not offered: " + response.tool_name);
    }
  }
  return response;
}

namespace {

class SimHandle : public AgentHandle {
 public:
  SimHandle(AgentEndpoint endpoint, const ProfileSet* profiles)
      : endpoint_(std::move(endpoint)), profiles_(profiles) {
    if (!profiles_) {
      throw ConfigError("sim endpoint " + endpoint_.id + " needs a profile set");
    }
  }

  void begin_trial(const std::string& variant_id, std::uint64_t seed) override {
    variant_id_ = variant_id;
    seed_ = seed;
  }

 protected:
  AgentResponse transport_exchange(const AgentRequest& request) override {
    const CommitmentProfile* profile = profiles_->for_variant(variant_id_);
    if (!profile) {
      throw TransportError("no commitment profile for variant " + variant_id_);
    }
    const SimAction act =
        sim_act(*profile, request.conversation, request.step_index, seed_);
    if (act.finished) return AgentResponse::make_finish(act.answer);
    return AgentResponse::make_tool_call(act.name, act.parameters);
  }

 private:
  AgentEndpoint endpoint_;
  const ProfileSet* profiles_;
  std::string variant_id_;
  std::uint64_t seed_ = 0;
};

struct Pipe {
  int read_fd = -1;
  int write_fd = -1;
};

Pipe make_pipe() {
  // A write to a child that already exited must fail with EPIPE (handled at
  // the call site) instead of raising SIGPIPE and killing the harness.
  static const bool sigpipe_ignored = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;
  int fds[2];
  if (pipe(fds) != 0) throw TransportError("pipe() failed");
  return Pipe{fds[0], fds[1]};
}

class ProcessHandle : public AgentHandle {
 public:
  explicit ProcessHandle(AgentEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    Pipe to_child = make_pipe();
    Pipe from_child = make_pipe();
    pid_ = fork();
    if (pid_ < 0) throw TransportError("fork() failed");
    if (pid_ == 0) {
      dup2(to_child.read_fd, STDIN_FILENO);
      dup2(from_child.write_fd, STDOUT_FILENO);
      ::close(to_child.read_fd);
      ::close(to_child.write_fd);
      ::close(from_child.read_fd);
      ::close(from_child.write_fd);
      std::vector<char*> argv;
      for (const std::string& a : endpoint_.command) {
        argv.push_back(const_cast<char*>(a.c_str()));
      }
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      _exit(127);
    }
    ::close(to_child.read_fd);
    ::close(from_child.write_fd);
    in_fd_ = to_child.write_fd;
    out_fd_ = from_child.read_fd;
    handshake();
  }

  ~ProcessHandle() override { close(); }

  void close() override {
    if (in_fd_ >= 0) { ::close(in_fd_); in_fd_ = -1; }
    if (out_fd_ >= 0) { ::close(out_fd_); out_fd_ = -1; }
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (waitpid(pid_, &status, WNOHANG) == pid_) { pid_ = -1; return; }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

 protected:
  AgentResponse transport_exchange(const AgentRequest& request) override {
    write_line(request.serialize());
    return AgentResponse::from_json(parse_line(read_line()));
  }

 private:
  void handshake() {
    write_line(json{{"type", "hello"}, {"version", kWireVersion}}.dump());
    const json hello = parse_line(read_line());
    const std::string peer = hello.value("version", std::string("<missing>"));
    if (hello.value("type", std::string()) != "hello" || peer != kWireVersion) {
      throw TransportError("version handshake failed: harness speaks " +
                           std::string(kWireVersion) + ", agent answered " + peer);
    }
  }

  json parse_line(const std::string& line) {
    try {
      return json::parse(line);
    } catch (const json::exception& e) {
      throw ProtocolViolation(std::string("agent wrote invalid JSON: ") + e.what());
    }
  }

  void write_line(const std::string& payload) {
    std::string data = payload;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = write(in_fd_, data.data() + off, data.size() - off);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        throw TransportError("agent process " + endpoint_.id + ": stdin closed");
      }
      off += std::size_t(n);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(endpoint_.timeout_seconds);
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      if (buffer_.size() > endpoint_.max_response_bytes) {
        throw TransportError("agent response exceeds " +
                             std::to_string(endpoint_.max_response_bytes) + " bytes");
      }
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) {
        throw TransportError("agent process " + endpoint_.id + " timed out after " +
                             std::to_string(endpoint_.timeout_seconds) + "s");
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
      pollfd pfd{out_fd_, POLLIN, 0};
      const int pr = poll(&pfd, 1, int(std::min<long long>(remaining.count(), 60000)));
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw TransportError("poll() failed on agent pipe");
      }
      if (pr == 0) continue;
      char chunk[4096];
      const ssize_t n = read(out_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError("read from agent process failed");
      }
      if (n == 0) {
        throw TransportError("agent process " + endpoint_.id + " closed its stdout");
      }
      buffer_.append(chunk, std::size_t(n));
    }
  }

  AgentEndpoint endpoint_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
};

class HttpHandle : public AgentHandle {
 public:
  explicit HttpHandle(AgentEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    split_url();
    client_ = std::make_unique<httplib::Client>(base_);
    const int secs = int(endpoint_.timeout_seconds);
    const int usecs = int((endpoint_.timeout_seconds - secs) * 1e6);
    client_->set_read_timeout(secs, usecs);
    client_->set_write_timeout(secs, usecs);
    client_->set_connection_timeout(secs, usecs);
    handshake();
  }

 protected:
  AgentResponse transport_exchange(const AgentRequest& request) override {
    return AgentResponse::from_json(post(request.serialize()));
  }

 private:
  void split_url() {
    const auto scheme = endpoint_.url.find("://");
    if (scheme == std::string::npos) {
      throw ConfigError("http endpoint url must include scheme: " + endpoint_.url);
    }
    const auto slash = endpoint_.url.find('/', scheme + 3);
    if (slash == std::string::npos) {
      base_ = endpoint_.url;
      path_ = "/";
    } else {
      base_ = endpoint_.url.substr(0, slash);
      path_ = endpoint_.url.substr(slash);
    }
  }

  void handshake() {
    const json reply = post(json{{"type", "hello"}, {"version", kWireVersion}}.dump());
    const std::string peer = reply.value("version", std::string("<missing>"));
    if (reply.value("type", std::string()) != "hello" || peer != kWireVersion) {
      throw TransportError("version handshake failed: harness speaks " +
                           std::string(kWireVersion) + ", agent answered " + peer);
    }
  }

  json post(const std::string& body) {
    const auto res = client_->Post(path_, body, "application/json");
    if (!res) {
      throw TransportError("http agent " + endpoint_.id + " unreachable at " +
                           endpoint_.url);
    }
    if (res->status != 200) {
      throw TransportError("http agent " + endpoint_.id + " returned status " +
                           std::to_string(res->status));
    }
    if (res->body.size() > endpoint_.max_response_bytes) {
      throw TransportError("agent response exceeds " +
                           std::to_string(endpoint_.max_response_bytes) + " bytes");
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw ProtocolViolation(std::string("agent wrote invalid JSON: ") + e.what());
    }
  }

  AgentEndpoint endpoint_;
  std::string base_;
  std::string path_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

std::unique_ptr<AgentHandle> open_session(const AgentEndpoint& endpoint,
                                          const ProfileSet* profiles) {
  if (endpoint.kind == "sim") return std::make_unique<SimHandle>(endpoint, profiles);
  if (endpoint.kind == "process") return std::make_unique<ProcessHandle>(endpoint);
  if (endpoint.kind == "http") return std::make_unique<HttpHandle>(endpoint);
  throw ConfigError("unknown agent endpoint kind: " + endpoint.kind);
}

std::optional<std::string> final_answer(const Trial& trial) {
  for (auto it = trial.conversation.rbegin(); it != trial.conversation.rend(); ++it) {
    if (it->role == "assistant") return it->text;
  }
  return std::nullopt;
}

namespace {

// Runs a predicate command with `input` on stdin and returns its exit code.
// Throws GradingError if the command cannot be spawned or dies on a signal.
int run_predicate(const std::vector<std::string>& command, const std::string& input) {
  Pipe to_child = make_pipe();
  const pid_t pid = fork();
  if (pid < 0) throw GradingError("fork() failed for grader command");
  if (pid == 0) {
    dup2(to_child.read_fd, STDIN_FILENO);
    ::close(to_child.read_fd);
    ::close(to_child.write_fd);
    const int devnull = open("/dev/null", O_WRONLY);
    if (devnull >= 0) dup2(devnull, STDOUT_FILENO);
    std::vector<char*> argv;
    for (const std::string& a : command) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  ::close(to_child.read_fd);
  std::size_t off = 0;
  while (off < input.size()) {
    const ssize_t n = write(to_child.write_fd, input.data() + off, input.size() - off);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      break;  // grader may legitimately stop reading early
    }
    off += std::size_t(n);
  }
  ::close(to_child.write_fd);
  int status = 0;
  if (waitpid(pid, &status, 0) != pid) {
    throw GradingError("waitpid() failed for grader command");
  }
  if (!WIFEXITED(status)) throw GradingError("grader command died on a signal");
  return WEXITSTATUS(status);
}

}  // namespace

bool grade(const GraderSpec& spec, const Trial& trial, const ProfileSet* profiles) {
  if (spec.kind == "exact_match") {
    const auto answer = final_answer(trial);
    return answer && *answer == spec.expected;
  }
  if (spec.kind == "command") {
    if (spec.command.empty()) throw GradingError("command grader has empty command");
    const int code = run_predicate(spec.command, trial.to_json().dump());
    if (code == 0) return true;
    if (code == 1) return false;
    throw GradingError("grader command exited with code " + std::to_string(code));
  }
  if (spec.kind == "sim") {
    if (!profiles) throw GradingError("sim grader needs a profile set");
    const CommitmentProfile* p = profiles->for_variant(trial.variant_id);
    if (!p) throw GradingError("no commitment profile for variant " + trial.variant_id);
    return grade_sim(*p, trial.variant_id, trial.condition, trial.seed);
  }
  throw GradingError("unknown grader kind: " + spec.kind);
}

}  // namespace askwhen
