#pragma once

// Chat-completion request/response types, the error taxonomy, the backend
// interface and a scripted backend for tests.

#include <cmath>
#include <cstddef>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace beamtune::llm {

struct ChatRequest {
  std::string model;
  std::optional<std::string> system_prompt;
  std::string user_message;
  std::optional<double> temperature;  // unset: backend default
  std::optional<int> max_tokens;      // unset: server default
  double timeout_s = 120.0;
};

struct Usage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<Usage> usage;
  double latency_s = 0.0;
  std::string backend_id;
  double temperature = 0.0;  // as sent
};

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violations; raised before anything is sent.
class InvalidRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anything that prevented a well-formed model reply from arriving.
class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
  virtual bool retryable() const { return false; }
  virtual const char* kind() const { return "transport"; }
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
  bool retryable() const override { return true; }
  const char* kind() const override { return "timeout"; }
};

class ConnectionError : public TransportError {
 public:
  using TransportError::TransportError;
  bool retryable() const override { return true; }
  const char* kind() const override { return "connection"; }
};

/// 429 and 5xx replies.
class ServerError : public TransportError {
 public:
  ServerError(int status, const std::string& what) : TransportError(what), status_(status) {}
  bool retryable() const override { return true; }
  const char* kind() const override { return "server"; }
  int status() const { return status_; }

 private:
  int status_;
};

class AuthError : public TransportError {
 public:
  using TransportError::TransportError;
  const char* kind() const override { return "auth"; }
};

class MalformedReplyError : public TransportError {
 public:
  using TransportError::TransportError;
  const char* kind() const override { return "malformed_reply"; }
};

class ScriptExhausted : public TransportError {
 public:
  using TransportError::TransportError;
  const char* kind() const override { return "script_exhausted"; }
};

inline void validate(const ChatRequest& r) {
  if (r.user_message.empty()) throw InvalidRequest("chat request has an empty user message");
  if (r.temperature && (!std::isfinite(*r.temperature) || *r.temperature < 0.0))
    throw InvalidRequest("temperature must be finite and >= 0");
  if (r.max_tokens && *r.max_tokens <= 0) throw InvalidRequest("max_tokens must be positive");
  if (!(r.timeout_s > 0.0)) throw InvalidRequest("timeout must be positive");
}

inline std::string trim_outer_whitespace(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

enum class OnExhaust { repeat_last, error };

/// Plays back a fixed list of responses and records every request.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> responses, OnExhaust on_exhaust = OnExhaust::error,
                           double default_temperature = 0.7)
      : responses_(std::move(responses)), on_exhaust_(on_exhaust), default_temperature_(default_temperature) {
    if (responses_.empty()) throw std::invalid_argument("scripted backend needs at least one response");
  }

  std::string id() const override { return "scripted"; }

  ChatResponse chat(const ChatRequest& request) override {
    validate(request);
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    std::size_t i = next_++;
    if (i >= responses_.size()) {
      if (on_exhaust_ == OnExhaust::error) throw ScriptExhausted("scripted backend ran out of responses");
      i = responses_.size() - 1;
    }
    ChatResponse r;
    r.text = trim_outer_whitespace(responses_[i]);
    r.backend_id = id();
    r.temperature = request.temperature.value_or(default_temperature_);
    return r;
  }

  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

  std::size_t call_count() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
  }

 private:
  std::vector<std::string> responses_;
  OnExhaust on_exhaust_;
  double default_temperature_;
  mutable std::mutex mutex_;
  std::vector<ChatRequest> requests_;
  std::size_t next_ = 0;
};

}  // namespace beamtune::llm
