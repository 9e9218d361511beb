#pragma once

// HTTP chat backends speaking either the OpenAI-compatible
// /v1/chat/completions dialect or the local-server (Ollama) /api/chat one.

#include <httplib.h>
#include <nlohmann/json.hpp>

// httplib pulls in <resolv.h>, whose _res macro clashes with Eigen.
#ifdef _res
#undef _res
#endif

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "beamtune/llm/chat.hpp"

namespace beamtune::llm {

enum class Dialect { openai, ollama };

inline Dialect dialect_from_string(const std::string& s) {
  if (s == "openai") return Dialect::openai;
  if (s == "ollama" || s == "local") return Dialect::ollama;
  throw std::invalid_argument("unknown chat dialect: " + s);
}

/// Default sampling temperature of each server family.
inline double default_temperature(Dialect d) { return d == Dialect::openai ? 0.7 : 0.8; }

inline constexpr const char* kApiKeyEnv = "LLM_API_KEY";

/// Token bucket limiting requests per minute. 0 disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute = 0.0)
      : rate_per_s_(requests_per_minute / 60.0), capacity_(std::max(1.0, requests_per_minute / 60.0)),
        tokens_(capacity_), last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    if (rate_per_s_ <= 0.0) return;
    std::unique_lock lock(mutex_);
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_per_s_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double wait_s = (1.0 - tokens_) / rate_per_s_;
      lock.unlock();
      std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
      lock.lock();
    }
  }

 private:
  double rate_per_s_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

struct RetryPolicy {
  int max_retries = 2;
  double initial_backoff_s = 1.0;
  double multiplier = 2.0;
};

struct HttpBackendConfig {
  Dialect dialect = Dialect::openai;
  std::string base_url = "https://api.openai.com";
  double requests_per_minute = 0.0;
  RetryPolicy retry;
  std::optional<std::string> api_key;  // normally taken from LLM_API_KEY
};

namespace detail {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path_prefix = url.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

}  // namespace detail

/// Request body for a dialect. Exposed so wire formats can be tested
/// without a server.
inline nlohmann::json build_request_body(Dialect dialect, const ChatRequest& r, double temperature) {
  nlohmann::json messages = nlohmann::json::array();
  if (r.system_prompt) messages.push_back({{"role", "system"}, {"content", *r.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", r.user_message}});
  nlohmann::json body{{"model", r.model}, {"messages", messages}};
  if (dialect == Dialect::openai) {
    body["temperature"] = temperature;
    if (r.max_tokens) body["max_tokens"] = *r.max_tokens;
  } else {
    body["stream"] = false;
    body["options"] = {{"temperature", temperature}};
    if (r.max_tokens) body["options"]["num_predict"] = *r.max_tokens;
  }
  return body;
}

/// Assistant text and usage from a reply body; throws MalformedReplyError.
inline std::pair<std::string, std::optional<Usage>> parse_reply_body(Dialect dialect, const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MalformedReplyError("server reply is not a JSON object");
  try {
    std::string text;
    std::optional<Usage> usage;
    if (dialect == Dialect::openai) {
      const auto& choices = j.at("choices");
      if (!choices.is_array() || choices.empty()) throw MalformedReplyError("reply has no choices");
      text = choices.at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage") && j["usage"].is_object())
        usage = Usage{j["usage"].value("prompt_tokens", 0L), j["usage"].value("completion_tokens", 0L)};
    } else {
      text = j.at("message").at("content").get<std::string>();
      if (j.contains("prompt_eval_count") || j.contains("eval_count"))
        usage = Usage{j.value("prompt_eval_count", 0L), j.value("eval_count", 0L)};
    }
    return {trim_outer_whitespace(std::move(text)), usage};
  } catch (const nlohmann::json::exception& e) {
    throw MalformedReplyError(std::string("unexpected reply shape: ") + e.what());
  }
}

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)), limiter_(cfg_.requests_per_minute) {
    url_ = detail::split_url(cfg_.base_url);
    if (!cfg_.api_key) {
      if (const char* key = std::getenv(kApiKeyEnv); key && *key) cfg_.api_key = key;
    }
  }

  std::string id() const override {
    return std::string(cfg_.dialect == Dialect::openai ? "openai" : "ollama") + "@" + cfg_.base_url;
  }

  ChatResponse chat(const ChatRequest& request) override {
    validate(request);
    const double temperature = request.temperature.value_or(default_temperature(cfg_.dialect));
    const std::string body = build_request_body(cfg_.dialect, request, temperature).dump();
    double backoff = cfg_.retry.initial_backoff_s;
    for (int attempt = 0;; ++attempt) {
      try {
        return send_once(request, body, temperature);
      } catch (const TransportError& e) {
        if (!e.retryable() || attempt >= cfg_.retry.max_retries) throw;
      }
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= cfg_.retry.multiplier;
    }
  }

 private:
  ChatResponse send_once(const ChatRequest& request, const std::string& body, double temperature) {
    limiter_.acquire();
    httplib::Client client(url_.scheme_host_port);
    const auto timeout = std::chrono::duration<double>(request.timeout_s);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (cfg_.api_key) headers.emplace("Authorization", "Bearer " + *cfg_.api_key);
    const std::string path =
        url_.path_prefix + (cfg_.dialect == Dialect::openai ? "/v1/chat/completions" : "/api/chat");

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || (err == httplib::Error::Read && elapsed >= 0.9 * request.timeout_s))
        throw TimeoutError("request timed out after " + std::to_string(elapsed) + " s");
      throw ConnectionError("transport failure: " + httplib::to_string(err));
    }
    if (res->status == 401 || res->status == 403)
      throw AuthError("authentication rejected (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500)
      throw ServerError(res->status, "server error (HTTP " + std::to_string(res->status) + ")");
    if (res->status < 200 || res->status >= 300)
      throw TransportError("request rejected (HTTP " + std::to_string(res->status) + ")");

    auto [text, usage] = parse_reply_body(cfg_.dialect, res->body);
    ChatResponse out;
    out.text = std::move(text);
    out.usage = usage;
    out.latency_s = elapsed;
    out.backend_id = id();
    out.temperature = temperature;
    return out;
  }

  HttpBackendConfig cfg_;
  detail::SplitUrl url_;
  RateLimiter limiter_;
};

}  // namespace beamtune::llm
