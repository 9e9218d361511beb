#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "beamtune/llm/http_backend.hpp"

using namespace beamtune::llm;

namespace {

ChatRequest request(std::string text = "hello") {
  ChatRequest r;
  r.model = "m";
  r.user_message = std::move(text);
  r.timeout_s = 5.0;
  return r;
}

const char* kOpenAiReply =
    R"({"choices":[{"message":{"role":"assistant","content":"  {\"Q1\": 1}\n"}}],"usage":{"prompt_tokens":12,"completion_tokens":4}})";
const char* kOllamaReply = R"({"message":{"role":"assistant","content":"hi"},"prompt_eval_count":3,"eval_count":2})";

class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpBackendConfig fast_config(const std::string& url, Dialect d = Dialect::openai) {
  HttpBackendConfig c;
  c.dialect = d;
  c.base_url = url;
  c.retry = {2, 0.01, 1.0};
  c.api_key = "test-key";
  return c;
}

}  // namespace

TEST(Scripted, PlaysBackAndRecords) {
  ScriptedBackend b({" first ", "second"}, OnExhaust::repeat_last);
  EXPECT_EQ(b.chat(request("a")).text, "first");
  EXPECT_EQ(b.chat(request("b")).text, "second");
  EXPECT_EQ(b.chat(request("c")).text, "second");
  ASSERT_EQ(b.call_count(), 3u);
  EXPECT_EQ(b.requests()[2].user_message, "c");
}

TEST(Scripted, ExhaustionCanBeAnError) {
  ScriptedBackend b({"only"});
  b.chat(request());
  EXPECT_THROW(b.chat(request()), ScriptExhausted);
  EXPECT_THROW(ScriptedBackend({}), std::invalid_argument);
}

TEST(Scripted, TemperatureDefaultAndOverride) {
  ScriptedBackend b({"x"}, OnExhaust::repeat_last, 0.8);
  EXPECT_EQ(b.chat(request()).temperature, 0.8);
  auto r = request();
  r.temperature = 0.0;
  EXPECT_EQ(b.chat(r).temperature, 0.0);
}

TEST(Request, Validation) {
  ScriptedBackend b({"x"}, OnExhaust::repeat_last);
  EXPECT_THROW(b.chat(request("")), InvalidRequest);
  auto r = request();
  r.temperature = -0.1;
  EXPECT_THROW(b.chat(r), InvalidRequest);
  r = request();
  r.max_tokens = 0;
  EXPECT_THROW(b.chat(r), InvalidRequest);
  r = request();
  r.timeout_s = 0.0;
  EXPECT_THROW(b.chat(r), InvalidRequest);
  EXPECT_EQ(b.call_count(), 0u);
}

TEST(WireFormat, OpenAiBody) {
  auto r = request("prompt");
  r.system_prompt = "sys";
  r.max_tokens = 64;
  const auto body = build_request_body(Dialect::openai, r, 0.7);
  EXPECT_EQ(body["model"], "m");
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "prompt");
  EXPECT_EQ(body["temperature"], 0.7);
  EXPECT_EQ(body["max_tokens"], 64);
}

TEST(WireFormat, OllamaBody) {
  const auto body = build_request_body(Dialect::ollama, request("prompt"), 0.8);
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["stream"], false);
  EXPECT_EQ(body["options"]["temperature"], 0.8);
  EXPECT_FALSE(body.contains("max_tokens"));
}

TEST(WireFormat, ReplyParsing) {
  auto [text, usage] = parse_reply_body(Dialect::openai, kOpenAiReply);
  EXPECT_EQ(text, "{\"Q1\": 1}");
  ASSERT_TRUE(usage);
  EXPECT_EQ(usage->prompt_tokens, 12);
  EXPECT_EQ(usage->completion_tokens, 4);
  auto [t2, u2] = parse_reply_body(Dialect::ollama, kOllamaReply);
  EXPECT_EQ(t2, "hi");
  EXPECT_EQ(u2->completion_tokens, 2);
  EXPECT_THROW(parse_reply_body(Dialect::openai, "not json"), MalformedReplyError);
  EXPECT_THROW(parse_reply_body(Dialect::openai, R"({"choices":[]})"), MalformedReplyError);
  EXPECT_THROW(parse_reply_body(Dialect::ollama, R"({"message":{"content":5}})"), MalformedReplyError);
}

TEST(WireFormat, DialectNames) {
  EXPECT_EQ(dialect_from_string("openai"), Dialect::openai);
  EXPECT_EQ(dialect_from_string("ollama"), Dialect::ollama);
  EXPECT_THROW(dialect_from_string("smoke-signals"), std::invalid_argument);
  EXPECT_EQ(default_temperature(Dialect::openai), 0.7);
  EXPECT_EQ(default_temperature(Dialect::ollama), 0.8);
}

TEST(Http, OpenAiRoundTrip) {
  LocalServer srv;
  std::string auth;
  nlohmann::json body_seen;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    body_seen = nlohmann::json::parse(req.body);
    res.set_content(kOpenAiReply, "application/json");
  });
  HttpBackend b(fast_config(srv.url()));
  const auto reply = b.chat(request("prompt"));
  EXPECT_EQ(reply.text, "{\"Q1\": 1}");
  EXPECT_EQ(reply.temperature, 0.7);
  EXPECT_GE(reply.latency_s, 0.0);
  EXPECT_EQ(auth, "Bearer test-key");
  EXPECT_EQ(body_seen["messages"][0]["content"], "prompt");
}

TEST(Http, OllamaRoundTripWithPathPrefix) {
  LocalServer srv;
  srv.server().Post("/proxy/api/chat", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(kOllamaReply, "application/json");
  });
  HttpBackend b(fast_config(srv.url() + "/proxy/", Dialect::ollama));
  EXPECT_EQ(b.chat(request()).text, "hi");
}

TEST(Http, ApiKeyFromEnvironment) {
  LocalServer srv;
  std::string auth;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    res.set_content(kOpenAiReply, "application/json");
  });
  ::setenv(kApiKeyEnv, "from-env", 1);
  auto cfg = fast_config(srv.url());
  cfg.api_key.reset();
  HttpBackend b(cfg);
  ::unsetenv(kApiKeyEnv);
  b.chat(request());
  EXPECT_EQ(auth, "Bearer from-env");
}

TEST(Http, AuthFailureIsNotRetried) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  HttpBackend b(fast_config(srv.url()));
  EXPECT_THROW(b.chat(request()), AuthError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Http, ServerErrorsAreRetriedThenRaised) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  HttpBackend b(fast_config(srv.url()));
  try {
    b.chat(request());
    FAIL() << "expected ServerError";
  } catch (const ServerError& e) {
    EXPECT_EQ(e.status(), 503);
  }
  EXPECT_EQ(hits.load(), 3);
}

TEST(Http, TransientErrorRecovers) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 429;
      return;
    }
    res.set_content(kOpenAiReply, "application/json");
  });
  HttpBackend b(fast_config(srv.url()));
  EXPECT_EQ(b.chat(request()).text, "{\"Q1\": 1}");
  EXPECT_EQ(hits.load(), 2);
}

TEST(Http, ClientErrorIsGenericTransportFailure) {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  HttpBackend b(fast_config(srv.url()));
  EXPECT_THROW(b.chat(request()), TransportError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Http, MalformedReply) {
  LocalServer srv;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("<html>busy</html>", "text/html");
  });
  HttpBackend b(fast_config(srv.url()));
  EXPECT_THROW(b.chat(request()), MalformedReplyError);
}

TEST(Http, Timeout) {
  LocalServer srv;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(800));
    res.set_content(kOpenAiReply, "application/json");
  });
  auto cfg = fast_config(srv.url());
  cfg.retry.max_retries = 0;
  HttpBackend b(cfg);
  auto r = request();
  r.timeout_s = 0.2;
  EXPECT_THROW(b.chat(r), TimeoutError);
}

TEST(Http, ConnectionRefused) {
  // Port 1 is privileged and unused here, so the connect is refused.
  auto cfg = fast_config("http://127.0.0.1:1");
  cfg.retry.max_retries = 1;
  HttpBackend b(cfg);
  EXPECT_THROW(b.chat(request()), ConnectionError);
}

TEST(Http, BadBaseUrl) { EXPECT_THROW(HttpBackend(fast_config("localhost:11434")), std::invalid_argument); }

TEST(RateLimit, SpacesRequests) {
  RateLimiter limiter(600.0);  // 10 per second, burst of 10
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 13; ++i) limiter.acquire();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_GE(elapsed, 0.25);
  EXPECT_LT(elapsed, 2.0);
}

TEST(RateLimit, ZeroDisables) {
  RateLimiter limiter(0.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) limiter.acquire();
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 0.1);
}
