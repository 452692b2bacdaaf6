#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "llmfs/llm_gateway.hpp"
#include "support.hpp"

using namespace llmfs;

namespace {

ChatRequest request(const std::string& role = "Initiator", const std::string& subject = "Src Port") {
  ChatRequest r;
  r.model = "mock-model";
  r.system_prompt = "system";
  r.user_prompt = "user";
  r.role_tag = role;
  r.subject_tag = subject;
  return r;
}

std::string chat_body(const std::string& content) {
  return nlohmann::json{{"model", "mock-model"}, {"message", {{"role", "assistant"}, {"content", content}}}, {"done", true}}
      .dump();
}

/// httplib server on an ephemeral port, running on a background thread.
class MockServer {
 public:
  explicit MockServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/api/chat", [this, handler](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu_);
        bodies_.push_back(req.body);
      }
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<std::string> bodies_;
};

HttpBackendOptions options_for(const MockServer& s) {
  HttpBackendOptions o;
  o.base_url = s.url();
  o.model = "mock-model";
  o.timeout_s = 5;
  o.backoff_s = 0.01;
  o.health_timeout_s = 2;
  return o;
}

}  // namespace

// --- scripted --------------------------------------------------------------

TEST(Scripted, ExactKeyLookup) {
  ScriptedBackend b;
  b.set("Initiator", "Src Port", "canned text");
  const auto r = b.complete(request());
  EXPECT_EQ(r.text, "canned text");
  EXPECT_GE(r.latency, 0.0);
  EXPECT_EQ(r.attempt_count, 1);
  EXPECT_EQ(b.call_count(), 1u);
  EXPECT_EQ(b.health_check(), HealthStatus::ok);
}

TEST(Scripted, WildcardThenDefault) {
  ScriptedBackend b({{"Judge|*", "judge any"}}, std::string("fallback"));
  EXPECT_EQ(b.complete(request("Judge", "x")).text, "judge any");
  EXPECT_EQ(b.complete(request("Refiner", "x")).text, "fallback");
  ScriptedBackend strict;
  EXPECT_THROW(strict.complete(request()), BackendError);
}

TEST(Scripted, LoadsFromFile) {
  testing_support::TempDir dir;
  testing_support::write_text(dir / "s.json", R"({"responses": {"Refiner|f": "r"}, "default": "d"})");
  auto b = ScriptedBackend::from_file(dir / "s.json");
  EXPECT_EQ(b->complete(request("Refiner", "f")).text, "r");
  EXPECT_EQ(b->complete(request("Judge", "f")).text, "d");
  testing_support::write_text(dir / "bad.json", "{not json");
  EXPECT_THROW(ScriptedBackend::from_file(dir / "bad.json"), Error);
}

TEST(Scripted, RejectsInvalidRequest) {
  ScriptedBackend b({}, std::string("x"));
  auto r = request();
  r.user_prompt.clear();
  EXPECT_THROW(b.complete(r), Error);
  r = request();
  r.max_tokens = 0;
  EXPECT_THROW(b.complete(r), Error);
}

// --- HTTP ------------------------------------------------------------------

TEST(Http, FixedBodyReturnedVerbatim) {
  const std::string text = "{\"score\": 0.65, \"reasoning\": \"ports are spoofable\"}\n  trailing";
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_body(text), "application/json");
  });
  OllamaBackend b(options_for(server));
  const auto req = request();
  const auto copy = req;
  const auto r = b.complete(req);
  EXPECT_EQ(r.text, text);
  EXPECT_EQ(r.attempt_count, 1);
  EXPECT_GE(r.latency, 0.0);

  const auto sent = nlohmann::json::parse(server.bodies().at(0));
  EXPECT_EQ(sent["model"], "mock-model");
  EXPECT_EQ(sent["stream"], false);
  EXPECT_EQ(sent["messages"][0]["role"], "system");
  EXPECT_EQ(sent["messages"][1]["content"], "user");
  EXPECT_EQ(sent["options"]["temperature"], 0.0);
  EXPECT_EQ(sent["options"]["num_predict"], 1024);
  EXPECT_EQ(req.user_prompt, copy.user_prompt);
  EXPECT_EQ(req.model, copy.model);
}

TEST(Http, RetriesServerErrorsWithIdenticalPayload) {
  std::atomic<int> hits{0};
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 500;
      res.set_content("boom", "text/plain");
      return;
    }
    res.set_content(chat_body("ok"), "application/json");
  });
  auto o = options_for(server);
  o.max_retries = 3;
  OllamaBackend b(o);
  const auto r = b.complete(request());
  EXPECT_EQ(r.text, "ok");
  EXPECT_EQ(r.attempt_count, 3);
  EXPECT_EQ(b.call_count(), 1u);
  const auto bodies = server.bodies();
  ASSERT_EQ(bodies.size(), 3u);
  EXPECT_EQ(bodies[0], bodies[1]);
  EXPECT_EQ(bodies[1], bodies[2]);
}

TEST(Http, GivesUpAfterRetryBudget) {
  MockServer server([&](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  auto o = options_for(server);
  o.max_retries = 1;
  OllamaBackend b(o);
  EXPECT_THROW(b.complete(request()), BackendError);
  EXPECT_EQ(server.bodies().size(), 2u);
}

TEST(Http, ClientErrorIsNotRetried) {
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content(R"({"error":"bad request"})", "application/json");
  });
  auto o = options_for(server);
  o.max_retries = 3;
  OllamaBackend b(o);
  EXPECT_THROW(b.complete(request()), BackendError);
  EXPECT_EQ(server.bodies().size(), 1u);
}

TEST(Http, SeedForwardedWhenSet) {
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_body("x"), "application/json");
  });
  OllamaBackend b(options_for(server));
  auto r = request();
  r.request_seed = 1234;
  b.complete(r);
  EXPECT_EQ(nlohmann::json::parse(server.bodies().at(0))["options"]["seed"], 1234);
}

TEST(Http, InFlightCapRespected) {
  std::atomic<int> current{0}, peak{0};
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++current;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    --current;
    res.set_content(chat_body("x"), "application/json");
  });
  auto o = options_for(server);
  o.max_in_flight = 2;
  OllamaBackend b(o);
  std::vector<std::thread> ts;
  for (int i = 0; i < 6; ++i) ts.emplace_back([&] { b.complete(request()); });
  for (auto& t : ts) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(b.call_count(), 6u);
}

TEST(Http, HealthOk) {
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_body("OK"), "application/json");
  });
  OllamaBackend b(options_for(server));
  EXPECT_EQ(b.health_check(), HealthStatus::ok);
}

TEST(Http, HealthUnreachableWithoutServer) {
  HttpBackendOptions o;
  o.base_url = "http://127.0.0.1:1";
  o.health_timeout_s = 1;
  OllamaBackend b(o);
  EXPECT_EQ(b.health_check(), HealthStatus::unreachable);
  o.max_retries = 0;
  OllamaBackend c(o);
  EXPECT_THROW(c.complete(request()), BackendError);
}

TEST(Http, HealthModelMissing) {
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    res.status = 404;
    res.set_content(R"({"error":"model 'mock-model' not found"})", "application/json");
  });
  OllamaBackend b(options_for(server));
  EXPECT_EQ(b.health_check(), HealthStatus::model_missing);
}

TEST(Http, ErrorBodyWithOkStatusCountsAsMissingModel) {
  MockServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"error":"model not loaded"})", "application/json");
  });
  OllamaBackend b(options_for(server));
  EXPECT_EQ(b.health_check(), HealthStatus::model_missing);
}
