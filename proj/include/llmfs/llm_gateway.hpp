#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "llmfs/common.hpp"

namespace llmfs {

struct ChatRequest {
  std::string model;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<std::int64_t> request_seed;
  // Not sent over the wire; used by the scripted backend for lookup and by
  // logs.
  std::string role_tag;
  std::string subject_tag;
};

struct ChatResponse {
  std::string text;
  double latency = 0.0;  // seconds
  std::string backend_id;
  int attempt_count = 1;
};

enum class HealthStatus { ok, unreachable, model_missing };

inline std::string to_string(HealthStatus s) {
  switch (s) {
    case HealthStatus::ok: return "ok";
    case HealthStatus::unreachable: return "unreachable";
    case HealthStatus::model_missing: return "model_missing";
  }
  return "unknown";
}

/// Raised when a completion cannot be obtained.
class BackendError : public Error {
 public:
  using Error::Error;
};

inline void validate(const ChatRequest& r) {
  if (r.system_prompt.empty() || r.user_prompt.empty()) throw Error("chat request: prompts must be non-empty");
  if (r.temperature < 0.0) throw Error("chat request: temperature must be >= 0");
  if (r.max_tokens <= 0) throw Error("chat request: max_tokens must be positive");
}

/// Uniform chat-completion interface. Implementations are safe for
/// concurrent calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual HealthStatus health_check() = 0;
  virtual std::string id() const = 0;
  /// Completion calls made so far (each logical call counts once).
  std::size_t call_count() const { return calls_.load(); }

 protected:
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------

/// Deterministic canned responses keyed by "Role|Subject". Lookup falls back
/// to "Role|*" and then to the default response.
class ScriptedBackend final : public ChatBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::map<std::string, std::string> script,
                           std::optional<std::string> default_response = std::nullopt)
      : script_(std::move(script)), default_(std::move(default_response)) {}

  static std::string key(std::string_view role, std::string_view subject) {
    return std::string(role) + "|" + std::string(subject);
  }

  /// File schema: {"responses": {"Role|Feature": "text", ...}, "default": "text"}
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open script file: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ": invalid script JSON: " + e.what());
    }
    std::map<std::string, std::string> script;
    if (j.contains("responses")) {
      for (const auto& [k, v] : j.at("responses").items()) script[k] = v.get<std::string>();
    }
    std::optional<std::string> def;
    if (j.contains("default") && !j.at("default").is_null()) def = j.at("default").get<std::string>();
    return std::make_unique<ScriptedBackend>(std::move(script), std::move(def));
  }

  void set(std::string_view role, std::string_view subject, std::string text) {
    script_[key(role, subject)] = std::move(text);
  }

  ChatResponse complete(const ChatRequest& request) override {
    validate(request);
    const auto start = std::chrono::steady_clock::now();
    ++calls_;
    const std::string* found = lookup(request);
    if (!found) {
      throw BackendError("scripted backend: no response for key '" + key(request.role_tag, request.subject_tag) + "'");
    }
    ChatResponse resp;
    resp.text = *found;
    resp.backend_id = id();
    resp.attempt_count = 1;
    resp.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return resp;
  }

  HealthStatus health_check() override { return HealthStatus::ok; }
  std::string id() const override { return "scripted"; }

 private:
  const std::string* lookup(const ChatRequest& r) const {
    if (auto it = script_.find(key(r.role_tag, r.subject_tag)); it != script_.end()) return &it->second;
    if (auto it = script_.find(key(r.role_tag, "*")); it != script_.end()) return &it->second;
    return default_ ? &*default_ : nullptr;
  }

  std::map<std::string, std::string> script_;
  std::optional<std::string> default_;
};

// ---------------------------------------------------------------------------

struct HttpBackendOptions {
  std::string base_url = "http://127.0.0.1:11434";
  std::string model = "llama3.2";
  double timeout_s = 120.0;
  int max_retries = 2;
  double backoff_s = 1.0;  // doubles after every failed attempt
  int max_in_flight = 4;
  double health_timeout_s = 10.0;
};

/// Ollama chat endpoint (POST /api/chat, stream disabled).
class OllamaBackend final : public ChatBackend {
 public:
  explicit OllamaBackend(HttpBackendOptions options)
      : options_(std::move(options)), in_flight_(std::max(1, std::min(options_.max_in_flight, kMaxInFlight))) {}

  const HttpBackendOptions& options() const { return options_; }

  static nlohmann::json request_body(const ChatRequest& r, const std::string& fallback_model) {
    nlohmann::json body;
    body["model"] = r.model.empty() ? fallback_model : r.model;
    body["messages"] = nlohmann::json::array({
        {{"role", "system"}, {"content", r.system_prompt}},
        {{"role", "user"}, {"content", r.user_prompt}},
    });
    body["stream"] = false;
    body["options"] = {{"temperature", r.temperature}, {"num_predict", r.max_tokens}};
    if (r.request_seed) body["options"]["seed"] = *r.request_seed;
    return body;
  }

  ChatResponse complete(const ChatRequest& request) override {
    validate(request);
    ++calls_;
    const std::string payload = request_body(request, options_.model).dump();
    SlotGuard slot(in_flight_);

    const auto start = std::chrono::steady_clock::now();
    std::string last_error;
    double backoff = options_.backoff_s;
    const int attempts = options_.max_retries + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      auto client = make_client(options_.timeout_s);
      auto res = client.Post("/api/chat", payload, "application/json");
      if (!res) {
        last_error = "endpoint unreachable: " + httplib::to_string(res.error());
      } else if (res->status >= 200 && res->status < 300) {
        std::string text = extract_content(res->body);
        if (text.empty()) throw BackendError("empty completion from " + options_.base_url);
        ChatResponse out;
        out.text = std::move(text);
        out.backend_id = id();
        out.attempt_count = attempt;
        out.latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return out;
      } else if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
      } else {
        throw BackendError("HTTP " + std::to_string(res->status) + " from " + options_.base_url + ": " + res->body);
      }
      if (attempt < attempts && backoff > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff *= 2.0;
      }
    }
    throw BackendError("request failed after " + std::to_string(attempts) + " attempts: " + last_error);
  }

  HealthStatus health_check() override {
    ChatRequest probe;
    probe.model = options_.model;
    probe.system_prompt = "You are a health check.";
    probe.user_prompt = "Reply with OK.";
    probe.max_tokens = 4;
    auto client = make_client(options_.health_timeout_s);
    auto res = client.Post("/api/chat", request_body(probe, options_.model).dump(), "application/json");
    if (!res) return HealthStatus::unreachable;
    if (res->status < 200 || res->status >= 300) return HealthStatus::model_missing;
    try {
      return extract_content(res->body).empty() ? HealthStatus::model_missing : HealthStatus::ok;
    } catch (const BackendError&) {
      return HealthStatus::model_missing;
    }
  }

  std::string id() const override { return "ollama:" + options_.model + "@" + options_.base_url; }

 private:
  static constexpr int kMaxInFlight = 64;

  class SlotGuard {
   public:
    explicit SlotGuard(std::counting_semaphore<kMaxInFlight>& s) : s_(s) { s_.acquire(); }
    ~SlotGuard() { s_.release(); }
    SlotGuard(const SlotGuard&) = delete;
    SlotGuard& operator=(const SlotGuard&) = delete;

   private:
    std::counting_semaphore<kMaxInFlight>& s_;
  };

  httplib::Client make_client(double timeout_s) const {
    httplib::Client client(options_.base_url);
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    return client;
  }

  static std::string extract_content(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("malformed response body: ") + e.what());
    }
    if (j.contains("error")) throw BackendError("server error: " + j.at("error").dump());
    if (!j.contains("message") || !j.at("message").contains("content")) {
      throw BackendError("response has no message.content");
    }
    return j.at("message").at("content").get<std::string>();
  }

  HttpBackendOptions options_;
  std::counting_semaphore<kMaxInFlight> in_flight_;
};

}  // namespace llmfs
