#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace sqlflow {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_output_tokens = 800;
  std::vector<std::string> stop_sequences;
};

struct ChatResponse {
  std::string content;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  double latency_ms = 0.0;
  std::string provenance;  // live | replay
  bool usage_estimated = false;
};

struct AuthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RateLimited : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ReplayMiss : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TimeoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
  bool retryable;
  explicit TransportError(const std::string& what, bool can_retry = true)
      : std::runtime_error(what), retryable(can_retry) {}
};

/// Thread-safe per-stage token/latency accounting. Only the final attempt of
/// a call is metered; attempts are counted separately.
class UsageLedger {
 public:
  struct StageUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long calls = 0;
    long long attempts = 0;
    double wall_ms = 0.0;
  };

  void record(const std::string& stage, long long prompt_tokens, long long completion_tokens,
              double wall_ms);
  void record_attempt(const std::string& stage);

  StageUsage stage(const std::string& name) const;
  std::map<std::string, StageUsage> snapshot() const;
  StageUsage total() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, StageUsage> stages_;
};

/// Stable content hash of a request; independent of serialization field order.
std::string cache_key(const ChatRequest& request);

/// SHA-256 hex digest of arbitrary content (manifest hashing).
std::string content_hash(const std::string& data);

/// ceil(characters / 4); used when the endpoint omits usage data and clearly
/// labeled approximate wherever it is reported.
long long estimate_tokens(const std::string& content);

/// How a request turns into a response over the wire (or a scripted stand-in).
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse send(const ChatRequest& request) = 0;
};

/// OpenAI-compatible chat-completions client.
class HttpTransport : public ChatTransport {
 public:
  HttpTransport(std::string base_url, std::string api_key, double timeout_s = 120.0);
  ChatResponse send(const ChatRequest& request) override;

 private:
  std::string base_url_;
  std::string api_key_;
  double timeout_s_;
};

enum class ReplayMode { off, record, strict };
ReplayMode replay_mode_from_string(const std::string& s);
std::string to_string(ReplayMode m);

struct GatewayConfig {
  ReplayMode replay = ReplayMode::off;
  std::string cache_root;
  int max_attempts = 3;
  double backoff_initial_s = 0.5;  // doubles per retry; set 0 in tests
};

/// Chat access with retries, record/replay caching, and usage accounting.
class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<ChatTransport> transport, UsageLedger* ledger);

  ChatResponse complete(const ChatRequest& request, const std::string& stage);

  const GatewayConfig& config() const { return config_; }

 private:
  std::optional<ChatResponse> lookup_cache(const std::string& key) const;
  void store_cache(const std::string& key, const ChatRequest& request,
                   const ChatResponse& response) const;
  std::string cache_file(const std::string& key) const;

  GatewayConfig config_;
  std::shared_ptr<ChatTransport> transport_;
  UsageLedger* ledger_;
};

nlohmann::json request_to_json(const ChatRequest& request);
ChatRequest request_from_json(const nlohmann::json& j);
nlohmann::json response_to_json(const ChatResponse& response);
ChatResponse response_from_json(const nlohmann::json& j);

}  // namespace sqlflow
