#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "sqlflow/llm.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "sqlflow/textutil.hpp"

namespace sqlflow {

using nlohmann::json;
namespace fs = std::filesystem;

void UsageLedger::record(const std::string& stage, long long prompt_tokens,
                         long long completion_tokens, double wall_ms) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& s = stages_[stage];
  s.prompt_tokens += prompt_tokens;
  s.completion_tokens += completion_tokens;
  s.calls += 1;
  s.wall_ms += wall_ms;
}

void UsageLedger::record_attempt(const std::string& stage) {
  std::lock_guard<std::mutex> lock(mutex_);
  stages_[stage].attempts += 1;
}

UsageLedger::StageUsage UsageLedger::stage(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = stages_.find(name);
  return it == stages_.end() ? StageUsage{} : it->second;
}

std::map<std::string, UsageLedger::StageUsage> UsageLedger::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stages_;
}

UsageLedger::StageUsage UsageLedger::total() const {
  std::lock_guard<std::mutex> lock(mutex_);
  StageUsage t;
  for (const auto& [_, s] : stages_) {
    t.prompt_tokens += s.prompt_tokens;
    t.completion_tokens += s.completion_tokens;
    t.calls += s.calls;
    t.attempts += s.attempts;
    t.wall_ms += s.wall_ms;
  }
  return t;
}

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

}  // namespace

std::string content_hash(const std::string& data) { return sha256_hex(data); }

std::string cache_key(const ChatRequest& request) {
  // nlohmann objects serialize with sorted keys, so the dump is canonical.
  json canon;
  canon["model"] = request.model;
  canon["temperature"] = request.temperature;
  canon["max_output_tokens"] = request.max_output_tokens;
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  canon["messages"] = msgs;
  canon["stop_sequences"] = request.stop_sequences;
  return sha256_hex(canon.dump());
}

long long estimate_tokens(const std::string& content) {
  if (content.empty()) return 0;
  return static_cast<long long>((content.size() + 3) / 4);
}

ReplayMode replay_mode_from_string(const std::string& s) {
  if (s == "off") return ReplayMode::off;
  if (s == "record") return ReplayMode::record;
  if (s == "strict") return ReplayMode::strict;
  throw std::invalid_argument("unknown replay mode: " + s);
}

std::string to_string(ReplayMode m) {
  switch (m) {
    case ReplayMode::off: return "off";
    case ReplayMode::record: return "record";
    case ReplayMode::strict: return "strict";
  }
  return "off";
}

nlohmann::json request_to_json(const ChatRequest& request) {
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json j{{"model", request.model},
         {"messages", msgs},
         {"temperature", request.temperature},
         {"max_output_tokens", request.max_output_tokens}};
  if (!request.stop_sequences.empty()) j["stop_sequences"] = request.stop_sequences;
  return j;
}

ChatRequest request_from_json(const nlohmann::json& j) {
  ChatRequest r;
  r.model = j.at("model").get<std::string>();
  for (const auto& m : j.at("messages"))
    r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  r.temperature = j.value("temperature", 0.0);
  r.max_output_tokens = j.value("max_output_tokens", 800);
  if (j.contains("stop_sequences"))
    r.stop_sequences = j["stop_sequences"].get<std::vector<std::string>>();
  return r;
}

nlohmann::json response_to_json(const ChatResponse& response) {
  return json{{"content", response.content},
              {"prompt_tokens", response.prompt_tokens},
              {"completion_tokens", response.completion_tokens},
              {"latency_ms", response.latency_ms},
              {"usage_estimated", response.usage_estimated}};
}

ChatResponse response_from_json(const nlohmann::json& j) {
  ChatResponse r;
  r.content = j.at("content").get<std::string>();
  r.prompt_tokens = j.value("prompt_tokens", 0LL);
  r.completion_tokens = j.value("completion_tokens", 0LL);
  r.latency_ms = j.value("latency_ms", 0.0);
  r.usage_estimated = j.value("usage_estimated", false);
  return r;
}

HttpTransport::HttpTransport(std::string base_url, std::string api_key, double timeout_s)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

ChatResponse HttpTransport::send(const ChatRequest& request) {
  // Split "scheme://host[:port]/prefix" into client origin and path prefix.
  std::string origin = base_url_, prefix;
  auto scheme_end = base_url_.find("://");
  if (scheme_end != std::string::npos) {
    auto path_start = base_url_.find('/', scheme_end + 3);
    if (path_start != std::string::npos) {
      origin = base_url_.substr(0, path_start);
      prefix = base_url_.substr(path_start);
    }
  }

  httplib::Client client(origin);
  client.set_connection_timeout(static_cast<time_t>(timeout_s_), 0);
  client.set_read_timeout(static_cast<time_t>(timeout_s_), 0);
  client.set_write_timeout(static_cast<time_t>(timeout_s_), 0);

  json body{{"model", request.model}, {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens}};
  json msgs = json::array();
  for (const auto& m : request.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = msgs;
  if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto result = client.Post(prefix + "/chat/completions", headers, body.dump(),
                            "application/json");
  if (!result) {
    auto err = result.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write)
      throw TimeoutError("request timed out: " + httplib::to_string(err));
    throw TransportError("transport failure: " + httplib::to_string(err), true);
  }
  if (result->status == 401 || result->status == 403)
    throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(result->status) + ")");
  if (result->status == 429) throw RateLimited("rate limited by endpoint");
  if (result->status >= 500)
    throw TransportError("server error HTTP " + std::to_string(result->status), true);
  if (result->status != 200)
    throw TransportError("unexpected HTTP " + std::to_string(result->status) + ": " + result->body,
                         false);

  json doc = json::parse(result->body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
    throw TransportError("malformed completion payload", false);

  ChatResponse response;
  response.content = doc["choices"][0].at("message").at("content").get<std::string>();
  if (doc.contains("usage")) {
    response.prompt_tokens = doc["usage"].value("prompt_tokens", 0LL);
    response.completion_tokens = doc["usage"].value("completion_tokens", 0LL);
  } else {
    std::string prompt_text;
    for (const auto& m : request.messages) prompt_text += m.content;
    response.prompt_tokens = estimate_tokens(prompt_text);
    response.completion_tokens = estimate_tokens(response.content);
    response.usage_estimated = true;
  }
  return response;
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<ChatTransport> transport,
                 UsageLedger* ledger)
    : config_(std::move(config)), transport_(std::move(transport)), ledger_(ledger) {}

std::string Gateway::cache_file(const std::string& key) const {
  return config_.cache_root + "/" + key.substr(0, 2) + "/" + key + ".json";
}

std::optional<ChatResponse> Gateway::lookup_cache(const std::string& key) const {
  std::ifstream in(cache_file(key));
  if (!in) return std::nullopt;
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.contains("response")) return std::nullopt;
  return response_from_json(doc["response"]);
}

void Gateway::store_cache(const std::string& key, const ChatRequest& request,
                          const ChatResponse& response) const {
  fs::path path = cache_file(key);
  fs::create_directories(path.parent_path());
  json doc{{"request", request_to_json(request)}, {"response", response_to_json(response)}};
  // Write-then-rename keeps concurrent readers away from partial files;
  // identical keys imply identical payloads so last-writer-wins is fine.
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp);
    out << doc.dump(2) << '\n';
  }
  fs::rename(tmp, path);
}

ChatResponse Gateway::complete(const ChatRequest& request, const std::string& stage) {
  const std::string key = cache_key(request);

  if (config_.replay != ReplayMode::off) {
    if (auto hit = lookup_cache(key)) {
      hit->provenance = "replay";
      ledger_->record(stage, hit->prompt_tokens, hit->completion_tokens, hit->latency_ms);
      return *hit;
    }
    if (config_.replay == ReplayMode::strict)
      throw ReplayMiss("no replay entry for request key " + key);
  }

  if (!transport_) throw TransportError("no transport configured and replay missed", false);

  ChatResponse response;
  double backoff_s = config_.backoff_initial_s;
  for (int attempt = 1;; ++attempt) {
    ledger_->record_attempt(stage);
    auto t0 = std::chrono::steady_clock::now();
    try {
      response = transport_->send(request);
      if (response.latency_ms == 0.0) {
        response.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
      }
      break;
    } catch (const AuthError&) {
      throw;
    } catch (const TransportError& e) {
      if (!e.retryable || attempt >= config_.max_attempts) throw;
    } catch (const RateLimited&) {
      if (attempt >= config_.max_attempts) throw;
    } catch (const TimeoutError&) {
      if (attempt >= config_.max_attempts) throw;
    }
    if (backoff_s > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff_s));
      backoff_s *= 2;
    }
  }

  response.provenance = "live";
  if (config_.replay == ReplayMode::record) store_cache(key, request, response);
  ledger_->record(stage, response.prompt_tokens, response.completion_tokens, response.latency_ms);
  return response;
}

}  // namespace sqlflow
