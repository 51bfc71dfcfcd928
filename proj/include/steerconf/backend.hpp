#pragma once

// Chat-completion dispatch with a persistent response cache.
//
// A Client owns a Transport (HTTP or simulated) and a ResponseCache. Every
// request is keyed by SHA-256 over (model_id, prompt, temperature,
// sample_index); cached keys are never re-sent.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "steerconf/error.hpp"
#include "steerconf/log.hpp"
#include "steerconf/sha256.hpp"

namespace steerconf {

enum class BackendKind { http, simulated };

inline constexpr const char* kApiKeyEnv = "STEERCONF_API_KEY";

struct BackendConfig {
  BackendKind kind = BackendKind::simulated;
  std::string endpoint_url;  // http only, e.g. "https://api.openai.com/v1"
  std::string model_id = "simulated";
  double temperature = 0.0;
  int max_retries = 3;
  int parallelism = 1;
  std::uint64_t seed = 0;  // simulated only
  int retry_backoff_ms = 500;

  void validate() const {
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw ConfigError("backend temperature must be >= 0");
    if (parallelism < 1) throw ConfigError("backend parallelism must be >= 1");
    if (max_retries < 0) throw ConfigError("backend max_retries must be >= 0");
    if (retry_backoff_ms < 0) throw ConfigError("backend retry_backoff_ms must be >= 0");
    if (model_id.empty()) throw ConfigError("backend model_id must be non-empty");
    if (kind == BackendKind::http && endpoint_url.empty()) throw ConfigError("http backend requires endpoint_url");
  }
};

struct RawResponse {
  std::string request_key;
  std::string prompt;
  std::string model_id;
  int sample_index = 0;
  std::string text;
  std::string timestamp;  // ISO-8601 UTC
  bool operator==(const RawResponse&) const = default;
};

inline nlohmann::json to_json(const RawResponse& r) {
  return {{"request_key", r.request_key}, {"prompt", r.prompt},       {"model_id", r.model_id},
          {"sample_index", r.sample_index}, {"text", r.text},         {"timestamp", r.timestamp}};
}

inline RawResponse raw_response_from_json(const nlohmann::json& j) {
  return {j.at("request_key").get<std::string>(), j.at("prompt").get<std::string>(),
          j.at("model_id").get<std::string>(),    j.at("sample_index").get<int>(),
          j.at("text").get<std::string>(),        j.at("timestamp").get<std::string>()};
}

inline std::string request_key(std::string_view model_id, std::string_view prompt, double temperature,
                               int sample_index) {
  const nlohmann::json material = {model_id, prompt, temperature, sample_index};
  return sha256_hex(material.dump());
}

inline std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only JSONL cache. Last line for a key wins. An empty path keeps the
/// cache in memory only.
class ResponseCache {
 public:
  ResponseCache() = default;

  explicit ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    // an interrupted writer can leave a final line without '\n'; the next
    // append must start on a fresh line
    in.seekg(0, std::ios::end);
    if (in.tellg() > 0) {
      in.seekg(-1, std::ios::end);
      needs_newline_ = in.get() != '\n';
    }
    in.clear();
    in.seekg(0);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto r = raw_response_from_json(nlohmann::json::parse(line));
        entries_[r.request_key] = std::move(r);
      } catch (const std::exception& e) {
        // a torn final line from an interrupted run is skipped, not fatal
        log::warn("cache " + path_.string() + ":" + std::to_string(lineno) + " skipped: " + e.what());
      }
    }
  }

  std::optional<RawResponse> find(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void append(const std::vector<RawResponse>& batch) {
    if (batch.empty()) return;
    std::lock_guard lock(mutex_);
    if (!path_.empty()) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      std::ofstream out(path_, std::ios::binary | std::ios::app);
      if (!out) throw Error("cannot open response cache for writing: " + path_.string());
      if (needs_newline_) out << '\n';
      needs_newline_ = false;
      for (const auto& r : batch) out << to_json(r).dump() << '\n';
      out.flush();
      if (!out) throw Error("response cache write failed: " + path_.string());
    }
    for (const auto& r : batch) entries_[r.request_key] = r;
  }

  size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, RawResponse> entries_;
  bool needs_newline_ = false;
};

struct ChatRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.0;
  int sample_index = 0;
  std::string request_key;
};

/// Raised by transports for failures worth retrying (network, 5xx, 429).
class TransportError : public Error {
 public:
  using Error::Error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string generate(const ChatRequest& request) = 0;
  virtual std::string timestamp() const { return utc_now_iso8601(); }
};

struct BatchItem {
  std::optional<RawResponse> response;
  std::string error;  // set iff response is empty
  bool ok() const { return response.has_value(); }
};

class Client {
 public:
  Client(BackendConfig config, std::unique_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache = nullptr)
      : config_(std::move(config)),
        transport_(std::move(transport)),
        cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()) {
    config_.validate();
    if (!transport_) throw ConfigError("client requires a transport");
  }

  const BackendConfig& config() const { return config_; }
  ResponseCache& cache() { return *cache_; }

  /// Transport invocations, including retries.
  size_t transport_calls() const { return calls_.load(); }

  RawResponse complete(const std::string& prompt, int sample_index, std::optional<double> temperature = {}) {
    auto [resp, fresh] = fetch(prompt, sample_index, temperature.value_or(config_.temperature));
    if (fresh) cache_->append({resp});
    return resp;
  }

  /// Results in input order. At most `parallelism` requests in flight. New
  /// responses are appended to the cache in input order once the batch ends,
  /// so the cache file does not depend on thread scheduling.
  std::vector<BatchItem> complete_batch(const std::vector<std::string>& prompts, int sample_index,
                                        std::optional<double> temperature = {}) {
    std::vector<std::pair<std::string, int>> requests;
    requests.reserve(prompts.size());
    for (const auto& p : prompts) requests.emplace_back(p, sample_index);
    return complete_requests(requests, temperature);
  }

  /// Like complete_batch, with a per-item sample index.
  std::vector<BatchItem> complete_requests(const std::vector<std::pair<std::string, int>>& requests,
                                           std::optional<double> temperature = {}) {
    const double temp = temperature.value_or(config_.temperature);
    std::vector<BatchItem> items(requests.size());
    std::vector<char> fresh(requests.size(), 0);
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i = next++; i < requests.size(); i = next++) {
        try {
          auto [resp, is_new] = fetch(requests[i].first, requests[i].second, temp);
          items[i].response = std::move(resp);
          fresh[i] = is_new;
        } catch (const std::exception& e) {
          items[i].error = e.what();
        }
      }
    };
    const size_t workers = std::min<size_t>(static_cast<size_t>(config_.parallelism), requests.size());
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    std::vector<RawResponse> new_entries;
    for (size_t i = 0; i < items.size(); ++i)
      if (fresh[i]) new_entries.push_back(*items[i].response);
    cache_->append(new_entries);
    return items;
  }

 private:
  std::pair<RawResponse, bool> fetch(const std::string& prompt, int sample_index, double temperature) {
    const auto key = request_key(config_.model_id, prompt, temperature, sample_index);
    if (auto hit = cache_->find(key)) return {std::move(*hit), false};
    ChatRequest req{config_.model_id, prompt, temperature, sample_index, key};
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0 && config_.retry_backoff_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry_backoff_ms) * (1 << (attempt - 1)));
      ++calls_;
      try {
        std::string text = transport_->generate(req);
        return {RawResponse{key, prompt, config_.model_id, sample_index, std::move(text), transport_->timestamp()},
                true};
      } catch (const TransportError& e) {
        last_error = e.what();
      }
    }
    throw Error("request failed after " + std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
  }

  BackendConfig config_;
  std::unique_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  std::atomic<size_t> calls_{0};
};

}  // namespace steerconf
