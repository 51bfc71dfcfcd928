#pragma once

// OpenAI-compatible chat-completions transport.
//
// POST <endpoint_url>/chat/completions
//   {"model": ..., "messages": [{"role": "user", "content": prompt}],
//    "temperature": ...}
// The first choice's message content is the response text.

#include <cstdlib>
#include <memory>
#include <string>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "steerconf/backend.hpp"

namespace steerconf {

struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // "" or "/v1"
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  ep.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  return ep;
}

inline nlohmann::json chat_request_body(const ChatRequest& req) {
  return {{"model", req.model_id},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
          {"temperature", req.temperature}};
}

/// Extracts choices[0].message.content; throws TransportError on a malformed body.
inline std::string chat_response_text(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError(std::string("chat completion body is not JSON: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw TransportError("chat completion response has no choices");
  const auto& msg = j["choices"][0].value("message", nlohmann::json::object());
  if (!msg.contains("content") || !msg["content"].is_string())
    throw TransportError("chat completion choice has no message content");
  return msg["content"].get<std::string>();
}

class HttpTransport : public Transport {
 public:
  /// Reads the API key from STEERCONF_API_KEY; throws ConfigError when unset,
  /// before any connection is attempted.
  explicit HttpTransport(const BackendConfig& config) : endpoint_(split_endpoint(config.endpoint_url)) {
    const char* key = std::getenv(kApiKeyEnv);
    if (!key || !*key) throw ConfigError(std::string(kApiKeyEnv) + " is not set");
    api_key_ = key;
  }

  std::string generate(const ChatRequest& req) override {
    httplib::Client cli(endpoint_.origin);
    cli.set_connection_timeout(30);
    cli.set_read_timeout(300);
    cli.set_bearer_token_auth(api_key_);
    auto res = cli.Post(endpoint_.base_path + "/chat/completions", chat_request_body(req).dump(), "application/json");
    if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      throw TransportError("HTTP " + std::to_string(res->status) + " from chat completions endpoint");
    if (res->status != 200)
      throw Error("HTTP " + std::to_string(res->status) + " from chat completions endpoint: " + res->body);
    return chat_response_text(res->body);
  }

 private:
  Endpoint endpoint_;
  std::string api_key_;
};

}  // namespace steerconf
