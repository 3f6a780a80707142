#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "convoforge/gateway.hpp"

// OpenAI-compatible HTTP dialect. All backends the pipeline cares about
// (Ollama- and Bedrock-style gateways) expose this shape; other dialects
// slot in as further ChatBackend implementations.

namespace convoforge::gateway {

struct HttpEndpoint {
  std::string base_url;     // e.g. http://localhost:11434
  std::string model;        // model name sent on the wire
  std::string api_key_env;  // env var holding the credential, may be empty
  double timeout_s = 120.0;

  std::string api_key() const {
    if (api_key_env.empty()) return {};
    const char* v = std::getenv(api_key_env.c_str());
    return v ? v : "";
  }
};

namespace detail {

inline std::pair<std::string, std::string> split_url(const std::string& url) {
  // scheme://host:port/prefix -> (scheme://host:port, /prefix)
  auto scheme = url.find("://");
  auto path_at = scheme == std::string::npos ? url.find('/')
                                             : url.find('/', scheme + 3);
  if (path_at == std::string::npos) return {url, ""};
  return {url.substr(0, path_at), url.substr(path_at)};
}

inline httplib::Client make_client(const HttpEndpoint& ep,
                                   const std::string& host) {
  httplib::Client client(host);
  const int secs = static_cast<int>(ep.timeout_s);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  return client;
}

}  // namespace detail

class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint ep) : ep_(std::move(ep)) {}

  std::string complete(const ChatRequest& request) override {
    auto [host, prefix] = detail::split_url(ep_.base_url);
    auto client = detail::make_client(ep_, host);
    httplib::Headers headers;
    const std::string key = ep_.api_key();
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    const std::string body = request.wire_json(ep_.model).dump();
    auto res = client.Post(prefix + "/v1/chat/completions", headers, body,
                           "application/json");
    if (!res)
      throw TransportError("chat: no response from " + ep_.base_url + " (" +
                           httplib::to_string(res.error()) + ")");
    if (res->status != 200)
      throw TransportError("chat: HTTP " + std::to_string(res->status) +
                           " from " + ep_.base_url + ": " + res->body);
    try {
      json j = json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const json::exception& e) {
      throw TransportError(std::string("chat: malformed reply: ") + e.what() +
                           "; body: " + res->body.substr(0, 512));
    }
  }

  std::string name() const override { return "http:" + ep_.base_url; }

 private:
  HttpEndpoint ep_;
};

class HttpTtsBackend : public TtsBackend {
 public:
  explicit HttpTtsBackend(HttpEndpoint ep) : ep_(std::move(ep)) {}

  AudioBuffer synthesize(const TtsRequest& request) override {
    auto [host, prefix] = detail::split_url(ep_.base_url);
    auto client = detail::make_client(ep_, host);
    httplib::Headers headers;
    const std::string key = ep_.api_key();
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    json body{{"model", ep_.model},
              {"input", request.text},
              {"voice", request.voice_id},
              {"response_format", "wav"},
              {"sample_rate", request.sample_rate}};
    auto res = client.Post(prefix + "/v1/audio/speech", headers, body.dump(),
                           "application/json");
    if (!res)
      throw TransportError("tts: no response from " + ep_.base_url + " (" +
                           httplib::to_string(res.error()) + ")");
    if (res->status != 200)
      throw TransportError("tts: HTTP " + std::to_string(res->status) +
                           " from " + ep_.base_url + ": " +
                           res->body.substr(0, 512));
    AudioBuffer buf = decode_wav(res->body);
    if (buf.sample_rate != request.sample_rate)
      throw TransportError("tts: backend returned sample rate " +
                           std::to_string(buf.sample_rate) + ", requested " +
                           std::to_string(request.sample_rate));
    return buf;
  }

  std::string name() const override { return "http:" + ep_.base_url; }

 private:
  HttpEndpoint ep_;
};

}  // namespace convoforge::gateway
