#pragma once

// POST {endpoint_url}/chat/completions in the OpenAI chat-completions shape.
// Frames travel as image_url content parts (http(s) URLs or data: URIs).

#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "demian/vlm/client.hpp"

namespace demian {

struct EndpointUrl {
  std::string scheme_host_port;  // "http://localhost:8000"
  std::string base_path;         // "/v1" (no trailing slash)
};

inline EndpointUrl split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  EndpointUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  out.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!out.base_path.empty() && out.base_path.back() == '/') out.base_path.pop_back();
  return out;
}

inline nlohmann::json chat_completion_body(const VlmRequest& req, const std::string& model_id) {
  using nlohmann::json;
  json content = json::array();
  for (const auto& frame : req.frames) {
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", frame}}}});
  }
  content.push_back({{"type", "text"}, {"text", req.user_text}});
  json messages = json::array();
  if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
  messages.push_back({{"role", "user"}, {"content", content}});
  return json{{"model", model_id},
              {"messages", messages},
              {"max_tokens", req.max_output_tokens},
              {"temperature", 0}};
}

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(ClientConfig config)
      : config_(std::move(config)), endpoint_(split_endpoint(config_.endpoint_url)) {}

  VlmResponse send(const VlmRequest& req) override {
    httplib::Client cli(endpoint_.scheme_host_port);
    const auto secs = static_cast<time_t>(config_.timeout);
    const auto usecs = static_cast<time_t>((config_.timeout - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    if (!config_.api_key.empty()) cli.set_bearer_token_auth(config_.api_key);

    const std::string body = chat_completion_body(req, config_.model_id).dump();
    auto res = cli.Post(endpoint_.base_path + "/chat/completions", body, "application/json");
    if (!res) {
      const auto err = res.error();
      const auto kind = err == httplib::Error::Read || err == httplib::Error::Write ||
                                err == httplib::Error::ConnectionTimeout
                            ? TransportErrorKind::timeout
                            : TransportErrorKind::network;
      throw TransportError(kind, 0, httplib::to_string(err));
    }
    if (res->status != 200) throw TransportError::from_status(res->status, res->body.substr(0, 512));

    try {
      const auto j = nlohmann::json::parse(res->body);
      VlmResponse out;
      out.raw_text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (j.contains("usage")) {
        out.input_tokens = j["usage"].value("prompt_tokens", 0);
        out.output_tokens = j["usage"].value("completion_tokens", 0);
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      // A 200 with an unreadable body is treated like a server fault.
      throw TransportError(TransportErrorKind::server, res->status,
                           std::string("malformed completion body: ") + e.what());
    }
  }

 private:
  ClientConfig config_;
  EndpointUrl endpoint_;
};

}  // namespace demian
