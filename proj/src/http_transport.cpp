// HTTP transport for a chat-completions-compatible endpoint. Live calls are
// opt-in (CLI --live-llm); every test path goes through MockTransport.

#include "egoqa/llm.hpp"

#include <nlohmann/json.hpp>

// httplib drags in <resolv.h>, whose _res macro breaks Eigen when it is
// parsed first; keep this include last.
#include <httplib.h>

namespace egoqa {

using nlohmann::json;

namespace {

json to_wire(const ChatRequest& request) {
  json doc;
  doc["model"] = request.model;
  doc["temperature"] = request.temperature;
  doc["max_tokens"] = request.max_tokens;
  json messages = json::array();
  for (const ChatMessage& m : request.messages) {
    json content = json::array();
    for (const MessagePart& p : m.parts) {
      if (p.kind == PartKind::text) {
        content.push_back({{"type", "text"}, {"text", p.content}});
      } else {
        content.push_back(
            {{"type", "image_url"}, {"image_url", {{"url", "file://" + p.content}}}});
      }
    }
    messages.push_back({{"role", m.role}, {"content", content}});
  }
  doc["messages"] = messages;
  return doc;
}

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string endpoint, std::string api_key)
      : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {}

  TransportResult send(const ChatRequest& request) override {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const auto res =
        client.Post("/v1/chat/completions", headers, to_wire(request).dump(),
                    "application/json");
    if (!res) return {false, true, "connection failed"};
    if (res->status == 429 || res->status >= 500) {
      return {false, true, "status " + std::to_string(res->status)};
    }
    if (res->status != 200) {
      return {false, false, "status " + std::to_string(res->status) + ": " + res->body};
    }
    json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
      return {false, false, "unparseable completion body"};
    }
    const json& message = doc["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
      return {false, false, "completion has no text content"};
    }
    return {true, false, message["content"].get<std::string>()};
  }

 private:
  std::string endpoint_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& endpoint,
                                               const std::string& api_key) {
  return std::make_unique<HttpTransport>(endpoint, api_key);
}

}  // namespace egoqa
