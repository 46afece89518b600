#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "egoqa/error.hpp"
#include "egoqa/forge.hpp"

namespace egoqa {

enum class PartKind { text, image_ref };

struct MessagePart {
  PartKind kind = PartKind::text;
  std::string content;  // text body, or path to an image file
};

struct ChatMessage {
  std::string role;  // "system" | "user"
  std::vector<MessagePart> parts;
};

struct RetryPolicy {
  int max_attempts = 5;
  double base_delay_s = 1.0;
  double backoff_factor = 2.0;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 1024;
  RetryPolicy retry;

  // Canonical JSON rendering; the transport body and the fixture digest are
  // both derived from it, so it must stay byte-stable.
  std::string canonical_json() const;
  std::uint64_t digest() const;
};

enum class PromptKind {
  object_list,
  caption,
  comprehension_qa,
  referring_expr,
  judge_binary,
  judge_open,
};

// Inputs for build_prompt; fill the fields the kind needs.
struct PromptInputs {
  std::vector<std::string> frame_images;  // object_list: exactly 8 frames
  std::vector<std::string> crop_images;   // caption kinds: exactly 4
  std::vector<std::string> bbox_images;   // caption kinds: exactly 4
  std::string qa_block;                   // referring_expr: question/answer text
  std::string question;                   // judge kinds
  std::string ground_truth;
  std::string prediction;
  std::string model = "default";
};

// Deterministic prompt construction; rendering is pinned by golden files.
// Caption-style requests interleave: crop text, 4 crop images, bbox text,
// 4 bbox images, task text. Throws Errc::missing_input when a kind's inputs
// are absent or image files do not exist.
ChatRequest build_prompt(PromptKind kind, const PromptInputs& inputs);

// Post-processing of the object-list reply: split on semicolons, trim,
// lowercase, drop exact duplicates and phrases word-prefixed by another
// entry, drop "wall"/"floor", cap at 20.
std::vector<std::string> parse_object_list(const std::string& raw);

// Order-preserving union (odd group first) re-deduplicated by the parse
// rules.
std::vector<std::string> merge_group_lists(const std::vector<std::string>& odd,
                                           const std::vector<std::string>& even);

// Transport outcome: either a response body or a transient failure the
// gateway may retry.
struct TransportResult {
  bool ok = false;
  bool transient = false;  // retry-worthy when !ok
  std::string body;        // response text, or error detail
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult send(const ChatRequest& request) = 0;
};

// Replay transport over a fixture JSONL of {request_digest, response_text}.
// Fully offline; unknown digests fail permanently.
class MockTransport : public Transport {
 public:
  static MockTransport load(const std::string& fixture_path);
  static MockTransport from_pairs(const std::map<std::uint64_t, std::string>& responses);

  TransportResult send(const ChatRequest& request) override;

  void add(std::uint64_t digest, std::string response);

 private:
  std::map<std::uint64_t, std::string> responses_;
};

// HTTP chat-completions transport (bearer token); see http_transport.cpp.
std::unique_ptr<Transport> make_http_transport(const std::string& endpoint,
                                               const std::string& api_key);

struct ChatLogEntry {
  std::uint64_t request_digest = 0;
  int attempts = 0;
  bool ok = false;
  std::string response_digest_hex;
};

// Retrying client around a transport. Sleeps between attempts via an
// injectable hook so tests run instantly. Callers may share one Gateway
// across threads; at most max_in_flight requests hit the transport at once.
class Gateway {
 public:
  using SleepFn = std::function<void(double seconds)>;

  explicit Gateway(Transport& transport, SleepFn sleep = nullptr, int max_in_flight = 4);

  // Sends with exponential backoff per request.retry. Throws
  // Errc::transport_exhausted after max_attempts transient failures and
  // Errc::malformed_response on empty bodies or permanent refusals.
  std::string chat(const ChatRequest& request);

  std::vector<ChatLogEntry> log() const;

 private:
  struct Slot;
  Transport& transport_;
  SleepFn sleep_;
  std::shared_ptr<Slot> slot_;
};

}  // namespace egoqa
