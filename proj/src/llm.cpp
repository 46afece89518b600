#include "egoqa/llm.hpp"

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "egoqa/rng.hpp"

namespace egoqa {

using nlohmann::json;

namespace {

// Prompt texts. These are load-bearing data: the builders are pinned by
// golden files, so edits here must update tests/fixtures/prompts/.

const char* kObjectListSystem =
    "Please analyze the image sequence captured as I move through an indoor "
    "environment and provide a concise list of major distinct physical objects "
    "that can be detected and segmented in these scenes. You need to pay "
    "attention to the following points\n"
    "(1) Focus on tangible items such as furniture, appliances, and tools. "
    "Avoid nouns that denote locations and rooms like \"kitchen\" or \"bedroom\".\n"
    "(2) Limit the list to a maximum of 20 objects, and avoid including "
    "specific components or parts of these objects.\n"
    "(3) Ensure the list does not have duplicates.\n"
    "Your output must be a series of nouns separated by semicolons";

const char* kCropPrompt =
    "The above four images show a crop of the object we need to describe.";

const char* kBboxPrompt =
    "The four images above highlight the target object with a red bounding box "
    "and dimmed background.";

const char* kCaptionTask =
    "Please provide a detailed description of the specified object, focusing on "
    "its color, material, shape, state, position, function, surface detail and "
    "other information.\n"
    "(1) Stick to a narrative format for descriptions, avoiding list-like "
    "itemizations.\n"
    "(2) Just output the information you are sure of, if you output the wrong "
    "information you will be fired.";

const char* kComprehensionTask =
    "I need you to generate a series of question pairs for me about this "
    "object, using <object> to represent the object in the question pairs. You "
    "can focus on its category, color, material, shape, state, position, "
    "function, surface detail, size and other information.\n"
    "\"Output example\"\n"
    "Question: What color is the <object>?\n"
    "Answer: Mainly red, with some blue as decoration.\n"
    "Notes:\n"
    "(1) The object in all images is the same; QA should focus solely on it, "
    "without referencing specific images.\n"
    "(2) Ask as many questions as needed - the more details, the better.\n"
    "(3) Prioritize reasoning and spatial understanding questions over simple "
    "ones.\n"
    "(4) You can ask questions about the target object by associating it with "
    "the surrounding objects (e.g., comparison, spatial relationship, "
    "functional relationship, quantitative relationship, etc.).";

const char* kReferringSystem =
    "You are analyzing indoor objects. Given a series of QAs about a single "
    "object (marked as <object>), use the information to generate two referring "
    "expressions that uniquely identify it.\n"
    "The two expressions should be:\n"
    "- One simple referring expression, using attributes such as category, "
    "color, material, spatial location, or function.\n"
    "- One situational referring expression, involving contextual reasoning and "
    "diverse sentence structures.";

const char* kJudgeBinaryHeader =
    "You are grading a model answer against a reference answer. Reply with "
    "exactly one number: 1 if the model answer matches the reference in "
    "meaning, otherwise 0. Do not output anything else.";

const char* kJudgeOpenHeader =
    "You are grading a model answer against a reference answer. Reply with "
    "exactly one number from {0, 0.2, 0.4, 0.6, 0.8, 1}: 1 for a fully correct "
    "and complete answer, 0 for an entirely wrong one, intermediate values for "
    "partially correct answers. Do not output anything else.";

void require_images(const std::vector<std::string>& paths, std::size_t expected,
                    const char* what) {
  require(paths.size() == expected, Errc::missing_input,
          std::string(what) + ": expected " + std::to_string(expected) + " images, got " +
              std::to_string(paths.size()));
  for (const std::string& path : paths) {
    require(std::filesystem::exists(path), Errc::missing_input,
            std::string(what) + ": image file not found: " + path);
  }
}

MessagePart text_part(std::string text) {
  return MessagePart{PartKind::text, std::move(text)};
}

MessagePart image_part(std::string path) {
  return MessagePart{PartKind::image_ref, std::move(path)};
}

std::string judge_body(const char* header, const PromptInputs& in) {
  std::string body = header;
  body += "\nQuestion: " + in.question;
  body += "\nReference answer: " + in.ground_truth;
  body += "\nModel answer: " + in.prediction;
  body += "\nScore:";
  return body;
}

}  // namespace

std::string ChatRequest::canonical_json() const {
  json doc;
  doc["model"] = model;
  doc["temperature"] = temperature;
  doc["max_tokens"] = max_tokens;
  json msgs = json::array();
  for (const ChatMessage& m : messages) {
    json parts = json::array();
    for (const MessagePart& p : m.parts) {
      parts.push_back({{"kind", p.kind == PartKind::text ? "text" : "image_ref"},
                       {"content", p.content}});
    }
    msgs.push_back({{"role", m.role}, {"parts", parts}});
  }
  doc["messages"] = msgs;
  return doc.dump();
}

std::uint64_t ChatRequest::digest() const { return Rng::hash_str(canonical_json()); }

ChatRequest build_prompt(PromptKind kind, const PromptInputs& inputs) {
  ChatRequest req;
  req.model = inputs.model;
  switch (kind) {
    case PromptKind::object_list: {
      require_images(inputs.frame_images, 8, "object_list");
      req.messages.push_back({"system", {text_part(kObjectListSystem)}});
      ChatMessage user{"user", {}};
      for (const std::string& path : inputs.frame_images) user.parts.push_back(image_part(path));
      req.messages.push_back(std::move(user));
      break;
    }
    case PromptKind::caption:
    case PromptKind::comprehension_qa: {
      require_images(inputs.crop_images, 4, "caption crop set");
      require_images(inputs.bbox_images, 4, "caption bbox set");
      ChatMessage user{"user", {}};
      user.parts.push_back(text_part(kCropPrompt));
      for (const std::string& path : inputs.crop_images) user.parts.push_back(image_part(path));
      user.parts.push_back(text_part(kBboxPrompt));
      for (const std::string& path : inputs.bbox_images) user.parts.push_back(image_part(path));
      user.parts.push_back(
          text_part(kind == PromptKind::caption ? kCaptionTask : kComprehensionTask));
      req.messages.push_back(std::move(user));
      break;
    }
    case PromptKind::referring_expr: {
      require(!inputs.qa_block.empty(), Errc::missing_input,
              "referring_expr needs the aggregated QA block");
      req.messages.push_back({"system", {text_part(kReferringSystem)}});
      req.messages.push_back({"user", {text_part(inputs.qa_block)}});
      break;
    }
    case PromptKind::judge_binary:
    case PromptKind::judge_open: {
      require(!inputs.question.empty() && !inputs.ground_truth.empty(), Errc::missing_input,
              "judge prompts need question and ground truth");
      const char* header =
          kind == PromptKind::judge_binary ? kJudgeBinaryHeader : kJudgeOpenHeader;
      req.messages.push_back({"user", {text_part(judge_body(header, inputs))}});
      break;
    }
  }
  return req;
}

std::vector<std::string> parse_object_list(const std::string& raw) {
  std::vector<std::string> phrases;
  std::string current;
  auto flush = [&]() {
    // trim + lowercase
    std::size_t b = current.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
      current.clear();
      return;
    }
    std::size_t e = current.find_last_not_of(" \t\r\n");
    std::string phrase = current.substr(b, e - b + 1);
    std::transform(phrase.begin(), phrase.end(), phrase.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(phrases.begin(), phrases.end(), phrase) == phrases.end()) {
      phrases.push_back(std::move(phrase));
    }
    current.clear();
  };
  for (char c : raw) {
    if (c == ';') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();

  auto word_prefixed = [&](const std::string& phrase) {
    for (const std::string& other : phrases) {
      if (other.size() >= phrase.size() || other.empty()) continue;
      if (phrase.compare(0, other.size(), other) == 0 && phrase[other.size()] == ' ') {
        return true;  // "chair" word-prefixes "chair cushion"
      }
    }
    return false;
  };

  std::vector<std::string> out;
  for (const std::string& phrase : phrases) {
    if (phrase == "wall" || phrase == "floor") continue;
    if (word_prefixed(phrase)) continue;
    out.push_back(phrase);
    if (out.size() == 20) break;
  }
  return out;
}

std::vector<std::string> merge_group_lists(const std::vector<std::string>& odd,
                                           const std::vector<std::string>& even) {
  std::string joined;
  for (const std::string& s : odd) {
    if (!joined.empty()) joined += "; ";
    joined += s;
  }
  for (const std::string& s : even) {
    if (!joined.empty()) joined += "; ";
    joined += s;
  }
  return parse_object_list(joined);
}

MockTransport MockTransport::load(const std::string& fixture_path) {
  std::ifstream in(fixture_path);
  require(in.good(), Errc::io_error, "cannot open fixture " + fixture_path);
  MockTransport mock;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      raise(Errc::parse_error, std::string("fixture line: ") + e.what());
    }
    const std::string digest_hex = record.at("request_digest").get<std::string>();
    mock.responses_[std::stoull(digest_hex, nullptr, 16)] =
        record.at("response_text").get<std::string>();
  }
  return mock;
}

MockTransport MockTransport::from_pairs(const std::map<std::uint64_t, std::string>& responses) {
  MockTransport mock;
  mock.responses_ = responses;
  return mock;
}

void MockTransport::add(std::uint64_t digest, std::string response) {
  responses_[digest] = std::move(response);
}

TransportResult MockTransport::send(const ChatRequest& request) {
  auto it = responses_.find(request.digest());
  if (it == responses_.end()) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(request.digest()));
    return {false, false, std::string("no fixture for request digest ") + hex};
  }
  return {true, false, it->second};
}

// Shared mutable state: the log and the in-flight limiter.
struct Gateway::Slot {
  explicit Slot(int cap) : in_flight_cap(cap) {}

  std::mutex mutex;
  std::condition_variable ready;
  int in_flight = 0;
  const int in_flight_cap;
  std::vector<ChatLogEntry> log;

  void acquire() {
    std::unique_lock lock(mutex);
    ready.wait(lock, [this] { return in_flight < in_flight_cap; });
    ++in_flight;
  }

  void release() {
    {
      std::lock_guard lock(mutex);
      --in_flight;
    }
    ready.notify_one();
  }

  void record(const ChatLogEntry& entry) {
    std::lock_guard lock(mutex);
    log.push_back(entry);
  }
};

Gateway::Gateway(Transport& transport, SleepFn sleep, int max_in_flight)
    : transport_(transport),
      sleep_(std::move(sleep)),
      slot_(std::make_shared<Slot>(std::max(1, max_in_flight))) {}

std::vector<ChatLogEntry> Gateway::log() const {
  std::lock_guard lock(slot_->mutex);
  return slot_->log;
}

std::string Gateway::chat(const ChatRequest& request) {
  const int max_attempts = std::max(1, request.retry.max_attempts);
  double delay = request.retry.base_delay_s;
  ChatLogEntry entry;
  entry.request_digest = request.digest();

  slot_->acquire();
  struct Release {
    Slot* slot;
    ~Release() { slot->release(); }
  } release{slot_.get()};

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    entry.attempts = attempt;
    const TransportResult result = transport_.send(request);
    if (result.ok) {
      if (result.body.empty()) {
        slot_->record(entry);
        raise(Errc::malformed_response, "transport returned an empty body");
      }
      entry.ok = true;
      char hex[32];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(Rng::hash_str(result.body)));
      entry.response_digest_hex = hex;
      slot_->record(entry);
      return result.body;
    }
    if (!result.transient) {
      slot_->record(entry);
      raise(Errc::malformed_response, "permanent transport failure: " + result.body);
    }
    if (attempt < max_attempts && sleep_) sleep_(delay);
    delay *= request.retry.backoff_factor;
  }
  slot_->record(entry);
  raise(Errc::transport_exhausted,
        "gave up after " + std::to_string(max_attempts) + " attempts");
}

}  // namespace egoqa
