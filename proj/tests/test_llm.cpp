#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "egoqa/io.hpp"
#include "egoqa/llm.hpp"

using namespace egoqa;

namespace {

// Fixture images live under a fixed relative directory so prompt renderings
// (which embed the paths) stay byte-stable across runs and machines.
std::vector<std::string> fixture_images(const std::string& stem, int count) {
  std::filesystem::create_directories("prompt_imgs");
  std::vector<std::string> paths;
  for (int i = 0; i < count; ++i) {
    const std::string path = "prompt_imgs/" + stem + std::to_string(i) + ".png";
    std::ofstream(path).put('\0');
    paths.push_back(path);
  }
  return paths;
}

// Byte-exact comparison against a checked-in golden rendering. Set
// EGOQA_WRITE_GOLDENS=1 to regenerate after an intentional prompt change.
void check_golden(const std::string& name, const std::string& content) {
  const std::string path =
      std::string(EGOQA_SOURCE_DIR) + "/tests/fixtures/prompts/" + name;
  if (std::getenv("EGOQA_WRITE_GOLDENS")) {
    std::filesystem::create_directories(
        std::string(EGOQA_SOURCE_DIR) + "/tests/fixtures/prompts");
    io::write_text_file(path, content);
  }
  REQUIRE_MESSAGE(std::filesystem::exists(path), "missing golden file ", path);
  CHECK(io::read_text_file(path) == content);
}

// Fails `transient_failures` times, then succeeds.
class FlakyTransport : public Transport {
 public:
  explicit FlakyTransport(int transient_failures, std::string body = "pong")
      : failures_(transient_failures), body_(std::move(body)) {}

  TransportResult send(const ChatRequest&) override {
    if (failures_ > 0) {
      --failures_;
      return {false, true, "synthetic outage"};
    }
    return {true, false, body_};
  }

 private:
  int failures_;
  std::string body_;
};

ChatRequest tiny_request() {
  PromptInputs inputs;
  inputs.question = "Is the mug red?";
  inputs.ground_truth = "yes";
  inputs.prediction = "yes, it is red";
  return build_prompt(PromptKind::judge_binary, inputs);
}

}  // namespace

TEST_SUITE_BEGIN("llm");

TEST_CASE("caption prompt renders 11 parts in the documented order") {
  PromptInputs inputs;
  inputs.crop_images = fixture_images("crop", 4);
  inputs.bbox_images = fixture_images("bbox", 4);
  const ChatRequest req = build_prompt(PromptKind::caption, inputs);
  REQUIRE(req.messages.size() == 1);
  const auto& parts = req.messages[0].parts;
  REQUIRE(parts.size() == 11);
  CHECK(parts[0].kind == PartKind::text);
  for (int i = 1; i <= 4; ++i) CHECK(parts[i].kind == PartKind::image_ref);
  CHECK(parts[5].kind == PartKind::text);
  for (int i = 6; i <= 9; ++i) CHECK(parts[i].kind == PartKind::image_ref);
  CHECK(parts[10].kind == PartKind::text);
  check_golden("caption.golden.json", req.canonical_json());
}

TEST_CASE("comprehension prompt differs from caption only in the task text") {
  PromptInputs inputs;
  inputs.crop_images = fixture_images("crop", 4);
  inputs.bbox_images = fixture_images("bbox", 4);
  const ChatRequest req = build_prompt(PromptKind::comprehension_qa, inputs);
  REQUIRE(req.messages[0].parts.size() == 11);
  CHECK(req.messages[0].parts[10].content.find("<object>") != std::string::npos);
  check_golden("comprehension.golden.json", req.canonical_json());
}

TEST_CASE("object_list prompt takes exactly 8 frames") {
  PromptInputs inputs;
  inputs.frame_images = fixture_images("frame", 8);
  const ChatRequest req = build_prompt(PromptKind::object_list, inputs);
  REQUIRE(req.messages.size() == 2);
  CHECK(req.messages[0].role == "system");
  CHECK(req.messages[1].parts.size() == 8);
  check_golden("object_list.golden.json", req.canonical_json());

  PromptInputs seven;
  seven.frame_images = fixture_images("frame", 7);
  CHECK_THROWS_WITH_AS(static_cast<void>(build_prompt(PromptKind::object_list, seven)),
                       doctest::Contains("MissingInput"), Error);
}

TEST_CASE("missing image files are rejected") {
  PromptInputs inputs;
  inputs.frame_images = {"prompt_imgs/a.png", "prompt_imgs/b.png", "prompt_imgs/c.png",
                         "prompt_imgs/d.png", "prompt_imgs/e.png", "prompt_imgs/f.png",
                         "prompt_imgs/g.png", "does_not_exist.png"};
  fixture_images("", 0);
  for (int i = 0; i < 7; ++i) std::ofstream(inputs.frame_images[i]).put('\0');
  CHECK_THROWS_WITH_AS(static_cast<void>(build_prompt(PromptKind::object_list, inputs)),
                       doctest::Contains("MissingInput"), Error);
}

TEST_CASE("referring and judge prompts render against goldens") {
  PromptInputs ref;
  ref.qa_block = "Question: What color is the <object>?\nAnswer: Red.";
  check_golden("referring.golden.json",
               build_prompt(PromptKind::referring_expr, ref).canonical_json());

  check_golden("judge_binary.golden.json", tiny_request().canonical_json());

  PromptInputs open;
  open.question = "Describe the mug.";
  open.ground_truth = "a red ceramic mug";
  open.prediction = "a red cup";
  check_golden("judge_open.golden.json",
               build_prompt(PromptKind::judge_open, open).canonical_json());

  PromptInputs empty;
  CHECK_THROWS_WITH_AS(static_cast<void>(build_prompt(PromptKind::judge_binary, empty)),
                       doctest::Contains("MissingInput"), Error);
}

TEST_CASE("prompt rendering is identical across calls") {
  CHECK(tiny_request().canonical_json() == tiny_request().canonical_json());
  CHECK(tiny_request().digest() == tiny_request().digest());
}

TEST_CASE("parse_object_list: dedup, prefix rule, exclusions, cap") {
  CHECK(parse_object_list("chair; chair cushion; chair; table") ==
        std::vector<std::string>{"chair", "table"});
  CHECK(parse_object_list("wall; floor").empty());
  CHECK(parse_object_list(" Sofa ;  SOFA; sofa pillow ") ==
        std::vector<std::string>{"sofa"});
  CHECK(parse_object_list("chairs; chair") ==
        std::vector<std::string>{"chairs", "chair"});  // not a word prefix

  std::string many;
  for (int i = 0; i < 25; ++i) many += "object" + std::to_string(i) + "; ";
  const auto capped = parse_object_list(many);
  CHECK(capped.size() == 20);
  CHECK(capped.front() == "object0");
  CHECK(capped.back() == "object19");
}

TEST_CASE("parse_object_list is idempotent") {
  const std::vector<std::string> inputs = {
      "chair; chair cushion; lamp; wall; lamp shade; floor; mug",
      "a; a b; a b c; d",
      "",
  };
  for (const std::string& raw : inputs) {
    const auto once = parse_object_list(raw);
    std::string joined;
    for (const auto& s : once) {
      if (!joined.empty()) joined += "; ";
      joined += s;
    }
    CHECK(parse_object_list(joined) == once);
  }
}

TEST_CASE("merge_group_lists: union with re-dedup") {
  CHECK(merge_group_lists({"chair"}, {"table"}) ==
        std::vector<std::string>{"chair", "table"});
  CHECK(merge_group_lists({"chair"}, {"chair"}) == std::vector<std::string>{"chair"});
  CHECK(merge_group_lists({"cup"}, {"cup holder"}) == std::vector<std::string>{"cup"});
}

TEST_CASE("mock transport replays fixtures offline") {
  const ChatRequest req = tiny_request();
  MockTransport mock;
  mock.add(req.digest(), "1");
  Gateway gateway(mock);
  CHECK(gateway.chat(req) == "1");
  REQUIRE(gateway.log().size() == 1);
  CHECK(gateway.log()[0].attempts == 1);
  CHECK(gateway.log()[0].ok);
}

TEST_CASE("mock transport fixture file round-trip") {
  const ChatRequest req = tiny_request();
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(req.digest()));
  const std::string path = "fixture_roundtrip.jsonl";
  io::write_text_file(path, std::string("{\"request_digest\":\"") + hex +
                                "\",\"response_text\":\"0\"}\n");
  MockTransport mock = MockTransport::load(path);
  Gateway gateway(mock);
  CHECK(gateway.chat(req) == "0");
}

TEST_CASE("unknown digest fails permanently, not transiently") {
  MockTransport mock;
  Gateway gateway(mock);
  CHECK_THROWS_WITH_AS(static_cast<void>(gateway.chat(tiny_request())),
                       doctest::Contains("MalformedResponse"), Error);
}

TEST_CASE("retry: two transient failures then success, backoff 1 s then 2 s") {
  FlakyTransport flaky(2);
  std::vector<double> sleeps;
  Gateway gateway(flaky, [&](double s) { sleeps.push_back(s); });
  CHECK(gateway.chat(tiny_request()) == "pong");
  REQUIRE(gateway.log().size() == 1);
  CHECK(gateway.log()[0].attempts == 3);
  CHECK(sleeps == std::vector<double>{1.0, 2.0});
}

TEST_CASE("gateway caps concurrent in-flight requests") {
  class GaugeTransport : public Transport {
   public:
    TransportResult send(const ChatRequest&) override {
      const int now = ++current_;
      int prev = peak_.load();
      while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      --current_;
      return {true, false, "ok"};
    }
    int peak() const { return peak_.load(); }

   private:
    std::atomic<int> current_{0};
    std::atomic<int> peak_{0};
  };

  GaugeTransport gauge;
  Gateway gateway(gauge, nullptr, 3);
  std::vector<std::thread> workers;
  std::atomic<int> successes{0};
  for (int t = 0; t < 12; ++t) {
    workers.emplace_back([&] {
      if (gateway.chat(tiny_request()) == "ok") ++successes;
    });
  }
  for (auto& w : workers) w.join();
  CHECK(successes == 12);
  CHECK(gauge.peak() <= 3);
  CHECK(gateway.log().size() == 12);
}

TEST_CASE("retry: five consecutive failures exhaust the policy") {
  FlakyTransport dead(100);
  std::vector<double> sleeps;
  Gateway gateway(dead, [&](double s) { sleeps.push_back(s); });
  CHECK_THROWS_WITH_AS(static_cast<void>(gateway.chat(tiny_request())),
                       doctest::Contains("Exhausted"), Error);
  CHECK(sleeps == std::vector<double>{1.0, 2.0, 4.0, 8.0});
  REQUIRE(gateway.log().size() == 1);
  CHECK(gateway.log()[0].attempts == 5);
}

TEST_SUITE_END();
