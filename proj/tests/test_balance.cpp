#include <doctest.h>

#include <cmath>

#include "egoqa/balance.hpp"

using namespace egoqa;

namespace {

FrequencyTable table(std::map<std::string, double> freq) {
  FrequencyTable t;
  t.frequency = std::move(freq);
  t.validate();
  return t;
}

QaItem pool_item(int index, const std::string& category) {
  QaItem item;
  item.id = "p" + std::to_string(index);
  item.question = "q";
  item.answer = "a";
  item.ability = "comprehension";
  item.answer_kind = AnswerKind::closed_text;
  item.category = category;
  return item;
}

}  // namespace

TEST_SUITE_BEGIN("balance");

TEST_CASE("taxonomy file parses with unique fine classes") {
  const Taxonomy tax = Taxonomy::load(std::string(EGOQA_SOURCE_DIR) + "/data/taxonomy.toml");
  CHECK(tax.coarse.size() == 12);
  CHECK(tax.fine.size() > 100);
  CHECK(tax.coarse_of("chair") == "furniture");
  CHECK(tax.coarse_of("toothbrush") == "bathroom_cleaning");
  CHECK(tax.coarse_of("flux capacitor") == "other");
}

TEST_CASE("shipped frequency table loads and matches the taxonomy") {
  const FrequencyTable freq =
      FrequencyTable::load(std::string(EGOQA_SOURCE_DIR) + "/data/frequencies_uniform.csv");
  const Taxonomy tax = Taxonomy::load(std::string(EGOQA_SOURCE_DIR) + "/data/taxonomy.toml");
  CHECK(freq.frequency.size() == tax.fine.size() + 1);  // every class plus "other"
  CHECK(freq.frequency.count("other") == 1);
  for (const std::string& fine : tax.fine) CHECK(freq.frequency.count(fine) == 1);
}

TEST_CASE("taxonomy rejects duplicates") {
  const char* dup = "[coarse.a]\nfine = [\"x\"]\n[coarse.b]\nfine = [\"x\"]\n";
  CHECK_THROWS_AS(static_cast<void>(Taxonomy::parse(dup)), Error);
}

TEST_CASE("frequency table validation") {
  const char* good = "fine_class,frequency\nchair,0.25\ncup,0.75\n";
  const FrequencyTable t = FrequencyTable::parse(good);
  CHECK(t.frequency.at("chair") == doctest::Approx(0.25));

  const char* off = "fine_class,frequency\nchair,0.3\ncup,0.3\n";
  CHECK_THROWS_AS(static_cast<void>(FrequencyTable::parse(off)), Error);
  const char* negative = "fine_class,frequency\nchair,-0.5\ncup,1.5\n";
  CHECK_THROWS_AS(static_cast<void>(FrequencyTable::parse(negative)), Error);
}

TEST_CASE("targets: exact proportions") {
  const auto targets =
      estimate_targets(table({{"chair", 0.30}, {"cup", 0.20}, {"other", 0.50}}), 10);
  CHECK(targets.at("chair") == 3);
  CHECK(targets.at("cup") == 2);
  CHECK(targets.at("other") == 5);
}

TEST_CASE("targets: largest remainder with name-order ties") {
  const auto targets =
      estimate_targets(table({{"a", 1.0 / 3}, {"b", 1.0 / 3}, {"c", 1.0 / 3}}), 10);
  CHECK(targets.at("a") == 4);
  CHECK(targets.at("b") == 3);
  CHECK(targets.at("c") == 3);
}

TEST_CASE("targets: zero total and sum preservation") {
  const auto zeros = estimate_targets(table({{"a", 0.5}, {"b", 0.5}}), 0);
  CHECK(zeros.at("a") == 0);
  CHECK(zeros.at("b") == 0);

  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, double> freq;
    double total = 0;
    const int classes = 2 + static_cast<int>(rng.below(40));
    for (int c = 0; c < classes; ++c) {
      const double f = rng.next_double() + 1e-3;
      freq["class" + std::to_string(c)] = f;
      total += f;
    }
    for (auto& [name, f] : freq) f /= total;
    double sum = 0;
    for (auto& [name, f] : freq) sum += f;
    freq.begin()->second += 1.0 - sum;  // close the rounding gap exactly
    const int n = static_cast<int>(rng.below(5000));
    const auto targets = estimate_targets(table(freq), n);
    long long assigned = 0;
    for (const auto& [name, count] : targets) assigned += count;
    CHECK(assigned == n);
  }
}

TEST_CASE("stratified sample: clamped draws with deficit report") {
  std::vector<QaItem> pool;
  for (int i = 0; i < 30; ++i) pool.push_back(pool_item(i, "chair"));
  for (int i = 30; i < 40; ++i) pool.push_back(pool_item(i, "cup"));

  const std::map<std::string, int> targets = {{"chair", 50}, {"cup", 4}};
  const SampleResult result = stratified_sample(pool, targets, 7);
  CHECK(result.report.at("chair").selected == 30);
  CHECK(result.report.at("chair").deficit == 20);
  CHECK(result.report.at("cup").selected == 4);
  CHECK(result.report.at("cup").deficit == 0);
  CHECK(result.total_selected == 34);
  CHECK(result.items.size() == 34);
}

TEST_CASE("stratified sample: empty pool reports full deficits") {
  const SampleResult result = stratified_sample({}, {{"chair", 5}}, 1);
  CHECK(result.items.empty());
  CHECK(result.report.at("chair").deficit == 5);
}

TEST_CASE("stratified sample: deterministic per seed, counts stable across seeds") {
  std::vector<QaItem> pool;
  Rng rng(3);
  const std::vector<std::string> classes = {"chair", "cup", "plant", "book"};
  for (int i = 0; i < 400; ++i) {
    pool.push_back(pool_item(i, classes[rng.below(classes.size())]));
  }
  const std::map<std::string, int> targets = {
      {"chair", 40}, {"cup", 30}, {"plant", 20}, {"book", 10}};

  const SampleResult a1 = stratified_sample(pool, targets, 101);
  const SampleResult a2 = stratified_sample(pool, targets, 101);
  REQUIRE(a1.items.size() == a2.items.size());
  for (std::size_t i = 0; i < a1.items.size(); ++i) CHECK(a1.items[i].id == a2.items[i].id);

  const SampleResult b = stratified_sample(pool, targets, 202);
  CHECK(b.items.size() == a1.items.size());
  std::map<std::string, int> count_a, count_b;
  for (const QaItem& item : a1.items) ++count_a[item.category];
  for (const QaItem& item : b.items) ++count_b[item.category];
  CHECK(count_a == count_b);
  bool identity_differs = false;
  for (std::size_t i = 0; i < a1.items.size(); ++i) {
    if (a1.items[i].id != b.items[i].id) identity_differs = true;
  }
  CHECK(identity_differs);
}

TEST_CASE("realized distribution stays within rounding plus deficit slack") {
  Rng rng(17);
  std::map<std::string, double> freq;
  const int classes = 25;
  double total = 0;
  for (int c = 0; c < classes; ++c) {
    freq["c" + std::to_string(c)] = 1 + static_cast<double>(rng.below(10));
    total += freq["c" + std::to_string(c)];
  }
  for (auto& [name, f] : freq) f /= total;
  double sum = 0;
  for (auto& [name, f] : freq) sum += f;
  freq.begin()->second += 1.0 - sum;
  const FrequencyTable ft = table(freq);

  std::vector<QaItem> pool;
  Rng pool_rng(23);
  for (int i = 0; i < 5000; ++i) {
    pool.push_back(pool_item(i, "c" + std::to_string(pool_rng.below(classes))));
  }
  const int n = 1000;
  const auto targets = estimate_targets(ft, n);
  const SampleResult result = stratified_sample(pool, targets, 5);

  std::map<std::string, int> realized;
  for (const QaItem& item : result.items) ++realized[item.category];
  double l1 = 0;
  for (const auto& [name, f] : ft.frequency) {
    const double share =
        static_cast<double>(realized[name]) / static_cast<double>(result.total_selected);
    l1 += std::abs(share - f);
  }
  const double rounding_slack = static_cast<double>(classes) / n;
  const double deficit_mass = static_cast<double>(result.total_deficit) / n;
  CHECK(l1 <= rounding_slack + 2 * deficit_mass + 1e-9);

  // Componentwise: never above target; equal wherever supply sufficed.
  for (const auto& [name, entry] : result.report) {
    CHECK(realized[name] <= entry.target);
    if (entry.available >= entry.target) CHECK(realized[name] == entry.target);
  }
}

TEST_SUITE_END();
