#include "egoqa/balance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace egoqa {

namespace {

const std::string kOther = "other";

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Pulls the quoted strings out of a `fine = [...]` array body.
std::vector<std::string> parse_string_array(const std::string& body, const std::string& where) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = body.find('"', pos);
    if (open == std::string::npos) break;
    const std::size_t close = body.find('"', open + 1);
    require(close != std::string::npos, Errc::parse_error,
            "unterminated string in " + where);
    out.push_back(body.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  return out;
}

}  // namespace

const std::string& Taxonomy::coarse_of(const std::string& fine_class) const {
  auto it = fine_to_coarse.find(fine_class);
  if (it != fine_to_coarse.end()) return it->second;
  return kOther;
}

Taxonomy Taxonomy::parse(const std::string& text) {
  Taxonomy tax;
  std::istringstream stream(text);
  std::string line;
  std::string current_coarse;
  std::string pending_array;  // accumulates a possibly multi-line array
  bool in_array = false;

  auto flush_array = [&]() {
    if (!in_array) return;
    require(!current_coarse.empty(), Errc::parse_error,
            "fine list outside a [coarse.*] section");
    for (const std::string& name : parse_string_array(pending_array, current_coarse)) {
      require(tax.fine_to_coarse.emplace(name, current_coarse).second, Errc::parse_error,
              "duplicate fine class '" + name + "'");
      tax.fine.push_back(name);
    }
    pending_array.clear();
    in_array = false;
  };

  while (std::getline(stream, line)) {
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;

    if (in_array) {
      pending_array += line;
      if (line.find(']') != std::string::npos) flush_array();
      continue;
    }
    if (line.front() == '[') {
      require(line.back() == ']', Errc::parse_error, "malformed section header: " + line);
      const std::string section = line.substr(1, line.size() - 2);
      require(section.rfind("coarse.", 0) == 0, Errc::parse_error,
              "unexpected section [" + section + "]");
      current_coarse = section.substr(7);
      require(!current_coarse.empty(), Errc::parse_error, "empty coarse category name");
      require(std::find(tax.coarse.begin(), tax.coarse.end(), current_coarse) ==
                  tax.coarse.end(),
              Errc::parse_error, "duplicate coarse category '" + current_coarse + "'");
      tax.coarse.push_back(current_coarse);
      continue;
    }
    const std::size_t eq = line.find('=');
    require(eq != std::string::npos, Errc::parse_error, "expected key = value: " + line);
    const std::string key = trim(line.substr(0, eq));
    require(key == "fine", Errc::parse_error, "unknown key '" + key + "'");
    pending_array = line.substr(eq + 1);
    in_array = true;
    if (pending_array.find(']') != std::string::npos) flush_array();
  }
  require(!in_array, Errc::parse_error, "unterminated fine array");
  return tax;
}

Taxonomy Taxonomy::load(const std::string& path) { return parse(read_file(path)); }

void FrequencyTable::validate() const {
  double sum = 0.0;
  for (const auto& [name, f] : frequency) {
    require(f >= 0.0, Errc::parse_error, "negative frequency for '" + name + "'");
    sum += f;
  }
  require(std::abs(sum - 1.0) <= 1e-9, Errc::parse_error,
          "frequencies sum to " + std::to_string(sum) + ", expected 1");
}

FrequencyTable FrequencyTable::parse(const std::string& text) {
  FrequencyTable table;
  std::istringstream stream(text);
  std::string line;
  bool first = true;
  while (std::getline(stream, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (first) {
      first = false;
      require(line == "fine_class,frequency", Errc::parse_error,
              "expected header 'fine_class,frequency', got '" + line + "'");
      continue;
    }
    const std::size_t comma = line.rfind(',');
    require(comma != std::string::npos, Errc::parse_error, "bad frequency row: " + line);
    const std::string name = trim(line.substr(0, comma));
    const double value = std::stod(line.substr(comma + 1));
    require(table.frequency.emplace(name, value).second, Errc::parse_error,
            "duplicate fine class '" + name + "' in frequency table");
  }
  table.validate();
  return table;
}

FrequencyTable FrequencyTable::load(const std::string& path) {
  return parse(read_file(path));
}

std::map<std::string, int> estimate_targets(const FrequencyTable& freq, int n) {
  require(n >= 0, Errc::invalid_argument, "target size must be >= 0");
  freq.validate();

  struct Entry {
    std::string name;
    int floor_count;
    double remainder;
  };
  std::vector<Entry> entries;
  long long assigned = 0;
  for (const auto& [name, f] : freq.frequency) {
    const double exact = f * static_cast<double>(n);
    const double fl = std::floor(exact);
    entries.push_back({name, static_cast<int>(fl), exact - fl});
    assigned += static_cast<long long>(fl);
  }
  long long leftover = n - assigned;

  // Largest remainder first; ties resolve by class name.
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.remainder != b.remainder) return a.remainder > b.remainder;
    return a.name < b.name;
  });
  std::map<std::string, int> targets;
  for (Entry& e : entries) {
    if (leftover > 0) {
      ++e.floor_count;
      --leftover;
    }
    targets[e.name] = e.floor_count;
  }
  return targets;
}

SampleResult stratified_sample(const std::vector<QaItem>& pool,
                               const std::map<std::string, int>& targets,
                               std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    require(!pool[i].category.empty(), Errc::invalid_argument,
            "pool item '" + pool[i].id + "' carries no fine class label");
    by_class[pool[i].category].push_back(i);
  }

  SampleResult result;
  std::vector<bool> selected(pool.size(), false);
  for (const auto& [name, target] : targets) {
    DeficitEntry entry;
    entry.target = target;
    auto it = by_class.find(name);
    std::vector<std::size_t> available = it == by_class.end() ? std::vector<std::size_t>{}
                                                              : it->second;
    entry.available = static_cast<int>(available.size());
    if (entry.available <= target) {
      for (std::size_t i : available) selected[i] = true;
      entry.selected = entry.available;
    } else {
      Rng rng(Rng::derive(seed, Rng::hash_str(name)));
      rng.shuffle(available);
      for (int k = 0; k < target; ++k) selected[available[k]] = true;
      entry.selected = target;
    }
    entry.deficit = target - entry.selected;
    result.total_selected += entry.selected;
    result.total_deficit += entry.deficit;
    result.report.emplace(name, entry);
  }

  result.items.reserve(result.total_selected);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (selected[i]) result.items.push_back(pool[i]);
  }
  return result;
}

}  // namespace egoqa
