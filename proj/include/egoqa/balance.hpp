#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "egoqa/forge.hpp"
#include "egoqa/rng.hpp"

namespace egoqa {

// Coarse/fine indoor object taxonomy. Fine classes not present in the map
// route to the "other" bucket.
struct Taxonomy {
  std::vector<std::string> coarse;                  // file order
  std::vector<std::string> fine;                    // file order, unique
  std::map<std::string, std::string> fine_to_coarse;

  const std::string& coarse_of(const std::string& fine_class) const;

  // Parses the TOML-style taxonomy file:
  //   [coarse.furniture]
  //   fine = ["bed", "chair", ...]
  static Taxonomy load(const std::string& path);
  static Taxonomy parse(const std::string& text);
};

// Fine class -> relative frequency; must sum to 1 (+-1e-9).
struct FrequencyTable {
  std::map<std::string, double> frequency;

  void validate() const;
  // CSV with header `fine_class,frequency`.
  static FrequencyTable load(const std::string& path);
  static FrequencyTable parse(const std::string& text);
};

// Per-class integer targets: frequency * n, rounded by largest remainder so
// the counts sum to exactly n (remainder ties break by class name).
std::map<std::string, int> estimate_targets(const FrequencyTable& freq, int n);

struct DeficitEntry {
  int target = 0;
  int available = 0;
  int selected = 0;
  int deficit = 0;
};

struct SampleResult {
  std::vector<QaItem> items;  // pool order
  std::map<std::string, DeficitEntry> report;
  int total_selected = 0;
  int total_deficit = 0;
};

// Per class, a seeded uniform sample without replacement of
// min(target, available) items; shortfalls are reported, never redistributed.
// Classes absent from `targets` contribute nothing. Deterministic in
// (pool, targets, seed); the per-class sub-streams derive from the class name
// so map iteration order cannot matter.
SampleResult stratified_sample(const std::vector<QaItem>& pool,
                               const std::map<std::string, int>& targets,
                               std::uint64_t seed);

}  // namespace egoqa
