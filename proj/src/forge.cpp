#include "egoqa/forge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace egoqa {

using nlohmann::json;

const char* answer_kind_name(AnswerKind kind) noexcept {
  switch (kind) {
    case AnswerKind::numeric_scale: return "numeric_scale";
    case AnswerKind::numeric_angle: return "numeric_angle";
    case AnswerKind::closed_text: return "closed_text";
    case AnswerKind::open_text: return "open_text";
    case AnswerKind::segmentation: return "segmentation";
  }
  return "unknown";
}

AnswerKind answer_kind_from_name(const std::string& name) {
  if (name == "numeric_scale") return AnswerKind::numeric_scale;
  if (name == "numeric_angle") return AnswerKind::numeric_angle;
  if (name == "closed_text") return AnswerKind::closed_text;
  if (name == "open_text") return AnswerKind::open_text;
  if (name == "segmentation") return AnswerKind::segmentation;
  raise(Errc::parse_error, "unknown answer kind '" + name + "'");
}

namespace {

const std::array<const char*, 3> kSlots = {"[A]", "[B]", "[C]"};

void validate_template(const Template& tmpl) {
  require(tmpl.phrasings.size() >= 3, Errc::parse_error,
          "template '" + tmpl.id + "' needs >= 3 phrasings");
  require(tmpl.operand_count >= 0 && tmpl.operand_count <= 3, Errc::parse_error,
          "template '" + tmpl.id + "' has unsupported operand count");
  for (const std::string& phrasing : tmpl.phrasings) {
    for (int s = 0; s < 3; ++s) {
      const bool present = phrasing.find(kSlots[s]) != std::string::npos;
      const bool needed = s < tmpl.operand_count;
      require(present == needed, Errc::parse_error,
              "template '" + tmpl.id + "' phrasing has wrong slots: " + phrasing);
    }
  }
}

}  // namespace

const Template* TemplateRegistry::find(const std::string& id) const {
  for (const Template& tmpl : templates) {
    if (tmpl.id == id) return &tmpl;
  }
  return nullptr;
}

TemplateRegistry TemplateRegistry::parse(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(Errc::parse_error, std::string("template registry: ") + e.what());
  }
  TemplateRegistry registry;
  for (const json& block : doc.at("templates")) {
    Template tmpl;
    tmpl.id = block.at("id").get<std::string>();
    tmpl.ability = block.value("ability", tmpl.id);
    tmpl.variant = block.value("variant", std::string("quantitative")) == "qualitative"
                       ? TemplateVariant::qualitative
                       : TemplateVariant::quantitative;
    tmpl.answer_kind = answer_kind_from_name(block.at("answer_kind").get<std::string>());
    tmpl.operand_count = block.at("operands").get<int>();
    for (const json& p : block.at("phrasings")) tmpl.phrasings.push_back(p.get<std::string>());
    validate_template(tmpl);
    require(registry.find(tmpl.id) == nullptr, Errc::parse_error,
            "duplicate template id '" + tmpl.id + "'");
    registry.templates.push_back(std::move(tmpl));
  }
  return registry;
}

TemplateRegistry TemplateRegistry::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io_error, "cannot open template registry " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

CueFrameSet select_cue_frames(const Track& track, int frame_width, int frame_height) {
  std::vector<int> frames;
  frames.reserve(track.frames.size());
  for (const auto& [frame, mask] : track.frames) frames.push_back(frame);
  require(frames.size() >= 8, Errc::too_short_track,
          "cue selection needs >= 8 frames, track has " + std::to_string(frames.size()));

  const double pixels = static_cast<double>(frame_width) * frame_height;
  const double half_diag = 0.5 * std::hypot(frame_width, frame_height);
  const double center_col = frame_width / 2.0;
  const double center_row = frame_height / 2.0;

  CueFrameSet out;
  out.instance_id = track.instance_id;
  const std::size_t n = frames.size();
  for (int g = 0; g < 8; ++g) {
    const std::size_t lo = n * g / 8;
    const std::size_t hi = n * (g + 1) / 8;
    double best_score = -1e18;
    int best_frame = frames[lo];
    for (std::size_t i = lo; i < hi; ++i) {
      const Rle& mask = track.frames.at(frames[i]);
      double col = 0.0, row = 0.0;
      double score;
      if (rle::centroid(mask, col, row)) {
        const double area_fraction = static_cast<double>(rle::area(mask)) / pixels;
        const double offset = std::hypot(col - center_col, row - center_row) / half_diag;
        score = area_fraction - 0.5 * offset;
      } else {
        score = -1e9;  // empty mask: never preferred over a visible one
      }
      if (score > best_score) {
        best_score = score;
        best_frame = frames[i];
      }
    }
    out.frames[g] = CueFrame{best_frame, g < 4 ? CueMode::crop : CueMode::highlight};
  }
  return out;
}

std::string format_meters(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f m", value);
  return buf;
}

std::string format_degrees(double value) {
  long long deg = std::llround(value) % 360;
  if (deg < 0) deg += 360;
  return std::to_string(deg) + " deg";
}

namespace {

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::string fact_id(const SpatialFact& fact) {
  std::string out = fact_kind_name(fact.kind);
  for (int op : fact.operands) out += ":" + std::to_string(op);
  return out;
}

// Canonical answer for one fact under the template's answer kind.
std::string derive_answer(const Template& tmpl, const SpatialFact& fact,
                          const std::map<int, std::string>& refs) {
  switch (tmpl.answer_kind) {
    case AnswerKind::numeric_scale:
      return format_meters(fact.value);
    case AnswerKind::numeric_angle:
      return format_degrees(fact.value);
    case AnswerKind::closed_text:
      if (fact.kind == FactKind::rank_extreme) {
        const int winner = std::stoi(fact.label);
        auto it = refs.find(winner);
        require(it != refs.end(), Errc::missing_referring_expression,
                "no referring expression for instance " + fact.label);
        return it->second;
      }
      if (fact.kind == FactKind::vertical_relation) {
        return fact.label == "above" ? "yes" : "no";
      }
      return fact.label;  // sector labels pass through verbatim
    case AnswerKind::open_text:
      return fact.label;
    case AnswerKind::segmentation:
      break;
  }
  raise(Errc::invalid_argument, "template '" + tmpl.id + "' has unsupported answer kind");
}

}  // namespace

QaItem instantiate(const Template& tmpl, int phrasing_index,
                   const std::vector<SpatialFact>& facts,
                   const std::map<int, std::string>& refs,
                   std::uint64_t provenance_seed) {
  require(!facts.empty(), Errc::missing_slot, "no facts supplied");
  require(phrasing_index >= 0 &&
              phrasing_index < static_cast<int>(tmpl.phrasings.size()),
          Errc::invalid_argument, "phrasing index out of range");
  const SpatialFact& fact = facts.front();
  require(static_cast<int>(fact.operands.size()) >= tmpl.operand_count, Errc::missing_slot,
          "template '" + tmpl.id + "' needs " + std::to_string(tmpl.operand_count) +
              " operands, fact has " + std::to_string(fact.operands.size()));

  QaItem item;
  item.question = tmpl.phrasings[phrasing_index];
  for (int s = 0; s < tmpl.operand_count; ++s) {
    auto it = refs.find(fact.operands[s]);
    require(it != refs.end(), Errc::missing_referring_expression,
            "no referring expression for instance " + std::to_string(fact.operands[s]));
    item.question = replace_all(item.question, kSlots[s], it->second);
  }
  item.answer = derive_answer(tmpl, fact, refs);
  item.answer_kind = tmpl.answer_kind;
  item.ability = tmpl.ability;
  item.operands = fact.operands;
  item.provenance.template_id = tmpl.id;
  item.provenance.phrasing_index = phrasing_index;
  for (const SpatialFact& f : facts) item.provenance.fact_ids.push_back(fact_id(f));
  item.provenance.rng_seed = provenance_seed;
  return item;
}

namespace {

// One enumerated question candidate: the fact to instantiate.
struct Candidate {
  SpatialFact fact;
};

double relative_margin(double best, double second) {
  const double denom = std::max(std::abs(best), std::abs(second));
  if (denom == 0.0) return 0.0;
  return std::abs(best - second) / denom;
}

// Winner id + margin-to-runner-up for a ranked candidate tuple. Returns
// false when ranking is ambiguous (tie or insufficient margin).
bool rank_with_margin(const std::vector<const InstanceGeometry*>& insts, RankKey rank_key,
                      RankMode mode, const Pose* pose, double min_margin, int& winner) {
  std::vector<double> values(insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i) {
    values[i] = rank_key == RankKey::ego_distance ? ego_distance(*pose, *insts[i])
                                                  : insts[i]->height_extent();
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const bool better =
        mode == RankMode::min ? values[i] < values[best] : values[i] > values[best];
    if (better) best = i;
  }
  double runner_up = mode == RankMode::min ? 1e300 : -1e300;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i == best) continue;
    if (mode == RankMode::min) {
      runner_up = std::min(runner_up, values[i]);
    } else {
      runner_up = std::max(runner_up, values[i]);
    }
  }
  if (std::abs(values[best] - runner_up) <= 1e-6) return false;
  if (relative_margin(values[best], runner_up) < min_margin) return false;
  winner = insts[best]->instance_id;
  return true;
}

class SceneForge {
 public:
  SceneForge(const Scene& scene, const TemplateRegistry& registry, const ForgePolicy& policy)
      : scene_(scene), registry_(registry), policy_(policy) {
    for (const InstanceGeometry& inst : scene.instances) {
      if (scene.refs.count(inst.instance_id)) referable_.push_back(&inst);
    }
  }

  std::vector<QaItem> run() {
    std::vector<QaItem> items;
    if (scene_.trajectory.poses.empty()) return items;
    anchor_ = &scene_.trajectory.poses.back();
    for (const Template& tmpl : registry_.templates) {
      std::vector<Candidate> candidates = enumerate(tmpl);
      emit(tmpl, std::move(candidates), items);
    }
    return items;
  }

 private:
  std::vector<Candidate> enumerate(const Template& tmpl) {
    std::vector<Candidate> out;
    const std::string& id = tmpl.id;
    if (id == "camera_distance") {
      SpatialFact fact;
      fact.kind = FactKind::trajectory_length;
      fact.value = trajectory_length(scene_.trajectory);
      fact.unit = "m";
      if (fact.value >= policy_.min_scale_answer_m) out.push_back({fact});
    } else if (id == "ego_distance") {
      for (const InstanceGeometry* inst : referable_) {
        SpatialFact fact;
        fact.kind = FactKind::ego_distance;
        fact.operands = {inst->instance_id};
        fact.anchor_frame = anchor_->frame_index;
        fact.value = ego_distance(*anchor_, *inst);
        fact.unit = "m";
        if (fact.value >= policy_.min_scale_answer_m) out.push_back({fact});
      }
    } else if (id == "future_direction_camera_rotate") {
      for (const InstanceGeometry* inst : referable_) {
        SpatialFact fact;
        fact.kind = FactKind::ego_direction_cw;
        fact.operands = {inst->instance_id};
        fact.anchor_frame = anchor_->frame_index;
        try {
          fact.value = ego_direction_cw(*anchor_, *inst);
        } catch (const Error&) {
          continue;  // vertically aligned: no bearing
        }
        fact.unit = "deg";
        out.push_back({fact});
      }
    } else if (id == "ego_relative_position") {
      for (const InstanceGeometry* inst : referable_) {
        SpatialFact fact;
        fact.kind = FactKind::ego_relative_position;
        fact.operands = {inst->instance_id};
        fact.anchor_frame = anchor_->frame_index;
        try {
          fact.label = ego_relative_position(*anchor_, *inst, policy_.qualitative);
        } catch (const Error&) {
          continue;
        }
        out.push_back({fact});
      }
    } else if (id == "future_direction_camera") {
      // The template text fixes the movement: a 90 degree left turn.
      for (const InstanceGeometry* inst : referable_) {
        SpatialFact fact;
        fact.kind = FactKind::post_turn_relation;
        fact.operands = {inst->instance_id};
        fact.anchor_frame = anchor_->frame_index;
        try {
          fact.label = post_turn_relation(*anchor_, *inst, -90.0, policy_.qualitative);
        } catch (const Error&) {
          continue;
        }
        out.push_back({fact});
      }
    } else if (id == "closer_to_camera") {
      for_pairs([&](const InstanceGeometry* a, const InstanceGeometry* b) {
        int winner = 0;
        if (!rank_with_margin({a, b}, RankKey::ego_distance, RankMode::min, anchor_,
                              policy_.comparative_margin, winner)) {
          return;
        }
        SpatialFact fact;
        fact.kind = FactKind::rank_extreme;
        fact.operands = {a->instance_id, b->instance_id};
        fact.anchor_frame = anchor_->frame_index;
        fact.label = std::to_string(winner);
        out.push_back({fact});
      });
    } else if (id == "closest_to_camera" || id == "distance_3") {
      for_triples([&](const InstanceGeometry* a, const InstanceGeometry* b,
                      const InstanceGeometry* c) {
        int winner = 0;
        if (!rank_with_margin({a, b, c}, RankKey::ego_distance, RankMode::min, anchor_,
                              policy_.comparative_margin, winner)) {
          return;
        }
        SpatialFact fact;
        fact.kind = FactKind::rank_extreme;
        fact.operands = {a->instance_id, b->instance_id, c->instance_id};
        fact.anchor_frame = anchor_->frame_index;
        fact.label = std::to_string(winner);
        out.push_back({fact});
      });
    } else if (id == "tall_choice_3") {
      for_triples([&](const InstanceGeometry* a, const InstanceGeometry* b,
                      const InstanceGeometry* c) {
        if (a->points.size() < 20 || b->points.size() < 20 || c->points.size() < 20) return;
        int winner = 0;
        if (!rank_with_margin({a, b, c}, RankKey::height_extent, RankMode::max, nullptr,
                              policy_.comparative_margin, winner)) {
          return;
        }
        SpatialFact fact;
        fact.kind = FactKind::rank_extreme;
        fact.operands = {a->instance_id, b->instance_id, c->instance_id};
        fact.label = std::to_string(winner);
        out.push_back({fact});
      });
    } else if (id == "height_from_ground") {
      for_pairs([&](const InstanceGeometry* a, const InstanceGeometry* b) {
        double diff;
        try {
          diff = elevation_diff(*a, *b);
        } catch (const Error&) {
          return;
        }
        if (std::abs(diff) < policy_.min_scale_answer_m) return;
        SpatialFact fact;
        fact.kind = FactKind::elevation_diff;
        fact.operands = {a->instance_id, b->instance_id};
        fact.value = std::abs(diff);
        fact.unit = "m";
        out.push_back({fact});
      });
    } else if (id == "center_distance") {
      for_pairs([&](const InstanceGeometry* a, const InstanceGeometry* b) {
        const double dist = center_distance(*a, *b);
        if (dist < policy_.min_scale_answer_m) return;
        SpatialFact fact;
        fact.kind = FactKind::center_distance;
        fact.operands = {a->instance_id, b->instance_id};
        fact.value = dist;
        fact.unit = "m";
        out.push_back({fact});
      });
    } else if (id == "above_predicate") {
      for (const InstanceGeometry* a : referable_) {
        for (const InstanceGeometry* b : referable_) {
          if (a->instance_id == b->instance_id) continue;
          SpatialFact fact;
          fact.kind = FactKind::vertical_relation;
          fact.operands = {a->instance_id, b->instance_id};
          fact.label = vertical_relation_name(vertical_relation(*a, *b, policy_.qualitative));
          out.push_back({fact});
        }
      }
    } else if (id == "object_height" || id == "object_size") {
      for (const InstanceGeometry* inst : referable_) {
        if (inst->points.size() < 20) continue;
        const SizeDims dims = size_dims(*inst);
        SpatialFact fact;
        fact.kind = id == "object_height" ? FactKind::height_extent : FactKind::size_dims;
        fact.operands = {inst->instance_id};
        fact.value = id == "object_height" ? dims.height : dims.width;
        fact.unit = "m";
        if (fact.value >= policy_.min_scale_answer_m) out.push_back({fact});
      }
    } else {
      raise(Errc::invalid_argument, "no fact enumerator for template '" + id + "'");
    }
    return out;
  }

  void emit(const Template& tmpl, std::vector<Candidate> candidates,
            std::vector<QaItem>& items) {
    if (candidates.empty()) return;
    const std::uint64_t stream_seed = Rng::derive(
        Rng::derive(policy_.seed, Rng::hash_str(scene_.video_id)), Rng::hash_str(tmpl.id));
    Rng rng(stream_seed);
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t take =
        std::min<std::size_t>(order.size(), static_cast<std::size_t>(policy_.per_ability_quota));
    for (std::size_t k = 0; k < take; ++k) {
      const Candidate& cand = candidates[order[k]];
      const int phrasing = static_cast<int>(rng.below(tmpl.phrasings.size()));
      QaItem item = instantiate(tmpl, phrasing, {cand.fact}, scene_.refs, stream_seed);
      item.video_id = scene_.video_id;
      item.id = scene_.video_id + ":" + tmpl.id + ":" + std::to_string(k);
      items.push_back(std::move(item));
    }
  }

  template <typename Fn>
  void for_pairs(Fn fn) {
    for (std::size_t i = 0; i < referable_.size(); ++i) {
      for (std::size_t j = i + 1; j < referable_.size(); ++j) {
        fn(referable_[i], referable_[j]);
      }
    }
  }

  template <typename Fn>
  void for_triples(Fn fn) {
    for (std::size_t i = 0; i < referable_.size(); ++i) {
      for (std::size_t j = i + 1; j < referable_.size(); ++j) {
        for (std::size_t k = j + 1; k < referable_.size(); ++k) {
          fn(referable_[i], referable_[j], referable_[k]);
        }
      }
    }
  }

  const Scene& scene_;
  const TemplateRegistry& registry_;
  const ForgePolicy& policy_;
  std::vector<const InstanceGeometry*> referable_;
  const Pose* anchor_ = nullptr;
};

}  // namespace

std::vector<QaItem> forge_scene(const Scene& scene, const TemplateRegistry& registry,
                                const ForgePolicy& policy) {
  return SceneForge(scene, registry, policy).run();
}

std::vector<QaItem> counting_downsample(const std::vector<QaItem>& items, Rng& rng) {
  // Collect indices per reduced answer value, preserving encounter order.
  std::map<long long, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const QaItem& item = items[i];
    if (item.ability != "counting") continue;
    char* end = nullptr;
    const long long value = std::strtoll(item.answer.c_str(), &end, 10);
    if (end == item.answer.c_str() || (end && *end != '\0')) continue;
    if (value == 1 || value == 2) groups[value].push_back(i);
  }

  std::vector<bool> drop(items.size(), false);
  for (auto& [value, indices] : groups) {
    rng.shuffle(indices);
    // Even positions after the shuffle stay; exactly half (round up) kept.
    for (std::size_t k = 1; k < indices.size(); k += 2) drop[indices[k]] = true;
  }

  std::vector<QaItem> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!drop[i]) out.push_back(items[i]);
  }
  return out;
}

}  // namespace egoqa
