#include "egoqa/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

namespace egoqa {

double mra(double pred, double gt) {
  require(gt > 0.0, Errc::non_positive_ground_truth,
          "relative error is undefined for gt <= 0");
  const double rel = std::abs(pred - gt) / gt;
  int passed = 0;
  for (int i = 0; i < 10; ++i) {
    const double theta = static_cast<double>(50 + 5 * i) / 100.0;
    if (rel < 1.0 - theta) ++passed;
  }
  return static_cast<double>(passed) / 10.0;
}

double roa(double pred_deg, double gt_deg) {
  double diff = std::fmod(std::abs(pred_deg - gt_deg), 360.0);
  diff = std::min(diff, 360.0 - diff);
  return 1.0 - std::min(diff / 90.0, 1.0);
}

namespace {

void check_frame_sizes(const std::vector<FramePair>& frames) {
  require(!frames.empty(), Errc::invalid_argument, "no frames to score");
  int h = -1, w = -1;
  auto check = [&](const std::optional<Rle>& mask) {
    if (!mask) return;
    if (h < 0) {
      h = mask->height;
      w = mask->width;
    } else {
      require(mask->height == h && mask->width == w, Errc::size_mismatch,
              "frame mask sizes differ");
    }
  };
  for (const FramePair& f : frames) {
    check(f.pred);
    check(f.gt);
  }
}

}  // namespace

double global_j(const std::vector<FramePair>& frames, Exec exec) {
  check_frame_sizes(frames);
  const std::int64_t n = static_cast<std::int64_t>(frames.size());
  std::vector<std::int64_t> inter(n, 0), uni(n, 0);

  auto accumulate = [&](std::int64_t i) {
    const FramePair& f = frames[static_cast<std::size_t>(i)];
    const bool has_pred = f.pred && !f.pred->empty_mask();
    const bool has_gt = f.gt && !f.gt->empty_mask();
    if (has_pred && has_gt) {
      inter[i] = rle::intersection_area(*f.pred, *f.gt);
      uni[i] = rle::union_area(*f.pred, *f.gt);
    } else if (has_pred) {
      uni[i] = rle::area(*f.pred);
    } else if (has_gt) {
      uni[i] = rle::area(*f.gt);
    }
  };

  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) accumulate(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) accumulate(i);
  }

  std::int64_t inter_sum = 0, union_sum = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    inter_sum += inter[i];
    union_sum += uni[i];
  }
  if (union_sum == 0) return 1.0;  // nothing to predict, nothing predicted
  return static_cast<double>(inter_sum) / static_cast<double>(union_sum);
}

namespace detail {

namespace {

// Foreground pixels with a 4-neighbor outside the mask (image border counts
// as background).
BinaryMask boundary_map(const BinaryMask& mask) {
  BinaryMask out(mask.height, mask.width);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      const bool edge = r == 0 || r == mask.height - 1 || c == 0 || c == mask.width - 1;
      if (edge || !mask.at(r - 1, c) || !mask.at(r + 1, c) || !mask.at(r, c - 1) ||
          !mask.at(r, c + 1)) {
        out.at(r, c) = 1;
      }
    }
  }
  return out;
}

// Fraction of boundary pixels in `from` with a boundary pixel of `to`
// within Euclidean distance `radius`.
double matched_fraction(const BinaryMask& from, const BinaryMask& to, double radius) {
  const int window = static_cast<int>(radius);
  const double radius_sq = radius * radius;
  std::int64_t total = 0, matched = 0;
  for (int r = 0; r < from.height; ++r) {
    for (int c = 0; c < from.width; ++c) {
      if (!from.at(r, c)) continue;
      ++total;
      bool hit = false;
      for (int dr = -window; dr <= window && !hit; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= to.height) continue;
        for (int dc = -window; dc <= window; ++dc) {
          const int cc = c + dc;
          if (cc < 0 || cc >= to.width) continue;
          if (to.at(rr, cc) && dr * dr + dc * dc <= radius_sq) {
            hit = true;
            break;
          }
        }
      }
      if (hit) ++matched;
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace

double frame_boundary_f(const Rle& pred, const Rle& gt) {
  require(pred.same_size(gt), Errc::size_mismatch, "mask sizes differ");
  const bool pred_empty = pred.empty_mask();
  const bool gt_empty = gt.empty_mask();
  if (pred_empty && gt_empty) return 1.0;
  if (pred_empty || gt_empty) return 0.0;

  const double radius =
      0.008 * std::hypot(static_cast<double>(gt.height), static_cast<double>(gt.width));
  const BinaryMask pred_boundary = boundary_map(rle::decode(pred));
  const BinaryMask gt_boundary = boundary_map(rle::decode(gt));
  const double precision = matched_fraction(pred_boundary, gt_boundary, radius);
  const double recall = matched_fraction(gt_boundary, pred_boundary, radius);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace detail

double boundary_f(const std::vector<FramePair>& frames, Exec exec) {
  check_frame_sizes(frames);
  std::vector<std::int64_t> scored_index;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].gt && !frames[i].gt->empty_mask()) {
      scored_index.push_back(static_cast<std::int64_t>(i));
    }
  }
  require(!scored_index.empty(), Errc::no_foreground_frames,
          "every ground-truth mask is empty");

  const std::int64_t n = static_cast<std::int64_t>(scored_index.size());
  std::vector<double> scores(n, 0.0);
  auto eval = [&](std::int64_t k) {
    const FramePair& f = frames[static_cast<std::size_t>(scored_index[k])];
    if (!f.pred || f.pred->empty_mask()) {
      scores[k] = 0.0;
    } else {
      scores[k] = detail::frame_boundary_f(*f.pred, *f.gt);
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t k = 0; k < n; ++k) eval(k);
  } else {
    for (std::int64_t k = 0; k < n; ++k) eval(k);
  }

  double sum = 0.0;
  for (double s : scores) sum += s;  // fixed order: thread count cannot matter
  return sum / static_cast<double>(n);
}

double jf_mean(const std::vector<FramePair>& frames, Exec exec) {
  return 0.5 * (global_j(frames, exec) + boundary_f(frames, exec));
}

FrameSample sample_frames(int video_frames, double fps_source,
                          const std::set<int>& target_frames) {
  require(video_frames >= 0, Errc::invalid_argument, "video_frames must be >= 0");
  require(fps_source > 0.0, Errc::invalid_argument, "fps must be positive");
  for (int t : target_frames) {
    require(t >= 0 && t < video_frames, Errc::invalid_argument,
            "target frame " + std::to_string(t) + " outside the video");
  }
  constexpr int kCap = 30;

  FrameSample out;
  std::vector<int> targets(target_frames.begin(), target_frames.end());
  if (static_cast<int>(targets.size()) > kCap) {
    // Uniform-index thinning keeps the temporal spread.
    std::vector<int> kept;
    kept.reserve(kCap);
    for (int i = 0; i < kCap; ++i) {
      kept.push_back(targets[static_cast<std::size_t>(i) * targets.size() / kCap]);
    }
    targets = std::move(kept);
    out.targets_truncated = true;
  }

  // 1 fps candidate grid.
  std::vector<int> candidates;
  for (int k = 0;; ++k) {
    const int frame = static_cast<int>(std::llround(k * fps_source));
    if (frame >= video_frames) break;
    if (candidates.empty() || frame != candidates.back()) candidates.push_back(frame);
  }

  std::set<int> chosen(targets.begin(), targets.end());
  std::vector<int> fill;
  for (int c : candidates) {
    if (!chosen.count(c)) fill.push_back(c);
  }
  const int room = kCap - static_cast<int>(chosen.size());
  if (static_cast<int>(fill.size()) <= room) {
    chosen.insert(fill.begin(), fill.end());
  } else if (room > 0) {
    for (int i = 0; i < room; ++i) {
      chosen.insert(fill[static_cast<std::size_t>(i) * fill.size() / room]);
    }
  }
  out.frames.assign(chosen.begin(), chosen.end());
  return out;
}

double parse_numeric_answer(const std::string& answer) {
  char* end = nullptr;
  const double value = std::strtod(answer.c_str(), &end);
  require(end != answer.c_str(), Errc::parse_error,
          "answer '" + answer + "' has no numeric prefix");
  return value;
}

namespace {

// First numeric token of a judge reply, if any.
std::optional<double> parse_judge_number(const std::string& text) {
  const char* p = text.c_str();
  const char* end = p + text.size();
  while (p < end) {
    if (std::isdigit(static_cast<unsigned char>(*p)) ||
        (*p == '.' && p + 1 < end && std::isdigit(static_cast<unsigned char>(p[1])))) {
      char* after = nullptr;
      const double v = std::strtod(p, &after);
      if (after != p) return v;
    }
    ++p;
  }
  return std::nullopt;
}

double snap_to_grid(double value, double step) {
  const double snapped = std::round(value / step) * step;
  return std::clamp(snapped, 0.0, 1.0);
}

bool on_grid(double value, double step) {
  if (value < 0.0 || value > 1.0) return false;
  const double q = value / step;
  return std::abs(q - std::round(q)) < 1e-9;
}

double judge_score(Judge& judge, const QaItem& item, const std::string& pred_text,
                   bool binary) {
  const double step = binary ? 1.0 : 0.2;
  std::optional<double> value =
      parse_judge_number(judge.ask(item.question, item.answer, pred_text, binary));
  if (!value || !on_grid(*value, step)) {
    // One re-ask, then snap whatever comes back onto the grid.
    value = parse_judge_number(judge.ask(item.question, item.answer, pred_text, binary));
    require(value.has_value(), Errc::malformed_response,
            "judge returned no numeric score for item " + item.id);
    value = snap_to_grid(*value, step);
  }
  return *value;
}

}  // namespace

double score_item(const QaItem& item, const Prediction& pred, Judge* judge,
                  const std::vector<FramePair>* seg) {
  require(pred.kind == item.answer_kind, Errc::kind_mismatch,
          "prediction kind does not match answer kind for item " + item.id);
  switch (item.answer_kind) {
    case AnswerKind::numeric_scale:
      return mra(pred.value, parse_numeric_answer(item.answer));
    case AnswerKind::numeric_angle:
      return roa(pred.value, parse_numeric_answer(item.answer));
    case AnswerKind::segmentation:
      require(seg != nullptr, Errc::invalid_argument,
              "segmentation item needs resolved frame masks");
      return jf_mean(*seg);
    case AnswerKind::closed_text:
    case AnswerKind::open_text: {
      require(judge != nullptr, Errc::judge_unavailable,
              "no judge configured for text item " + item.id);
      return judge_score(*judge, item, pred.text, item.answer_kind == AnswerKind::closed_text);
    }
  }
  raise(Errc::kind_mismatch, "unhandled answer kind");
}

std::string category_of_ability(const std::string& ability) {
  static const std::set<std::string> kObject = {
      "caption",          "comprehension",       "counting",
      "object_existence", "direct_referring",    "situational_referring",
      "surface_detail",   "object_state",        "object_shape",
  };
  static const std::set<std::string> kSpatial = {
      "camera_distance",      "closer_to_camera",
      "closest_to_camera",    "distance_3",
      "future_direction_camera",
      "future_direction_camera_rotate",
      "height_from_ground",   "center_distance",
      "tall_choice_3",        "above_predicate",
      "ego_distance",         "ego_relative_position",
      "object_height",        "object_size",
  };
  if (kObject.count(ability)) return "object_cognition";
  if (kSpatial.count(ability)) return "spatial_cognition";
  return "uncategorized";
}

ScoreReport aggregate(const std::vector<ScoredItem>& scored,
                      const std::vector<std::string>& unscored_ids) {
  ScoreReport report;
  report.scored = static_cast<int>(scored.size());
  report.unscored = static_cast<int>(unscored_ids.size());
  report.unscored_ids = unscored_ids;

  std::map<std::string, std::pair<double, int>> ability_sums;
  double item_sum = 0.0;
  for (const ScoredItem& s : scored) {
    require(s.score >= 0.0 && s.score <= 1.0, Errc::invalid_argument,
            "score outside [0, 1] for item " + s.qa_id);
    auto& [sum, count] = ability_sums[s.ability];
    sum += s.score;
    ++count;
    item_sum += s.score;
  }
  for (const auto& [ability, sums] : ability_sums) {
    report.per_ability[ability] = AbilityScore{sums.second, sums.first / sums.second};
  }
  report.overall_item_mean = scored.empty() ? 0.0 : item_sum / static_cast<double>(scored.size());

  std::map<std::string, std::pair<double, int>> category_sums;
  for (const auto& [ability, score] : report.per_ability) {
    const std::string category = category_of_ability(ability);
    if (category == "uncategorized") {
      report.flags.push_back("ability '" + ability + "' has no category; excluded from category means");
      continue;
    }
    auto& [sum, count] = category_sums[category];
    sum += score.mean;
    ++count;
  }
  double cat_sum = 0.0;
  int cat_count = 0;
  for (const auto& [category, sums] : category_sums) {
    report.category_mean[category] = sums.first / sums.second;
    cat_sum += report.category_mean[category];
    ++cat_count;
  }
  for (const char* category : {"object_cognition", "spatial_cognition"}) {
    if (!category_sums.count(category)) {
      report.flags.push_back(std::string("category '") + category + "' is empty");
    }
  }
  report.overall_mean = cat_count == 0 ? 0.0 : cat_sum / static_cast<double>(cat_count);
  return report;
}

}  // namespace egoqa
