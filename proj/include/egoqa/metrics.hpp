#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "egoqa/forge.hpp"
#include "egoqa/parallel.hpp"
#include "egoqa/rle.hpp"

namespace egoqa {

// Mean Relative Accuracy over the ten confidence thresholds
// {0.50, 0.55, ..., 0.95}: the fraction of thresholds theta for which
// |pred - gt| / gt < 1 - theta (strict). Ground truth must be positive.
double mra(double pred, double gt);

// Rotational accuracy: 1 - min(wrapped_angle_error / 90, 1). Inputs are
// reduced mod 360 first, so adding full turns never changes the score.
double roa(double pred_deg, double gt_deg);

// One frame of a segmentation comparison; nullopt means "no mask".
struct FramePair {
  std::optional<Rle> pred;
  std::optional<Rle> gt;
};

// Global IoU: sum of per-frame intersections over sum of per-frame unions.
// A video with no foreground anywhere (neither predicted nor ground truth)
// scores 1. Spurious masks on gt-empty frames grow the denominator only.
double global_j(const std::vector<FramePair>& frames, Exec exec = Exec::parallel);

// Contour F-measure averaged over frames with non-empty ground truth;
// boundary pixels match within a radius of 0.8% of the image diagonal.
// Throws Errc::no_foreground_frames when every gt mask is empty.
double boundary_f(const std::vector<FramePair>& frames, Exec exec = Exec::parallel);

// (global_j + boundary_f) / 2.
double jf_mean(const std::vector<FramePair>& frames, Exec exec = Exec::parallel);

namespace detail {
// Per-frame contour F-measure; exposed for tests and the benchmark.
double frame_boundary_f(const Rle& pred, const Rle& gt);
}  // namespace detail

struct FrameSample {
  std::vector<int> frames;  // ascending
  bool targets_truncated = false;
};

// Evaluation frame policy: a 1 fps candidate grid capped at 30 frames.
// Target frames are always kept (uniformly thinned with a flag when more
// than 30); remaining slots fill by uniform-index selection over the
// non-target candidates.
FrameSample sample_frames(int video_frames, double fps_source,
                          const std::set<int>& target_frames);

// Model output for one item. `kind` must match the item's answer kind.
struct Prediction {
  std::string qa_id;
  AnswerKind kind = AnswerKind::closed_text;
  double value = 0.0;       // numeric kinds
  std::string text;         // text kinds
  std::string masks_ref;    // segmentation kind
};

// Text grader backed by the LLM gateway (or a mock in tests).
// Implementations throw Error(judge_unavailable) when the backend is down.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string ask(const std::string& question, const std::string& ground_truth,
                          const std::string& prediction, bool binary) = 0;
};

// Parses the canonical numeric answer strings ("1.24 m", "90 deg").
double parse_numeric_answer(const std::string& answer);

// Question-type-adaptive dispatch: numeric-scale -> mra, numeric-angle ->
// roa, segmentation -> jf_mean, closed-text -> binary judge, open-text ->
// judge on the 0.2 grid (one re-ask, then snap). `seg` supplies the aligned
// per-frame masks for segmentation items.
double score_item(const QaItem& item, const Prediction& pred, Judge* judge,
                  const std::vector<FramePair>* seg = nullptr);

struct ScoredItem {
  std::string qa_id;
  std::string ability;
  double score = 0.0;
};

struct AbilityScore {
  int count = 0;
  double mean = 0.0;
};

struct ScoreReport {
  std::map<std::string, AbilityScore> per_ability;
  std::map<std::string, double> category_mean;  // category -> mean of ability means
  double overall_mean = 0.0;                    // mean of the category means
  double overall_item_mean = 0.0;               // every scored item weighted equally
  int scored = 0;
  int unscored = 0;
  std::vector<std::string> unscored_ids;
  std::vector<std::string> flags;
};

// Default ability -> category routing. Unknown abilities land in
// "uncategorized" (flagged by aggregate, excluded from the category means).
std::string category_of_ability(const std::string& ability);

ScoreReport aggregate(const std::vector<ScoredItem>& scored,
                      const std::vector<std::string>& unscored_ids);

}  // namespace egoqa
