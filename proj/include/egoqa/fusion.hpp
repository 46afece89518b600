#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "egoqa/rle.hpp"

namespace egoqa {

enum class TrackOrigin { detected, reverse_extended };

// Per-frame masks keyed by instance id.
struct MaskFrame {
  int frame_index = 0;
  std::map<int, Rle> masks;
};

// Full lifecycle of one instance: ordered per-frame masks plus bookkeeping
// of which frames came from the backward pass.
struct Track {
  int instance_id = 0;
  std::string category;
  std::map<int, Rle> frames;          // frame index -> mask
  std::set<int> reverse_extended;     // subset of frame keys
  TrackOrigin origin = TrackOrigin::detected;

  int first_frame() const { return frames.begin()->first; }
  int last_frame() const { return frames.rbegin()->first; }
  std::int64_t cumulative_area() const;
};

// Fresh detections at one key frame.
struct DetectionBatch {
  int key_frame_index = 0;
  std::vector<std::pair<std::string, Rle>> proposals;  // (category, mask)
};

// Frame-by-frame mask propagation, pluggable so tests can script it and
// production can plug a neural tracker sidecar. `to` is always `from` +/- 1.
// Return nullopt when the instance is lost; throw Error(tracker_failure) on a
// backend failure.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual std::optional<Rle> propagate(const Rle& seed, int from_frame, int to_frame) = 0;
};

struct FusionParams {
  double iou_threshold = 0.5;          // strict ">" merge rule
  double reverse_window_seconds = 4.0;
  double chunk_seconds = 40.0;
};

// Result of reconciling one detection batch against the live tracks.
struct MergeAssignment {
  // Per proposal: the instance id it ends up with.
  std::vector<int> proposal_ids;
  // Per proposal: true when the id is freshly allocated.
  std::vector<bool> is_new;
  int next_id_after = 0;
};

// Greedy one-to-one matching of proposals against same-category track masks
// at the key frame, in descending IoU order. IoU strictly above `threshold`
// adopts the track's id; everything else gets a fresh id starting at
// `next_id`. A track absorbs at most one proposal and never one from a
// different category.
MergeAssignment merge_at_keyframe(const std::vector<Track>& active_tracks,
                                  const DetectionBatch& batch, double threshold,
                                  int next_id);

// Backward extension of a newly detected track over up to
// window_seconds * fps frames (clamped at frame 0), stopping early when the
// tracker reports loss. Appended masks are flagged reverse_extended. The
// input track is untouched on tracker failure.
Track reverse_extend(const Track& track, Tracker& tracker, double window_seconds,
                     double fps);

// Runs the whole per-video fusion loop: forward tracking between key frames,
// id reconciliation at each key frame, and backward extension for every new
// id. Returns all finished tracks sorted by instance id.
std::vector<Track> assemble_lifecycles(const std::vector<DetectionBatch>& batches,
                                       Tracker& tracker, double fps, int total_frames,
                                       const FusionParams& params = {});

// Half-open [start, end) chunks of chunk_seconds * fps frames; the last
// chunk may be shorter.
std::vector<std::pair<int, int>> segment_video(int total_frames, double fps,
                                               double chunk_seconds = 40.0);

// Key-frame grid at one-second intervals: 0, round(fps), round(2 fps), ...
std::vector<int> key_frame_indices(int total_frames, double fps);

// Keeps at most `cap` tracks per category, ranked by cumulative mask area
// (ties -> lower instance id). Output preserves input order.
std::vector<Track> cap_per_category(const std::vector<Track>& tracks, int cap = 2);

}  // namespace egoqa
