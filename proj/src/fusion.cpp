#include "egoqa/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace egoqa {

std::int64_t Track::cumulative_area() const {
  std::int64_t total = 0;
  for (const auto& [frame, mask] : frames) total += rle::area(mask);
  return total;
}

MergeAssignment merge_at_keyframe(const std::vector<Track>& active_tracks,
                                  const DetectionBatch& batch, double threshold,
                                  int next_id) {
  require(threshold > 0.0 && threshold <= 1.0, Errc::invalid_argument,
          "merge threshold must be in (0, 1]");

  struct Candidate {
    double iou;
    std::size_t proposal;
    std::size_t track;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < active_tracks.size(); ++t) {
    const Track& track = active_tracks[t];
    auto it = track.frames.find(batch.key_frame_index);
    if (it == track.frames.end()) continue;  // no mask at key frame: non-candidate
    for (std::size_t p = 0; p < batch.proposals.size(); ++p) {
      if (batch.proposals[p].first != track.category) continue;
      const double iou = mask_iou(batch.proposals[p].second, it->second);
      if (iou > threshold) candidates.push_back({iou, p, t});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.iou != b.iou) return a.iou > b.iou;
                     if (a.proposal != b.proposal) return a.proposal < b.proposal;
                     return a.track < b.track;
                   });

  MergeAssignment out;
  out.proposal_ids.assign(batch.proposals.size(), -1);
  out.is_new.assign(batch.proposals.size(), false);
  std::vector<bool> track_taken(active_tracks.size(), false);
  for (const Candidate& c : candidates) {
    if (out.proposal_ids[c.proposal] != -1 || track_taken[c.track]) continue;
    out.proposal_ids[c.proposal] = active_tracks[c.track].instance_id;
    track_taken[c.track] = true;
  }
  for (std::size_t p = 0; p < batch.proposals.size(); ++p) {
    if (out.proposal_ids[p] == -1) {
      out.proposal_ids[p] = next_id++;
      out.is_new[p] = true;
    }
  }
  out.next_id_after = next_id;
  return out;
}

Track reverse_extend(const Track& track, Tracker& tracker, double window_seconds,
                     double fps) {
  require(track.origin == TrackOrigin::detected, Errc::invalid_argument,
          "reverse extension applies to detected tracks");
  require(window_seconds > 0.0 && fps > 0.0, Errc::invalid_argument,
          "window and fps must be positive");
  require(!track.frames.empty(), Errc::invalid_argument, "track has no frames");

  const int first = track.first_frame();
  const int window_frames = static_cast<int>(std::llround(window_seconds * fps));
  const int span = std::min(window_frames, first);

  Track out = track;
  Rle seed = track.frames.at(first);
  int frame = first;
  for (int step = 0; step < span; ++step) {
    std::optional<Rle> mask = tracker.propagate(seed, frame, frame - 1);
    if (!mask) break;  // tracker lost the instance
    --frame;
    out.frames.emplace(frame, *mask);
    out.reverse_extended.insert(frame);
    seed = std::move(*mask);
  }
  return out;
}

namespace {

// Propagates a track forward one frame at a time up to and including
// `target_frame`. Returns false when the tracker loses the instance.
bool track_forward(Track& track, Tracker& tracker, int target_frame) {
  int frame = track.last_frame();
  Rle seed = track.frames.at(frame);
  while (frame < target_frame) {
    std::optional<Rle> mask = tracker.propagate(seed, frame, frame + 1);
    if (!mask) return false;
    ++frame;
    track.frames.emplace(frame, *mask);
    seed = std::move(*mask);
  }
  return true;
}

}  // namespace

std::vector<Track> assemble_lifecycles(const std::vector<DetectionBatch>& batches,
                                       Tracker& tracker, double fps, int total_frames,
                                       const FusionParams& params) {
  require(fps > 0.0, Errc::invalid_argument, "fps must be positive");
  for (std::size_t i = 1; i < batches.size(); ++i) {
    require(batches[i - 1].key_frame_index < batches[i].key_frame_index,
            Errc::invalid_argument, "detection batches must be sorted by key frame");
  }

  std::vector<Track> active;
  std::vector<Track> finished;
  int next_id = 0;

  for (const DetectionBatch& batch : batches) {
    // Forward-track the live set through this key frame; tracks that get
    // lost on the way retire.
    std::vector<Track> alive;
    for (Track& track : active) {
      if (track_forward(track, tracker, batch.key_frame_index)) {
        alive.push_back(std::move(track));
      } else {
        finished.push_back(std::move(track));
      }
    }
    active = std::move(alive);

    const MergeAssignment merged =
        merge_at_keyframe(active, batch, params.iou_threshold, next_id);
    next_id = merged.next_id_after;

    for (std::size_t p = 0; p < batch.proposals.size(); ++p) {
      const auto& [category, mask] = batch.proposals[p];
      if (merged.is_new[p]) {
        Track track;
        track.instance_id = merged.proposal_ids[p];
        track.category = category;
        track.frames.emplace(batch.key_frame_index, mask);
        track = reverse_extend(track, tracker, params.reverse_window_seconds, fps);
        active.push_back(std::move(track));
      } else {
        // Fresh segmentation re-anchors the matched track at the key frame.
        for (Track& track : active) {
          if (track.instance_id == merged.proposal_ids[p]) {
            track.frames[batch.key_frame_index] = mask;
            break;
          }
        }
      }
    }
  }

  // Carry survivors to the end of the video.
  for (Track& track : active) {
    track_forward(track, tracker, total_frames - 1);
    finished.push_back(std::move(track));
  }

  std::sort(finished.begin(), finished.end(),
            [](const Track& a, const Track& b) { return a.instance_id < b.instance_id; });
  return finished;
}

std::vector<std::pair<int, int>> segment_video(int total_frames, double fps,
                                               double chunk_seconds) {
  require(total_frames >= 0, Errc::invalid_argument, "total_frames must be >= 0");
  require(fps > 0.0 && chunk_seconds > 0.0, Errc::invalid_argument,
          "fps and chunk_seconds must be positive");
  const int chunk = std::max<int>(1, static_cast<int>(std::llround(chunk_seconds * fps)));
  std::vector<std::pair<int, int>> out;
  for (int start = 0; start < total_frames; start += chunk) {
    out.emplace_back(start, std::min(start + chunk, total_frames));
  }
  return out;
}

std::vector<int> key_frame_indices(int total_frames, double fps) {
  require(fps > 0.0, Errc::invalid_argument, "fps must be positive");
  std::vector<int> out;
  for (int k = 0;; ++k) {
    const int frame = static_cast<int>(std::llround(k * fps));
    if (frame >= total_frames) break;
    if (out.empty() || frame != out.back()) out.push_back(frame);
  }
  return out;
}

std::vector<Track> cap_per_category(const std::vector<Track>& tracks, int cap) {
  require(cap >= 1, Errc::invalid_argument, "cap must be >= 1");

  struct Ranked {
    std::int64_t area;
    int instance_id;
    std::size_t index;
  };
  std::map<std::string, std::vector<Ranked>> by_category;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    by_category[tracks[i].category].push_back(
        {tracks[i].cumulative_area(), tracks[i].instance_id, i});
  }

  std::vector<bool> keep(tracks.size(), false);
  for (auto& [category, ranked] : by_category) {
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.area != b.area) return a.area > b.area;
      return a.instance_id < b.instance_id;
    });
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(cap); ++i) {
      keep[ranked[i].index] = true;
    }
  }

  std::vector<Track> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (keep[i]) out.push_back(tracks[i]);
  }
  return out;
}

}  // namespace egoqa
