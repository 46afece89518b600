#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "egoqa/facts.hpp"
#include "egoqa/forge.hpp"
#include "egoqa/fusion.hpp"
#include "egoqa/geometry.hpp"
#include "egoqa/metrics.hpp"

namespace egoqa::io {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// --- PLY point clouds ------------------------------------------------------
// Vertex properties: x/y/z float32, optional red/green/blue uchar, optional
// instance_id int32. Binary files are little-endian regardless of host.
PointCloud read_ply(const std::string& path);
void write_ply(const std::string& path, const PointCloud& cloud, bool binary);

// --- Camera trajectories ---------------------------------------------------
// CSV header: frame,timestamp_s,tx,ty,tz,qx,qy,qz,qw. Load validates unit
// quaternions and strictly increasing timestamps.
CameraTrajectory read_trajectory_csv(const std::string& path);
void write_trajectory_csv(const std::string& path, const CameraTrajectory& traj);

// Intrinsics sidecar, CSV header fx,fy,cx,cy,width,height.
Intrinsics read_intrinsics(const std::string& path);
void write_intrinsics(const std::string& path, const Intrinsics& intr);

// --- Mask JSONL --------------------------------------------------------
// One record per (frame, instance):
// {video_id, frame_index, instance_id, category, size:[h,w], counts:"..."}
struct MaskRecord {
  std::string video_id;
  int frame_index = 0;
  int instance_id = 0;
  std::string category;
  Rle mask;
};

std::vector<MaskRecord> read_mask_jsonl(const std::string& path);
void write_mask_jsonl(const std::string& path, const std::vector<MaskRecord>& records);
std::vector<MaskRecord> tracks_to_records(const std::string& video_id,
                                          const std::vector<Track>& tracks);

// --- Spatial fact JSONL ------------------------------------------------
struct FactRecord {
  std::string scene_id;
  SpatialFact fact;
  std::uint64_t policy_digest = 0;
};

void write_facts_jsonl(const std::string& path, const std::vector<FactRecord>& records);

// --- QA JSONL ----------------------------------------------------------
nlohmann::json qa_to_json(const QaItem& item);
QaItem qa_from_json(const nlohmann::json& record);
std::vector<QaItem> read_qa_jsonl(const std::string& path);
void write_qa_jsonl(const std::string& path, const std::vector<QaItem>& items);

// --- Predictions JSONL: {qa_id, kind, value|text|masks_ref} -------------
std::vector<Prediction> read_predictions_jsonl(const std::string& path);
void write_predictions_jsonl(const std::string& path, const std::vector<Prediction>& preds);

// --- Score report ---------------------------------------------------------
nlohmann::json report_to_json(const ScoreReport& report);

}  // namespace egoqa::io
