#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "egoqa/geometry.hpp"

namespace egoqa {

// Axis-aligned box in the gravity-aligned frame.
struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extents() const { return max - min; }
};

// Per-instance geometry derived from its gravity-aligned points. The box is
// trimmed to the per-axis 2nd-98th percentile to shave projection speckle;
// the centroid is the mean of the points surviving the trim, so it always
// sits inside the box.
struct InstanceGeometry {
  int instance_id = 0;
  PointCloud points;
  Vec3 centroid = Vec3::Zero();
  Aabb aabb;

  double height_extent() const { return aabb.max.z() - aabb.min.z(); }

  static InstanceGeometry from_points(int instance_id, std::vector<Vec3> pts,
                                      double trim_lo = 0.02, double trim_hi = 0.98);
};

// Splits a labeled, gravity-aligned cloud into per-instance geometry,
// ordered by instance id.
std::vector<InstanceGeometry> split_instances(const PointCloud& cloud,
                                              std::size_t min_points = 1);

enum class FactKind {
  trajectory_length,
  ego_distance,
  ego_direction_cw,
  post_turn_relation,
  center_distance,
  elevation_diff,
  height_extent,
  size_dims,
  rank_extreme,
  vertical_relation,
  ego_relative_position,
};

const char* fact_kind_name(FactKind kind) noexcept;

// One computed geometric quantity; the bridge from geometry to QA.
struct SpatialFact {
  FactKind kind = FactKind::trajectory_length;
  std::vector<int> operands;           // instance ids, possibly empty
  std::optional<int> anchor_frame;     // pose the fact is anchored to
  double value = 0.0;                  // meters or degrees, when numeric
  std::string unit;                    // "m", "deg" or "" for labels
  std::string label;                   // categorical answer, when applicable
};

// Thresholds for the qualitative variants. Sectors are 90 degrees wide and
// centered on the axes; front straddles 0.
struct QualitativePolicy {
  double front_center_deg = 0.0;
  double sector_width_deg = 90.0;
  double vertical_margin_m = 0.05;
  double footprint_expansion_m = 0.10;

  std::uint64_t digest() const;
};

// Sector label for a clockwise bearing in [0, 360): front / right / back /
// left, lower edge inclusive.
std::string sector_label(const QualitativePolicy& policy, double bearing_cw_deg);

// Total walked distance: sum of consecutive camera position deltas.
double trajectory_length(const CameraTrajectory& traj);

double ego_distance(const Pose& pose, const InstanceGeometry& inst);

// Clockwise angle (viewed from above, +Z up) from the camera's ground-plane
// heading to the instance bearing, in [0, 360).
// Throws Errc::degenerate_bearing when the instance sits on the camera's
// vertical axis (or the camera looks straight up/down).
double ego_direction_cw(const Pose& pose, const InstanceGeometry& inst);

// Sector the instance lands in after the observer turns by turn_cw_deg
// (left turns are negative).
std::string post_turn_relation(const Pose& pose, const InstanceGeometry& inst,
                               double turn_cw_deg, const QualitativePolicy& policy);

double center_distance(const InstanceGeometry& a, const InstanceGeometry& b);

// Signed difference of heights above ground: a.min.z - b.min.z. Requires
// gravity-aligned inputs; a box noticeably below ground trips the guard.
double elevation_diff(const InstanceGeometry& a, const InstanceGeometry& b);

struct SizeDims {
  double width = 0.0;   // larger horizontal extent
  double depth = 0.0;   // smaller horizontal extent
  double height = 0.0;  // vertical extent
};

// Trimmed-box extents. Requires >= 20 points (Errc::too_few_points).
SizeDims size_dims(const InstanceGeometry& inst);

enum class RankKey { ego_distance, height_extent };
enum class RankMode { min, max };

// Arg-min/max instance id under the key. All key values must be pairwise
// distinct by > 1e-6 (Errc::ambiguous_rank); requires >= 2 instances.
int rank_extreme(const std::vector<const InstanceGeometry*>& insts, RankKey key,
                 RankMode mode, const Pose* pose = nullptr);

enum class VerticalRelation { above, below, neither };

const char* vertical_relation_name(VerticalRelation r) noexcept;

// a above b iff a's bottom clears b's top (within the margin) and a's
// horizontal centroid falls inside b's expanded footprint; below is the
// mirrored test.
VerticalRelation vertical_relation(const InstanceGeometry& a, const InstanceGeometry& b,
                                   const QualitativePolicy& policy);

// Qualitative variant of ego_direction_cw.
std::string ego_relative_position(const Pose& pose, const InstanceGeometry& inst,
                                  const QualitativePolicy& policy);

}  // namespace egoqa
