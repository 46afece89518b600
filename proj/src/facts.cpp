#include "egoqa/facts.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "egoqa/rng.hpp"

namespace egoqa {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Linear-interpolation quantile over a copy of the values.
double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  return r;
}

}  // namespace

InstanceGeometry InstanceGeometry::from_points(int instance_id, std::vector<Vec3> pts,
                                               double trim_lo, double trim_hi) {
  require(!pts.empty(), Errc::invalid_argument, "instance has no points");
  InstanceGeometry out;
  out.instance_id = instance_id;

  std::vector<double> axis(pts.size());
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < pts.size(); ++i) axis[i] = pts[i][a];
    out.aabb.min[a] = quantile(axis, trim_lo);
    out.aabb.max[a] = quantile(axis, trim_hi);
  }

  Vec3 sum = Vec3::Zero();
  std::size_t kept = 0;
  for (const Vec3& p : pts) {
    const bool inside = (p.array() >= out.aabb.min.array() - 1e-12).all() &&
                        (p.array() <= out.aabb.max.array() + 1e-12).all();
    if (inside) {
      sum += p;
      ++kept;
    }
  }
  if (kept > 0) {
    out.centroid = sum / static_cast<double>(kept);
  } else {
    // Pathological spread: fall back to the box center.
    out.centroid = 0.5 * (out.aabb.min + out.aabb.max);
  }
  out.points.points = std::move(pts);
  return out;
}

std::vector<InstanceGeometry> split_instances(const PointCloud& cloud,
                                              std::size_t min_points) {
  cloud.validate();
  require(cloud.has_labels(), Errc::invalid_argument, "cloud has no instance labels");
  std::map<std::int32_t, std::vector<Vec3>> groups;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (cloud.labels[i] < 0) continue;  // unlabeled background
    groups[cloud.labels[i]].push_back(cloud.points[i]);
  }
  std::vector<InstanceGeometry> out;
  for (auto& [id, pts] : groups) {
    if (pts.size() < min_points) continue;
    out.push_back(InstanceGeometry::from_points(id, std::move(pts)));
  }
  return out;
}

const char* fact_kind_name(FactKind kind) noexcept {
  switch (kind) {
    case FactKind::trajectory_length: return "trajectory_length";
    case FactKind::ego_distance: return "ego_distance";
    case FactKind::ego_direction_cw: return "ego_direction_cw";
    case FactKind::post_turn_relation: return "post_turn_relation";
    case FactKind::center_distance: return "center_distance";
    case FactKind::elevation_diff: return "elevation_diff";
    case FactKind::height_extent: return "height_extent";
    case FactKind::size_dims: return "size_dims";
    case FactKind::rank_extreme: return "rank_extreme";
    case FactKind::vertical_relation: return "vertical_relation";
    case FactKind::ego_relative_position: return "ego_relative_position";
  }
  return "unknown";
}

std::uint64_t QualitativePolicy::digest() const {
  std::string repr = std::to_string(front_center_deg) + "|" +
                     std::to_string(sector_width_deg) + "|" +
                     std::to_string(vertical_margin_m) + "|" +
                     std::to_string(footprint_expansion_m);
  return Rng::hash_str(repr);
}

std::string sector_label(const QualitativePolicy& policy, double bearing_cw_deg) {
  const double half = policy.sector_width_deg / 2.0;
  // Offset so front spans [0, width) and sectors follow clockwise.
  const double shifted = wrap360(bearing_cw_deg - policy.front_center_deg + half);
  const int sector = static_cast<int>(shifted / policy.sector_width_deg) % 4;
  switch (sector) {
    case 0: return "front";
    case 1: return "right";
    case 2: return "back";
    default: return "left";
  }
}

double trajectory_length(const CameraTrajectory& traj) {
  require(!traj.poses.empty(), Errc::empty_trajectory, "trajectory has no poses");
  double total = 0.0;
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    total += (traj.poses[i].translation - traj.poses[i - 1].translation).norm();
  }
  return total;
}

double ego_distance(const Pose& pose, const InstanceGeometry& inst) {
  return (inst.centroid - pose.translation).norm();
}

double ego_direction_cw(const Pose& pose, const InstanceGeometry& inst) {
  Vec3 heading = pose.forward();
  heading.z() = 0.0;
  Vec3 bearing = inst.centroid - pose.translation;
  bearing.z() = 0.0;
  require(bearing.norm() > 1e-6, Errc::degenerate_bearing,
          "instance is vertically aligned with the camera");
  require(heading.norm() > 1e-6, Errc::degenerate_bearing,
          "camera looks along the vertical axis");
  const double ccw = std::atan2(heading.x() * bearing.y() - heading.y() * bearing.x(),
                                heading.x() * bearing.x() + heading.y() * bearing.y());
  return wrap360(-ccw * 180.0 / kPi);
}

std::string post_turn_relation(const Pose& pose, const InstanceGeometry& inst,
                               double turn_cw_deg, const QualitativePolicy& policy) {
  const double bearing = wrap360(ego_direction_cw(pose, inst) - turn_cw_deg);
  return sector_label(policy, bearing);
}

double center_distance(const InstanceGeometry& a, const InstanceGeometry& b) {
  return (a.centroid - b.centroid).norm();
}

double elevation_diff(const InstanceGeometry& a, const InstanceGeometry& b) {
  require(a.aabb.min.z() >= -0.5 && b.aabb.min.z() >= -0.5, Errc::not_aligned,
          "instance sits below ground; inputs must be gravity-aligned");
  return a.aabb.min.z() - b.aabb.min.z();
}

SizeDims size_dims(const InstanceGeometry& inst) {
  require(inst.points.size() >= 20, Errc::too_few_points,
          "size facts need >= 20 points, got " + std::to_string(inst.points.size()));
  const Vec3 ext = inst.aabb.extents();
  SizeDims dims;
  dims.height = ext.z();
  dims.width = std::max(ext.x(), ext.y());
  dims.depth = std::min(ext.x(), ext.y());
  return dims;
}

int rank_extreme(const std::vector<const InstanceGeometry*>& insts, RankKey key,
                 RankMode mode, const Pose* pose) {
  require(insts.size() >= 2, Errc::invalid_argument, "ranking needs >= 2 instances");
  require(key != RankKey::ego_distance || pose != nullptr, Errc::invalid_argument,
          "ego_distance ranking needs a pose");

  std::vector<double> values(insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i) {
    values[i] = key == RankKey::ego_distance ? ego_distance(*pose, *insts[i])
                                             : insts[i]->height_extent();
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = i + 1; j < values.size(); ++j) {
      require(std::abs(values[i] - values[j]) > 1e-6, Errc::ambiguous_rank,
              "key values tie within 1e-6");
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const bool better = mode == RankMode::min ? values[i] < values[best]
                                              : values[i] > values[best];
    if (better) best = i;
  }
  return insts[best]->instance_id;
}

const char* vertical_relation_name(VerticalRelation r) noexcept {
  switch (r) {
    case VerticalRelation::above: return "above";
    case VerticalRelation::below: return "below";
    default: return "neither";
  }
}

namespace {

bool above_condition(const InstanceGeometry& a, const InstanceGeometry& b,
                     const QualitativePolicy& policy) {
  if (a.aabb.min.z() < b.aabb.max.z() - policy.vertical_margin_m) return false;
  const double e = policy.footprint_expansion_m;
  return a.centroid.x() >= b.aabb.min.x() - e && a.centroid.x() <= b.aabb.max.x() + e &&
         a.centroid.y() >= b.aabb.min.y() - e && a.centroid.y() <= b.aabb.max.y() + e;
}

}  // namespace

VerticalRelation vertical_relation(const InstanceGeometry& a, const InstanceGeometry& b,
                                   const QualitativePolicy& policy) {
  if (above_condition(a, b, policy)) return VerticalRelation::above;
  if (above_condition(b, a, policy)) return VerticalRelation::below;
  return VerticalRelation::neither;
}

std::string ego_relative_position(const Pose& pose, const InstanceGeometry& inst,
                                  const QualitativePolicy& policy) {
  return sector_label(policy, ego_direction_cw(pose, inst));
}

}  // namespace egoqa
