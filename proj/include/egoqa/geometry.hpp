#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "egoqa/error.hpp"
#include "egoqa/parallel.hpp"
#include "egoqa/rle.hpp"

namespace egoqa {

using Vec3 = Eigen::Vector3d;

// Camera extrinsics at one frame. `rotation`/`translation` map camera-frame
// points into the world: p_world = rotation * p_cam + translation.
// Convention (pinned; see README): right-handed, camera forward = +Z in the
// camera frame, image +u right, +v down.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();
  double timestamp_s = 0.0;
  int frame_index = 0;

  Vec3 forward() const { return rotation * Vec3::UnitZ(); }
  Vec3 camera_y() const { return rotation * Vec3::UnitY(); }
};

struct CameraTrajectory {
  std::vector<Pose> poses;
};

struct Intrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<std::int32_t> labels;                  // empty or per-point instance id
  std::vector<std::array<std::uint8_t, 3>> colors;   // empty or per-point RGB

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return !labels.empty(); }
  void validate() const;
};

// Plane {p : normal . p + d = 0} with unit normal.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double d = 0.0;
  int inlier_count = 0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + d; }
  double distance(const Vec3& p) const { return std::abs(signed_distance(p)); }
};

struct RansacParams {
  int iterations_per_plane = 512;
  double inlier_threshold = 0.02;  // meters, point-plane distance
  int min_inliers = 500;
  std::uint64_t rng_seed = 0;
};

// Rigid transform p' = rotation * p + translation, serialized row-major 4x4.
struct RigidTransform {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Pose apply(const Pose& pose) const;
  std::array<double, 16> matrix_row_major() const;
};

struct PlaneFit {
  Plane plane;
  std::vector<std::uint32_t> inliers;  // indices into the input cloud
};

// RANSAC plane fit. Deterministic for a fixed (cloud, params.rng_seed):
// hypothesis triples come from the seeded generator, the best hypothesis is
// the max-inlier one (ties -> earliest iteration), and the winner is refined
// once by a total-least-squares fit over its inliers with the inlier set
// recomputed (kept only if it does not lose inliers).
//
// Throws Errc::degenerate_cloud (< 3 points or all collinear) and
// Errc::no_plane (best count < params.min_inliers).
PlaneFit fit_plane_ransac(const PointCloud& cloud, const RansacParams& params,
                          Exec exec = Exec::parallel);

struct GroundDetection {
  Plane ground;
  int planes_considered = 0;
  double angle_to_camera_y_deg = 0.0;  // unsigned angle of the winning plane
};

// Sequential multi-plane extraction: up to 10 RANSAC rounds, removing each
// plane's inliers before the next round, then selects the plane whose normal
// deviates least (sign-invariant) from the initial camera Y axis.
// Per round the effective inlier floor is max(params.min_inliers,
// remaining_points / 100).
// Throws Errc::no_ground when no round yields an acceptable plane.
GroundDetection detect_ground(const PointCloud& cloud, const Pose& initial_pose,
                              const RansacParams& params, Exec exec = Exec::parallel);

struct AlignmentResult {
  PointCloud cloud;
  CameraTrajectory trajectory;
  RigidTransform transform;
  Plane ground_after;            // always normal (0,0,1), d = 0
  double corrected_angle_deg = 0.0;  // rotation angle applied
};

// Applies the minimal rotation taking the ground normal to +Z plus the
// translation placing the ground plane at z = 0. The normal sign is chosen
// so the mean camera position ends up above the ground.
AlignmentResult gravity_align(const PointCloud& cloud, const CameraTrajectory& traj,
                              const Plane& ground);

// Pinhole back-projection of one pixel at a known depth into world
// coordinates. Throws Errc::out_of_bounds / Errc::non_positive_depth.
Vec3 project_pixel(const Intrinsics& intr, const Pose& pose, double u, double v,
                   double depth);

// Inverse of project_pixel: world point -> pixel (u, v) and depth.
// Returns false when the point is behind the camera.
bool project_to_pixel(const Intrinsics& intr, const Pose& pose, const Vec3& world,
                      double& u, double& v, double& depth);

struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // row-major, meters

  DepthMap() = default;
  DepthMap(int h, int w, float fill = 0.f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}
  float at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  float& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
};

struct LiftResult {
  PointCloud cloud;
  std::size_t skipped = 0;  // masked pixels without a finite positive depth
};

// Back-projects every masked pixel with a valid depth; traversal follows the
// RLE's column-major pixel order. Throws Errc::dimension_mismatch when the
// mask, depth map and intrinsics disagree on image size.
LiftResult lift_mask(const Intrinsics& intr, const Pose& pose, const Rle& mask,
                     const DepthMap& depth);

namespace detail {
// Inlier-count kernels behind fit_plane_ransac; exposed for the equivalence
// tests and the benchmark target.
int count_inliers_serial(const std::vector<Vec3>& pts, const Plane& plane, double threshold);
int count_inliers_parallel(const std::vector<Vec3>& pts, const Plane& plane, double threshold);
}  // namespace detail

}  // namespace egoqa
