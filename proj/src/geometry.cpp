#include "egoqa/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "egoqa/rng.hpp"

namespace egoqa {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Sign convention for fitted planes: flip so the dominant normal component
// is positive. Keeps results reproducible across refits.
void canonicalize(Plane& plane) {
  const Vec3& n = plane.normal;
  int axis = 0;
  if (std::abs(n.y()) > std::abs(n[axis])) axis = 1;
  if (std::abs(n.z()) > std::abs(n[axis])) axis = 2;
  if (n[axis] < 0.0) {
    plane.normal = -plane.normal;
    plane.d = -plane.d;
  }
}

bool all_collinear(const std::vector<Vec3>& pts) {
  const Vec3& p0 = pts[0];
  std::size_t j = 1;
  for (; j < pts.size(); ++j) {
    if ((pts[j] - p0).norm() > 1e-12) break;
  }
  if (j == pts.size()) return true;  // all coincident
  const Vec3 base = pts[j] - p0;
  const double base_norm = base.norm();
  for (std::size_t k = j + 1; k < pts.size(); ++k) {
    const Vec3 v = pts[k] - p0;
    if (base.cross(v).norm() > 1e-9 * base_norm * v.norm()) return false;
  }
  return true;
}

std::optional<Plane> plane_from_triple(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = b - a;
  const Vec3 v = c - a;
  const Vec3 n = u.cross(v);
  const double norm = n.norm();
  if (norm <= 1e-9 * u.norm() * v.norm() || norm == 0.0) return std::nullopt;
  Plane plane;
  plane.normal = n / norm;
  plane.d = -plane.normal.dot(a);
  canonicalize(plane);
  return plane;
}

// Total-least-squares plane through the given inliers (smallest covariance
// eigenvector).
Plane refit_plane(const std::vector<Vec3>& pts, const std::vector<std::uint32_t>& idx) {
  Vec3 centroid = Vec3::Zero();
  for (std::uint32_t i : idx) centroid += pts[i];
  centroid /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::uint32_t i : idx) {
    const Vec3 q = pts[i] - centroid;
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  Plane plane;
  plane.normal = solver.eigenvectors().col(0).normalized();
  plane.d = -plane.normal.dot(centroid);
  canonicalize(plane);
  return plane;
}

std::vector<std::uint32_t> gather_inliers(const std::vector<Vec3>& pts, const Plane& plane,
                                          double threshold) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (plane.distance(pts[i]) <= threshold) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

struct Hypothesis {
  Plane plane;
  bool valid = false;
};

struct BestHypothesis {
  int count = -1;
  int iteration = std::numeric_limits<int>::max();

  // Total order: more inliers wins, earliest iteration breaks ties. Keeps
  // the parallel reduction bit-identical to the serial loop.
  bool beats(const BestHypothesis& other) const {
    if (count != other.count) return count > other.count;
    return iteration < other.iteration;
  }
};

}  // namespace

namespace detail {

int count_inliers_serial(const std::vector<Vec3>& pts, const Plane& plane, double threshold) {
  int count = 0;
  for (const Vec3& p : pts) {
    if (plane.distance(p) <= threshold) ++count;
  }
  return count;
}

int count_inliers_parallel(const std::vector<Vec3>& pts, const Plane& plane, double threshold) {
  int count = 0;
  const std::int64_t n = static_cast<std::int64_t>(pts.size());
#pragma omp parallel for reduction(+ : count) schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    if (plane.distance(pts[static_cast<std::size_t>(i)]) <= threshold) ++count;
  }
  return count;
}

}  // namespace detail

void Intrinsics::validate() const {
  require(fx > 0.0 && fy > 0.0, Errc::invalid_argument, "focal lengths must be positive");
  require(width > 0 && height > 0, Errc::invalid_argument, "image size must be positive");
  require(cx >= 0.0 && cx < width, Errc::invalid_argument, "cx outside image");
  require(cy >= 0.0 && cy < height, Errc::invalid_argument, "cy outside image");
}

void PointCloud::validate() const {
  require(labels.empty() || labels.size() == points.size(), Errc::invalid_argument,
          "label list length does not match point count");
  require(colors.empty() || colors.size() == points.size(), Errc::invalid_argument,
          "color list length does not match point count");
}

Pose RigidTransform::apply(const Pose& pose) const {
  Pose out = pose;
  out.rotation = (rotation * pose.rotation).normalized();
  out.translation = apply(pose.translation);
  return out;
}

std::array<double, 16> RigidTransform::matrix_row_major() const {
  const Eigen::Matrix3d r = rotation.toRotationMatrix();
  return {r(0, 0), r(0, 1), r(0, 2), translation.x(),
          r(1, 0), r(1, 1), r(1, 2), translation.y(),
          r(2, 0), r(2, 1), r(2, 2), translation.z(),
          0.0,     0.0,     0.0,     1.0};
}

PlaneFit fit_plane_ransac(const PointCloud& cloud, const RansacParams& params, Exec exec) {
  cloud.validate();
  require(params.iterations_per_plane >= 1, Errc::invalid_argument, "iterations_per_plane < 1");
  require(params.inlier_threshold > 0.0, Errc::invalid_argument, "inlier_threshold <= 0");
  const std::vector<Vec3>& pts = cloud.points;
  require(pts.size() >= 3, Errc::degenerate_cloud,
          "plane fit needs >= 3 points, got " + std::to_string(pts.size()));
  require(!all_collinear(pts), Errc::degenerate_cloud, "all points are collinear");

  // Hypotheses are sampled up front on a single stream so the evaluation
  // order cannot perturb the RNG.
  Rng rng(params.rng_seed);
  const int iters = params.iterations_per_plane;
  std::vector<Hypothesis> hypotheses(static_cast<std::size_t>(iters));
  const std::uint64_t n = pts.size();
  for (int it = 0; it < iters; ++it) {
    std::uint64_t i0 = rng.below(n), i1, i2;
    do { i1 = rng.below(n); } while (i1 == i0);
    do { i2 = rng.below(n); } while (i2 == i0 || i2 == i1);
    if (auto plane = plane_from_triple(pts[i0], pts[i1], pts[i2])) {
      hypotheses[it].plane = *plane;
      hypotheses[it].valid = true;
    }
  }

  BestHypothesis best;
  if (exec == Exec::parallel) {
#pragma omp parallel
    {
      BestHypothesis local;
#pragma omp for schedule(static) nowait
      for (int it = 0; it < iters; ++it) {
        if (!hypotheses[it].valid) continue;
        BestHypothesis cand{detail::count_inliers_serial(pts, hypotheses[it].plane,
                                                         params.inlier_threshold),
                            it};
        if (cand.beats(local)) local = cand;
      }
#pragma omp critical
      if (local.beats(best)) best = local;
    }
  } else {
    for (int it = 0; it < iters; ++it) {
      if (!hypotheses[it].valid) continue;
      BestHypothesis cand{detail::count_inliers_serial(pts, hypotheses[it].plane,
                                                       params.inlier_threshold),
                          it};
      if (cand.beats(best)) best = cand;
    }
  }
  require(best.count >= 0, Errc::no_plane, "no non-degenerate hypothesis sampled");

  Plane plane = hypotheses[best.iteration].plane;
  std::vector<std::uint32_t> inliers = gather_inliers(pts, plane, params.inlier_threshold);

  if (inliers.size() >= 3) {
    const Plane refined = refit_plane(pts, inliers);
    std::vector<std::uint32_t> refined_inliers =
        gather_inliers(pts, refined, params.inlier_threshold);
    if (refined_inliers.size() >= inliers.size()) {
      plane = refined;
      inliers = std::move(refined_inliers);
    }
  }

  plane.inlier_count = static_cast<int>(inliers.size());
  require(plane.inlier_count >= params.min_inliers, Errc::no_plane,
          "best plane has " + std::to_string(plane.inlier_count) + " inliers, need " +
              std::to_string(params.min_inliers));
  return PlaneFit{plane, std::move(inliers)};
}

GroundDetection detect_ground(const PointCloud& cloud, const Pose& initial_pose,
                              const RansacParams& params, Exec exec) {
  cloud.validate();
  constexpr int kRounds = 10;
  std::vector<std::uint32_t> active(cloud.points.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = static_cast<std::uint32_t>(i);

  std::vector<Plane> candidates;
  for (int round = 0; round < kRounds; ++round) {
    if (active.size() < 3) break;
    PointCloud remaining;
    remaining.points.reserve(active.size());
    for (std::uint32_t i : active) remaining.points.push_back(cloud.points[i]);

    RansacParams round_params = params;
    round_params.rng_seed = Rng::derive(params.rng_seed, static_cast<std::uint64_t>(round));
    round_params.min_inliers = std::max<int>(params.min_inliers,
                                             static_cast<int>(remaining.size() / 100));
    PlaneFit fit;
    try {
      fit = fit_plane_ransac(remaining, round_params, exec);
    } catch (const Error& e) {
      if (e.code() == Errc::no_plane || e.code() == Errc::degenerate_cloud) break;
      throw;
    }
    candidates.push_back(fit.plane);

    // Drop this plane's inliers before the next round.
    std::vector<std::uint32_t> next;
    next.reserve(active.size() - fit.inliers.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (k < fit.inliers.size() && fit.inliers[k] == i) {
        ++k;
        continue;
      }
      next.push_back(active[i]);
    }
    active = std::move(next);
  }

  require(!candidates.empty(), Errc::no_ground, "no plane reached the inlier floor");

  const Vec3 cam_y = initial_pose.camera_y();
  int best = 0;
  double best_align = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double align = std::abs(candidates[i].normal.dot(cam_y));
    if (align > best_align) {
      best_align = align;
      best = static_cast<int>(i);
    }
  }
  GroundDetection out;
  out.ground = candidates[best];
  out.planes_considered = static_cast<int>(candidates.size());
  out.angle_to_camera_y_deg =
      std::acos(std::clamp(best_align, 0.0, 1.0)) * 180.0 / kPi;
  return out;
}

AlignmentResult gravity_align(const PointCloud& cloud, const CameraTrajectory& traj,
                              const Plane& ground) {
  require(std::abs(ground.normal.norm() - 1.0) <= 1e-9, Errc::invalid_argument,
          "ground normal must be unit length");

  // Orient the normal toward the cameras so +Z ends up "up".
  Vec3 n = ground.normal;
  double d = ground.d;
  if (!traj.poses.empty()) {
    Vec3 mean_cam = Vec3::Zero();
    for (const Pose& pose : traj.poses) mean_cam += pose.translation;
    mean_cam /= static_cast<double>(traj.poses.size());
    if (n.dot(mean_cam) + d < 0.0) {
      n = -n;
      d = -d;
    }
  }

  RigidTransform transform;
  transform.rotation = Eigen::Quaterniond::FromTwoVectors(n, Vec3::UnitZ()).normalized();
  transform.translation = Vec3(0.0, 0.0, d);

  AlignmentResult out;
  out.transform = transform;
  out.corrected_angle_deg = Eigen::AngleAxisd(transform.rotation).angle() * 180.0 / kPi;
  out.ground_after = Plane{Vec3::UnitZ(), 0.0, ground.inlier_count};

  out.cloud.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.cloud.points.push_back(transform.apply(p));
  out.cloud.labels = cloud.labels;
  out.cloud.colors = cloud.colors;

  out.trajectory.poses.reserve(traj.poses.size());
  for (const Pose& pose : traj.poses) out.trajectory.poses.push_back(transform.apply(pose));
  return out;
}

Vec3 project_pixel(const Intrinsics& intr, const Pose& pose, double u, double v,
                   double depth) {
  intr.validate();
  require(depth > 0.0, Errc::non_positive_depth,
          "depth must be positive, got " + std::to_string(depth));
  require(u >= 0.0 && u < intr.width && v >= 0.0 && v < intr.height, Errc::out_of_bounds,
          "pixel (" + std::to_string(u) + ", " + std::to_string(v) + ") outside image");
  const Vec3 cam((u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth);
  return pose.rotation * cam + pose.translation;
}

bool project_to_pixel(const Intrinsics& intr, const Pose& pose, const Vec3& world,
                      double& u, double& v, double& depth) {
  const Vec3 cam = pose.rotation.conjugate() * (world - pose.translation);
  if (cam.z() <= 0.0) return false;
  depth = cam.z();
  u = intr.cx + cam.x() * intr.fx / cam.z();
  v = intr.cy + cam.y() * intr.fy / cam.z();
  return true;
}

LiftResult lift_mask(const Intrinsics& intr, const Pose& pose, const Rle& mask,
                     const DepthMap& depth) {
  intr.validate();
  require(mask.height == depth.height && mask.width == depth.width &&
              mask.height == intr.height && mask.width == intr.width,
          Errc::dimension_mismatch, "mask, depth map and intrinsics sizes differ");

  LiftResult out;
  const std::int64_t h = mask.height;
  std::int64_t p = 0;
  bool fg = false;
  for (std::uint32_t run : mask.counts) {
    if (fg) {
      for (std::uint32_t k = 0; k < run; ++k) {
        const std::int64_t q = p + k;
        const int col = static_cast<int>(q / h);
        const int row = static_cast<int>(q % h);
        const float z = depth.at(row, col);
        if (!std::isfinite(z) || z <= 0.f) {
          ++out.skipped;
          continue;
        }
        const double dz = static_cast<double>(z);
        const Vec3 cam((col - intr.cx) * dz / intr.fx, (row - intr.cy) * dz / intr.fy, dz);
        out.cloud.points.push_back(pose.rotation * cam + pose.translation);
      }
    }
    p += run;
    fg = !fg;
  }
  return out;
}

}  // namespace egoqa
