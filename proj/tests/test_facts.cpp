#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "egoqa/facts.hpp"
#include "support/synthetic.hpp"

using namespace egoqa;
using namespace egoqa::testsupport;

namespace {

InstanceGeometry box(int id, const Vec3& center, const Vec3& size, int k = 5) {
  return InstanceGeometry::from_points(id, box_lattice(center, size, k));
}

double wrap_diff(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace

TEST_SUITE_BEGIN("facts");

TEST_CASE("lattice geometry: exact centroid and box") {
  const InstanceGeometry g = box(1, {2, -1, 0.5}, {0.4, 0.6, 1.0});
  CHECK((g.centroid - Vec3(2, -1, 0.5)).norm() < 1e-9);
  CHECK((g.aabb.min - Vec3(1.8, -1.3, 0.0)).norm() < 1e-9);
  CHECK((g.aabb.max - Vec3(2.2, -0.7, 1.0)).norm() < 1e-9);
}

TEST_CASE("percentile trim ignores sparse speckle") {
  // 1000 clean points in a unit box plus 10 far outliers: the box must stay
  // within a few percent of the clean extents.
  Rng rng(8);
  std::vector<Vec3> pts;
  for (int i = 0; i < 1000; ++i) {
    pts.push_back(Vec3(rng.next_double(), rng.next_double(), rng.next_double()));
  }
  for (int i = 0; i < 10; ++i) pts.push_back(Vec3(50, 50, 50) + Vec3::Random());
  const InstanceGeometry g = InstanceGeometry::from_points(2, pts);
  CHECK(g.aabb.max.x() < 1.1);
  CHECK(g.aabb.max.z() < 1.1);
  CHECK(g.centroid.x() < 1.1);
}

TEST_CASE("trajectory length: hand sums") {
  CameraTrajectory traj;
  traj.poses = {horizontal_pose({0, 0, 0}, {1, 0, 0}, 0, 0.0),
                horizontal_pose({1, 0, 0}, {1, 0, 0}, 1, 1.0),
                horizontal_pose({1, 1, 0}, {0, 1, 0}, 2, 2.0)};
  CHECK(trajectory_length(traj) == doctest::Approx(2.0));

  CameraTrajectory single;
  single.poses = {horizontal_pose({3, 4, 5}, {1, 0, 0})};
  CHECK(trajectory_length(single) == 0.0);

  CameraTrajectory square;
  square.poses = {horizontal_pose({0, 0, 0}, {1, 0, 0}, 0, 0),
                  horizontal_pose({1, 0, 0}, {1, 0, 0}, 1, 1),
                  horizontal_pose({1, 1, 0}, {1, 0, 0}, 2, 2),
                  horizontal_pose({0, 1, 0}, {1, 0, 0}, 3, 3),
                  horizontal_pose({0, 0, 0}, {1, 0, 0}, 4, 4)};
  CHECK(trajectory_length(square) == doctest::Approx(4.0));

  CHECK_THROWS_WITH_AS(static_cast<void>(trajectory_length(CameraTrajectory{})),
                       doctest::Contains("EmptyTrajectory"), Error);
}

TEST_CASE("ego distance: 3-4-5 and coincidence") {
  const Pose cam = horizontal_pose({0, 0, 0}, {1, 0, 0});
  CHECK(ego_distance(cam, box(1, {3, 4, 0}, {0.1, 0.1, 0.1})) == doctest::Approx(5.0));
  CHECK(ego_distance(cam, box(2, {0, 0, 0}, {0.1, 0.1, 0.1})) ==
        doctest::Approx(0.0).epsilon(1e-9));

  const InstanceGeometry near = box(3, {1, 0, 0}, {0.1, 0.1, 0.1});
  const InstanceGeometry far = box(4, {2, 0, 0}, {0.1, 0.1, 0.1});
  CHECK(rank_extreme({&near, &far}, RankKey::ego_distance, RankMode::min, &cam) == 3);
}

TEST_CASE("ego direction: ahead, right, left") {
  const Pose cam = horizontal_pose({0, 0, 1.5}, {1, 0, 0});
  CHECK(ego_direction_cw(cam, box(1, {2, 0, 0.5}, {0.1, 0.1, 0.1})) ==
        doctest::Approx(0.0).epsilon(1e-9));
  // Facing +X with +Z up, "right hand" points along -Y.
  CHECK(ego_direction_cw(cam, box(2, {0, -2, 0.5}, {0.1, 0.1, 0.1})) == doctest::Approx(90.0));
  CHECK(ego_direction_cw(cam, box(3, {0, 2, 0.5}, {0.1, 0.1, 0.1})) == doctest::Approx(270.0));
}

TEST_CASE("ego direction rejects vertically aligned instances") {
  const Pose cam = horizontal_pose({1, 1, 1.5}, {1, 0, 0});
  CHECK_THROWS_WITH_AS(
      static_cast<void>(ego_direction_cw(cam, box(1, {1, 1, 0.2}, {0.0, 0.0, 0.1}, 3))),
      doctest::Contains("DegenerateBearing"), Error);
}

TEST_CASE("ego direction shifts by exactly the camera turn") {
  Rng rng(77);
  const QualitativePolicy policy;
  for (int trial = 0; trial < 50; ++trial) {
    const Pose cam = horizontal_pose({rng.uniform(-2, 2), rng.uniform(-2, 2), 1.5},
                                     {rng.uniform(-1, 1), rng.uniform(-1, 1), 0});
    const InstanceGeometry target =
        box(1, {rng.uniform(3, 6), rng.uniform(3, 6), 0.5}, {0.2, 0.2, 0.2});
    const double theta = rng.uniform(0, 360);
    Pose turned = cam;
    // Clockwise (viewed from above) = negative rotation about +Z.
    turned.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(-theta * kPi / 180.0, Vec3::UnitZ())) *
                      cam.rotation;
    const double before = ego_direction_cw(cam, target);
    const double after = ego_direction_cw(turned, target);
    CHECK(wrap_diff(before - after, theta) < 1e-6);
  }
}

TEST_CASE("post-turn relations from the listing examples") {
  const QualitativePolicy policy;
  const Pose cam = horizontal_pose({0, 0, 1.5}, {1, 0, 0});
  const InstanceGeometry ahead = box(1, {3, 0, 0.5}, {0.1, 0.1, 0.1});
  const InstanceGeometry right = box(2, {0, -3, 0.5}, {0.1, 0.1, 0.1});

  CHECK(post_turn_relation(cam, ahead, -90.0, policy) == "right");  // left turn
  CHECK(post_turn_relation(cam, right, 90.0, policy) == "front");   // right turn
  CHECK(post_turn_relation(cam, ahead, 0.0, policy) ==
        ego_relative_position(cam, ahead, policy));
}

TEST_CASE("sector labels with inclusive lower edges") {
  const QualitativePolicy policy;
  CHECK(sector_label(policy, 0.0) == "front");
  CHECK(sector_label(policy, 100.0) == "right");
  CHECK(sector_label(policy, 315.0) == "front");
  CHECK(sector_label(policy, 314.999) == "left");
  CHECK(sector_label(policy, 45.0) == "right");
  CHECK(sector_label(policy, 135.0) == "back");
  CHECK(sector_label(policy, 225.0) == "left");
}

TEST_CASE("center distance: coincident, axial, isometry-invariant") {
  const InstanceGeometry a = box(1, {0, 0, 1}, {0.2, 0.2, 0.2});
  const InstanceGeometry b = box(2, {0, 0, 3}, {0.2, 0.2, 0.2});
  CHECK(center_distance(a, a) == doctest::Approx(0.0));
  CHECK(center_distance(a, b) == doctest::Approx(2.0));

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform t = random_z_isometry(rng);
    auto transform_box = [&](const InstanceGeometry& g, int id) {
      std::vector<Vec3> pts;
      for (const Vec3& p : g.points.points) pts.push_back(t.apply(p));
      return InstanceGeometry::from_points(id, pts);
    };
    const InstanceGeometry a2 = transform_box(a, 1);
    const InstanceGeometry b2 = transform_box(b, 2);
    CHECK(std::abs(center_distance(a2, b2) - center_distance(a, b)) < 1e-9);
  }
}

TEST_CASE("elevation difference: floor pair, shelf object, antisymmetry") {
  const InstanceGeometry floor_a = box(1, {0, 0, 0.2}, {0.4, 0.4, 0.4});
  const InstanceGeometry floor_b = box(2, {2, 0, 0.3}, {0.4, 0.4, 0.6});
  CHECK(elevation_diff(floor_a, floor_b) == doctest::Approx(0.0).epsilon(1e-12));

  const InstanceGeometry shelf = box(3, {1, 1, 1.45}, {0.3, 0.3, 0.5});  // min z 1.2
  CHECK(elevation_diff(shelf, floor_a) == doctest::Approx(1.2));
  CHECK(elevation_diff(floor_a, shelf) == doctest::Approx(-1.2));
  CHECK(elevation_diff(shelf, floor_a) == -elevation_diff(floor_a, shelf));
}

TEST_CASE("elevation guard trips on unaligned input") {
  const InstanceGeometry sunken = box(1, {0, 0, -2}, {0.4, 0.4, 0.4});
  const InstanceGeometry ok = box(2, {1, 0, 0.5}, {0.4, 0.4, 0.4});
  CHECK_THROWS_WITH_AS(static_cast<void>(elevation_diff(sunken, ok)),
                       doctest::Contains("NotAligned"), Error);
}

TEST_CASE("size dims: unit cube, flat rug, too few points") {
  const SizeDims cube = size_dims(box(1, {0, 0, 0.5}, {1, 1, 1}, 5));
  CHECK(cube.width == doctest::Approx(1.0).epsilon(0.04));
  CHECK(cube.depth == doctest::Approx(1.0).epsilon(0.04));
  CHECK(cube.height == doctest::Approx(1.0).epsilon(0.04));

  const SizeDims rug = size_dims(box(2, {0, 0, 0.005}, {2, 1, 0.01}, 5));
  CHECK(rug.height == doctest::Approx(0.01));
  CHECK(rug.width == doctest::Approx(2.0));
  CHECK(rug.depth == doctest::Approx(1.0));

  const InstanceGeometry sparse =
      InstanceGeometry::from_points(3, box_lattice({0, 0, 0.5}, {1, 1, 1}, 1));
  CHECK_THROWS_WITH_AS(static_cast<void>(size_dims(sparse)),
                       doctest::Contains("TooFewPoints"), Error);
}

TEST_CASE("rank_extreme: tallest, ties, brute force") {
  const InstanceGeometry s = box(1, {0, 0, 0.25}, {0.3, 0.3, 0.5});
  const InstanceGeometry m = box(2, {1, 0, 0.5}, {0.3, 0.3, 1.0});
  const InstanceGeometry t = box(3, {2, 0, 1.0}, {0.3, 0.3, 2.0});
  CHECK(rank_extreme({&s, &m, &t}, RankKey::height_extent, RankMode::max) == 3);

  const Pose cam = horizontal_pose({0, 0, 0}, {1, 0, 0});
  const InstanceGeometry d1 = box(4, {1, 0, 0}, {0.1, 0.1, 0.1});
  const InstanceGeometry d2 = box(5, {0, 1, 0}, {0.1, 0.1, 0.1});
  CHECK_THROWS_WITH_AS(
      static_cast<void>(rank_extreme({&d1, &d2}, RankKey::ego_distance, RankMode::min, &cam)),
      doctest::Contains("Ambiguous"), Error);

  CHECK_THROWS_WITH_AS(
      static_cast<void>(rank_extreme({&s}, RankKey::height_extent, RankMode::max)),
      doctest::Contains("InvalidArgument"), Error);

  // Brute force agreement on 1000 random sets.
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    std::vector<InstanceGeometry> storage;
    storage.reserve(n);
    for (int i = 0; i < n; ++i) {
      storage.push_back(box(i + 1,
                            {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0.5, 2.0)},
                            {0.2, 0.2, rng.uniform(0.1, 2.0)}, 3));
    }
    std::vector<const InstanceGeometry*> ptrs;
    for (const auto& g : storage) ptrs.push_back(&g);
    const bool use_max = rng.below(2) == 1;
    int expected = 0;
    double expected_value = use_max ? -1e300 : 1e300;
    bool tie = false;
    std::vector<double> values;
    for (const auto& g : storage) values.push_back(g.height_extent());
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = i + 1; j < values.size(); ++j) {
        if (std::abs(values[i] - values[j]) <= 1e-6) tie = true;
      }
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if ((use_max && values[i] > expected_value) || (!use_max && values[i] < expected_value)) {
        expected_value = values[i];
        expected = storage[i].instance_id;
      }
    }
    if (tie) continue;  // guarded by the Ambiguous error, tested above
    CHECK(rank_extreme(ptrs, RankKey::height_extent,
                       use_max ? RankMode::max : RankMode::min) == expected);
  }
}

TEST_CASE("vertical relation: lamp over table, side by side, swapped") {
  const QualitativePolicy policy;
  const InstanceGeometry table = box(1, {0, 0, 0.45}, {1.2, 0.8, 0.9});   // top at 0.9
  const InstanceGeometry lamp = box(2, {0.1, 0, 1.15}, {0.2, 0.2, 0.3});  // bottom at 1.0
  CHECK(vertical_relation(lamp, table, policy) == VerticalRelation::above);
  CHECK(vertical_relation(table, lamp, policy) == VerticalRelation::below);

  const InstanceGeometry beside = box(3, {3, 0, 0.45}, {0.4, 0.4, 0.9});
  CHECK(vertical_relation(table, beside, policy) == VerticalRelation::neither);
  CHECK(vertical_relation(beside, table, policy) == VerticalRelation::neither);
}

TEST_CASE("metric facts are invariant under gravity-preserving isometries") {
  Rng rng(55);
  const Pose cam = horizontal_pose({0.5, -0.3, 1.4}, {1, 0.2, 0});
  const InstanceGeometry a = box(1, {2, 1, 0.5}, {0.4, 0.4, 1.0});
  const InstanceGeometry b = box(2, {-1, 2, 0.3}, {0.6, 0.3, 0.6});

  const double dist0 = ego_distance(cam, a);
  const double dir0 = ego_direction_cw(cam, a);
  const double cd0 = center_distance(a, b);
  const double ed0 = elevation_diff(a, b);

  for (int trial = 0; trial < 50; ++trial) {
    RigidTransform t = random_z_isometry(rng);
    t.translation.z() = rng.uniform(-0.1, 0.5);  // keep boxes above the guard
    auto move_box = [&](const InstanceGeometry& g, int id) {
      std::vector<Vec3> pts;
      for (const Vec3& p : g.points.points) pts.push_back(t.apply(p));
      return InstanceGeometry::from_points(id, pts);
    };
    const InstanceGeometry a2 = move_box(a, 1);
    const InstanceGeometry b2 = move_box(b, 2);
    const Pose cam2 = t.apply(cam);

    CHECK(std::abs(ego_distance(cam2, a2) - dist0) < 1e-6);
    CHECK(wrap_diff(ego_direction_cw(cam2, a2), dir0) < 1e-4);
    CHECK(std::abs(center_distance(a2, b2) - cd0) < 1e-6);
    CHECK(std::abs(elevation_diff(a2, b2) - ed0) < 1e-6);
  }
}

TEST_CASE("split_instances groups labeled points by id") {
  PointCloud cloud;
  for (const Vec3& p : box_lattice({0, 0, 0.5}, {0.5, 0.5, 0.5}, 3)) {
    cloud.points.push_back(p);
    cloud.labels.push_back(7);
  }
  for (const Vec3& p : box_lattice({2, 0, 0.5}, {0.5, 0.5, 0.5}, 3)) {
    cloud.points.push_back(p);
    cloud.labels.push_back(4);
  }
  cloud.points.push_back(Vec3(9, 9, 9));
  cloud.labels.push_back(-1);  // background stays out

  const std::vector<InstanceGeometry> instances = split_instances(cloud);
  REQUIRE(instances.size() == 2);
  CHECK(instances[0].instance_id == 4);
  CHECK(instances[1].instance_id == 7);
  CHECK((instances[1].centroid - Vec3(0, 0, 0.5)).norm() < 1e-9);
}

TEST_SUITE_END();
