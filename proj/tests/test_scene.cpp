// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <sstream>

#include "aomap/io/scene.hpp"
#include "helpers.hpp"

using namespace aomap;

TEST_CASE("a wall facing the camera renders a constant z-depth") {
  const SensorSpec spec = aotest::small_sensor();
  const SyntheticScene scene = aotest::wall_scene(3.0, {0.0, 0.0, 0.0}, 1);
  const Image<float> depth = scene.render_depth(0, spec);
  // z-depth of a plane perpendicular to the optical axis is constant
  CHECK(depth(spec.width / 2, spec.height / 2) == Catch::Approx(3.0));
  CHECK(depth(3, 5) == Catch::Approx(3.0).epsilon(1e-6));
  CHECK(depth(spec.width - 2, spec.height - 2) == Catch::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("a pole cuts a silhouette into the wall") {
  const SensorSpec spec = aotest::small_sensor();
  SyntheticScene scene = aotest::wall_scene(3.0, {0.0, 0.0, 0.0}, 1);
  scene.primitives.push_back(Primitive::cylinder({0.0, -2.0, 1.5}, {0.0, 2.0, 1.5}, 0.05));
  const Image<float> depth = scene.render_depth(0, spec);
  const int cu = spec.width / 2;
  const int cv = spec.height / 2;
  // front of the pole; the pixel-centre ray is half a pixel off-axis
  CHECK(depth(cu, cv) == Catch::Approx(1.45).margin(0.002));
  // silhouette half-width in pixels: fx * r / sqrt(z^2 - r^2), discontinuity beyond it
  const int off = static_cast<int>(spec.fx * 0.05 / std::sqrt(1.5 * 1.5 - 0.05 * 0.05)) + 2;
  CHECK(depth(cu + off, cv) == Catch::Approx(3.0).epsilon(1e-5));
  CHECK(depth(cu - off, cv) == Catch::Approx(3.0).epsilon(1e-5));
}

TEST_CASE("renders are deterministic for a fixed seed") {
  SensorSpec spec = aotest::small_sensor();
  SyntheticScene scene = aotest::wall_scene(2.5, {0.0, 0.0, 0.0}, 3);
  scene.noise = true;
  scene.seed = 99;
  const Image<float> a = scene.render_depth(2, spec);
  const Image<float> b = scene.render_depth(2, spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.data()[i] == b.data()[i]);
}

TEST_CASE("rendered surfaces agree with the signed distance function") {
  const SensorSpec spec = aotest::small_sensor();
  SyntheticScene scene;
  scene.primitives.push_back(Primitive::sphere({0.3, 0.1, 2.0}, 0.4));
  scene.primitives.push_back(Primitive::box({-1.0, -1.0, 2.8}, {1.0, 1.0, 3.2}));
  scene.primitives.push_back(Primitive::cylinder({-0.5, -1.0, 1.2}, {-0.5, 1.0, 1.2}, 0.1));
  Keyframe kf;
  scene.keyframes.push_back(kf);
  const Image<float> depth = scene.render_depth(0, spec);

  std::mt19937 rng(7);
  std::uniform_int_distribution<int> ud(0, spec.width - 1), vd(0, spec.height - 1);
  for (int i = 0; i < 500; ++i) {
    const int u = ud(rng), v = vd(rng);
    const float z = depth(u, v);
    if (z <= 0.0f) continue;
    const Eigen::Vector3d dir((u - spec.cx) / spec.fx, (v - spec.cy) / spec.fy, 1.0);
    const Eigen::Vector3d hit = static_cast<double>(z) * dir;
    REQUIRE(std::abs(scene.sdf(hit)) < 1e-6);
  }
}

TEST_CASE("primitive signed distances") {
  const Primitive sphere = Primitive::sphere({0, 0, 0}, 1.0);
  CHECK(sphere.sdf({2, 0, 0}) == Catch::Approx(1.0));
  CHECK(sphere.sdf({0, 0.5, 0}) == Catch::Approx(-0.5));

  const Primitive box = Primitive::box({-1, -1, -1}, {1, 1, 1});
  CHECK(box.sdf({2, 0, 0}) == Catch::Approx(1.0));
  CHECK(box.sdf({0, 0, 0}) == Catch::Approx(-1.0));
  CHECK(box.sdf({2, 2, 0}) == Catch::Approx(std::sqrt(2.0)));

  const Primitive cyl = Primitive::cylinder({0, 0, 0}, {0, 2, 0}, 0.5);
  CHECK(cyl.sdf({1.5, 1, 0}) == Catch::Approx(1.0));
  CHECK(cyl.sdf({0, 1, 0}) == Catch::Approx(-0.5));
  CHECK(cyl.sdf({0, 3, 0}) == Catch::Approx(1.0));
}

TEST_CASE("trajectory interpolation") {
  SyntheticScene scene;
  Keyframe a;
  a.time = 0.0;
  a.position = {0, 0, 0};
  Keyframe b;
  b.time = 1.0;
  b.position = {2, 0, 0};
  b.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()));
  scene.keyframes = {a, b};
  scene.frame_count = 3;
  const Pose mid = scene.pose(1);
  CHECK(mid.translation.x() == Catch::Approx(1.0));
  const Eigen::AngleAxisd aa(mid.rotation);
  CHECK(aa.angle() == Catch::Approx(M_PI / 4));
}

TEST_CASE("scene files parse and reject unknown directives") {
  const std::string good =
      "aomap-scene 1\n"
      "# a wall and a pole\n"
      "plane 0 0 -1 -3.0\n"
      "cylinder 0 -2 1.5 0 2 1.5 0.05\n"
      "sphere 1 1 1 0.2\n"
      "box 0 0 0 1 1 1\n"
      "keyframe 0.0 0 0 0 0 0 0 1\n"
      "keyframe 1.0 0.5 0 0 0 0 0 1\n"
      "frames 10\n"
      "seed 4\n";
  std::istringstream in(good);
  const SyntheticScene scene = load_scene(in);
  CHECK(scene.primitives.size() == 4);
  CHECK(scene.keyframes.size() == 2);
  CHECK(scene.frame_count == 10);
  CHECK(scene.seed == 4);

  std::istringstream bad("aomap-scene 1\nwibble 1 2 3\n");
  CHECK_THROWS_WITH(load_scene(bad), Catch::Matchers::ContainsSubstring(":2:"));

  std::istringstream no_header("plane 0 0 1 0\n");
  CHECK_THROWS_WITH(load_scene(no_header), Catch::Matchers::ContainsSubstring("header"));

  std::istringstream short_line("aomap-scene 1\nsphere 1 1\n");
  CHECK_THROWS_AS(load_scene(short_line), std::runtime_error);
}
