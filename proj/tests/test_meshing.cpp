// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "aomap/integrator/integrator.hpp"
#include "aomap/mesh/meshing.hpp"
#include "helpers.hpp"

using namespace aomap;

namespace {
const Eigen::Vector3d kCamera(1.28, 1.28, 0.15);
}

TEST_CASE("a flat wall meshes onto the plane") {
  OccupancyOctree map(0.02, 7, Eigen::Vector3d::Zero());
  const SensorSpec spec = aotest::small_sensor(0.02);
  const IntegrationConfig cfg = default_integration_config(spec, 0.02);
  MapIntegrator integrator(map, spec, cfg);
  aotest::integrate_scene(integrator, aotest::wall_scene(2.0, kCamera, 10), spec);

  const Mesh mesh = extract_mesh(map);
  REQUIRE(mesh.vertices.size() > 100);

  double sq_sum = 0.0;
  for (const auto& v : mesh.vertices) {
    const double d = v.position.z() - 2.0;  // point-to-plane distance
    sq_sum += d * d;
    CHECK(v.scale == 0);
  }
  const double rms = std::sqrt(sq_sum / mesh.vertices.size());
  CHECK(rms <= 0.5 * map.resolution());
}

TEST_CASE("a free-only map has no surface") {
  OccupancyOctree map(0.05, 6, Eigen::Vector3d::Zero());
  Node* node = map.allocate_path(Eigen::Vector3i(0, 0, 0), 1);
  node->data = OccupancyState{-5.0, 20};
  node->meta.is_leaf_data = true;
  VoxelBlock* block = map.allocate_block(Eigen::Vector3i(40, 40, 40));
  block->current_scale = 0;
  block->allocate_from_scale(0);
  for (auto& c : block->cells[0]) c = OccupancyState{-3.0, 10};
  std::vector<VoxelBlock*> blocks{block};
  map.up_propagate(blocks);

  const Mesh mesh = extract_mesh(map);
  CHECK(mesh.vertices.empty());
  CHECK(mesh.triangles.empty());
}

TEST_CASE("a sphere meshes within the surface thickness bound") {
  OccupancyOctree map(0.02, 7, Eigen::Vector3d::Zero());
  const SensorSpec spec = aotest::small_sensor(0.02);
  const IntegrationConfig cfg = default_integration_config(spec, 0.02);
  MapIntegrator integrator(map, spec, cfg);

  SyntheticScene scene;
  const Eigen::Vector3d center(1.28, 1.28, 1.6);
  scene.primitives.push_back(Primitive::sphere(center, 0.35));
  Keyframe kf;
  kf.position = kCamera;
  scene.keyframes.push_back(kf);
  scene.frame_count = 10;
  aotest::integrate_scene(integrator, scene, spec);

  const Mesh mesh = extract_mesh(map);
  REQUIRE(mesh.vertices.size() > 0);
  for (const auto& v : mesh.vertices) {
    const double d = std::abs((v.position.cast<double>() - center).norm() - 0.35);
    REQUIRE(d <= spec.tau_max);
  }
}

TEST_CASE("triangles share edges consistently within a block") {
  OccupancyOctree map(0.02, 7, Eigen::Vector3d::Zero());
  const SensorSpec spec = aotest::small_sensor(0.02);
  const IntegrationConfig cfg = default_integration_config(spec, 0.02);
  MapIntegrator integrator(map, spec, cfg);
  aotest::integrate_scene(integrator, aotest::wall_scene(2.0, kCamera, 5), spec);
  const Mesh mesh = extract_mesh(map);
  REQUIRE_FALSE(mesh.triangles.empty());

  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_count;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = t[e], b = t[(e + 1) % 3];
      if (b < a) std::swap(a, b);
      REQUIRE(a != b);  // no degenerate edges
      ++edge_count[{a, b}];
    }
  }
  for (const auto& [edge, count] : edge_count) {
    REQUIRE(count <= 2);  // manifold inside, open at block borders
  }
}

TEST_CASE("mesh files are written") {
  OccupancyOctree map(0.02, 7, Eigen::Vector3d::Zero());
  const SensorSpec spec = aotest::small_sensor(0.02);
  MapIntegrator integrator(map, spec, default_integration_config(spec, 0.02));
  aotest::integrate_scene(integrator, aotest::wall_scene(2.0, kCamera, 3), spec);
  const Mesh mesh = extract_mesh(map);

  const std::string ply = std::string(std::getenv("TMPDIR") ? std::getenv("TMPDIR") : "/tmp") +
                          "/aomap_test_mesh.ply";
  write_ply(mesh, ply);
  std::ifstream in(ply, std::ios::binary);
  REQUIRE(in.good());
  std::string header;
  std::getline(in, header);
  CHECK(header == "ply");
}
