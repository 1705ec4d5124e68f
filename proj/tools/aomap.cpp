// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: dataset replay into a map file, slice/mesh/render
// inspection and the corridor-check service used by external planners.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "aomap/aomap.hpp"
#include "aomap/io/png_io.hpp"

namespace {

using nlohmann::json;

int run_integrate(const std::string& config_path, const std::string& input,
                  const std::string& output, const std::string& stats_path, double downsample) {
  aomap::MapConfig cfg =
      config_path.empty() ? aomap::default_map_config() : aomap::load_config(config_path);
  if (downsample > 0.0) cfg.integration.downsample = downsample;
  cfg.validate();

  aomap::OccupancyOctree map(cfg.v_res, cfg.map_depth, cfg.origin);
  aomap::MapIntegrator integrator(map, cfg.sensor, cfg.integration);

  std::ofstream stats_out;
  if (!stats_path.empty()) {
    stats_out.open(stats_path);
    if (!stats_out) throw std::runtime_error("cannot open stats file '" + stats_path + "'");
    stats_out << aomap::IntegrationStats::csv_header() << '\n';
  }

  std::size_t frames = 0;
  const auto handle = [&](const aomap::FrameInput& frame) {
    const auto stats = integrator.integrate(frame);
    if (stats_out.is_open()) stats_out << stats.csv_row() << '\n';
    ++frames;
  };

  if (std::filesystem::is_directory(input)) {
    const auto seq = aomap::load_tum_sequence(input, cfg.association_tolerance_s);
    if (seq.dropped_frames() > 0) {
      std::cerr << "warning: dropped " << seq.dropped_frames()
                << " frames without a pose within tolerance\n";
    }
    for (std::size_t i = 0; i < seq.size(); ++i) handle(seq.frame(i));
  } else {
    const auto scene = aomap::load_scene_file(input);
    for (int i = 0; i < scene.frame_count; ++i) handle(scene.frame(i, cfg.sensor));
  }

  aomap::save_map(map, output);
  const auto stats = map.stats();
  std::cout << "integrated " << frames << " frames: " << stats.blocks << " blocks, "
            << stats.leaf_data_nodes << " data nodes, " << stats.data_cells << " cells, "
            << stats.memory_bytes << " bytes\n";
  return 0;
}

int run_slice(const std::string& map_path, const std::string& axis, double coord,
              const std::string& out_path) {
  const aomap::OccupancyOctree map = aomap::load_map(map_path);
  int a2 = 2;
  if (axis == "x") {
    a2 = 0;
  } else if (axis == "y") {
    a2 = 1;
  } else if (axis != "z") {
    throw std::runtime_error("slice axis must be x, y or z");
  }
  const int a0 = (a2 + 1) % 3;
  const int a1 = (a2 + 2) % 3;
  const int n = map.size_voxels();
  const double v = map.resolution();

  aomap::Image<aomap::Rgb8> image(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      Eigen::Vector3d p;
      p[a0] = map.origin()[a0] + (i + 0.5) * v;
      p[a1] = map.origin()[a1] + (j + 0.5) * v;
      p[a2] = coord;
      aomap::Rgb8 rgb{128, 128, 128};  // unknown
      if (map.contains(p)) {
        const auto cell = map.lowest_cell_at(p);
        const auto cls = aomap::classify_state(cell.state);
        if (cls == aomap::PointClass::kOccupied) {
          rgb = {200, 30, 30};
        } else if (cls == aomap::PointClass::kFree) {
          // blue gradient, darker the more confidently free (display-normalised to -100)
          const double frac = std::clamp(-cell.state.log_odds() / 100.0, 0.05, 1.0);
          const auto ch = static_cast<std::uint8_t>(230 - 180 * frac);
          rgb = {ch, ch, 255};
        }
        // allocated-cell boundaries
        const double dx = p[a0] - cell.bounds.lo[a0];
        const double dy = p[a1] - cell.bounds.lo[a1];
        if (dx < v || dy < v) {
          rgb = {static_cast<std::uint8_t>(rgb[0] / 2), static_cast<std::uint8_t>(rgb[1] / 2),
                 static_cast<std::uint8_t>(rgb[2] / 2)};
        }
      }
      image(i, n - 1 - j) = rgb;
    }
  }
  aomap::write_png_rgb8(image, out_path);
  std::cout << "wrote " << out_path << " (" << n << "x" << n << ")\n";
  return 0;
}

int run_mesh(const std::string& map_path, const std::string& out_path) {
  const aomap::OccupancyOctree map = aomap::load_map(map_path);
  const aomap::Mesh mesh = aomap::extract_mesh(map);
  if (out_path.size() >= 4 && out_path.substr(out_path.size() - 4) == ".obj") {
    aomap::write_obj(mesh, out_path);
  } else {
    aomap::write_ply(mesh, out_path);
  }
  std::cout << "wrote " << out_path << ": " << mesh.vertices.size() << " vertices, "
            << mesh.triangles.size() << " triangles\n";
  return 0;
}

int run_render(const std::string& map_path, const std::vector<double>& pose_values,
               const std::string& out_path, const std::string& normals_path,
               const std::string& config_path) {
  if (pose_values.size() != 7)
    throw std::runtime_error("render pose expects 7 numbers: tx ty tz qx qy qz qw");
  const aomap::OccupancyOctree map = aomap::load_map(map_path);
  const aomap::MapConfig cfg =
      config_path.empty() ? aomap::default_map_config(map.resolution()) : aomap::load_config(config_path);
  const aomap::SensorSpec& spec = cfg.sensor;
  const aomap::Pose pose = aomap::Pose::from_quaternion(
      Eigen::Vector3d(pose_values[0], pose_values[1], pose_values[2]),
      Eigen::Quaterniond(pose_values[6], pose_values[3], pose_values[4], pose_values[5]));

  aomap::Image<std::uint16_t> depth(spec.width, spec.height, 0);
  aomap::Image<Eigen::Vector3d> points(spec.width, spec.height, Eigen::Vector3d::Zero());
  for (int v = 0; v < spec.height; ++v) {
    for (int u = 0; u < spec.width; ++u) {
      const Eigen::Vector3d dir_C((u - spec.cx) / spec.fx, (v - spec.cy) / spec.fy, 1.0);
      const Eigen::Vector3d dir_W = (pose.rotation * dir_C).normalized();
      const auto hit = aomap::raycast(map, pose.translation, dir_W, 1.5 * spec.z_fp);
      if (!hit) continue;
      const double z = pose.to_camera(hit->point).z();
      depth(u, v) = static_cast<std::uint16_t>(
          std::clamp(z * 5000.0, 0.0, 65535.0));
      points(u, v) = hit->point;
    }
  }
  aomap::write_png_gray16(depth, out_path);
  std::cout << "wrote " << out_path << "\n";

  if (!normals_path.empty()) {
    aomap::Image<aomap::Rgb8> normals(spec.width, spec.height, aomap::Rgb8{0, 0, 0});
    for (int v = 1; v + 1 < spec.height; ++v) {
      for (int u = 1; u + 1 < spec.width; ++u) {
        if (depth(u, v) == 0 || depth(u + 1, v) == 0 || depth(u - 1, v) == 0 ||
            depth(u, v + 1) == 0 || depth(u, v - 1) == 0)
          continue;
        const Eigen::Vector3d du = points(u + 1, v) - points(u - 1, v);
        const Eigen::Vector3d dv = points(u, v + 1) - points(u, v - 1);
        Eigen::Vector3d n = du.cross(dv).normalized();
        if (pose.to_camera(points(u, v)).normalized().dot(pose.rotation.transpose() * n) > 0.0)
          n = -n;
        normals(u, v) = {static_cast<std::uint8_t>(127.5 * (n.x() + 1.0)),
                         static_cast<std::uint8_t>(127.5 * (n.y() + 1.0)),
                         static_cast<std::uint8_t>(127.5 * (n.z() + 1.0))};
      }
    }
    aomap::write_png_rgb8(normals, normals_path);
    std::cout << "wrote " << normals_path << "\n";
  }
  return 0;
}

int run_check(const std::string& map_path, bool unknown_unsafe) {
  const aomap::OccupancyOctree map = aomap::load_map(map_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(std::cin, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json request;
    try {
      request = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("stdin:" + std::to_string(line_no) + ": bad JSON: " + e.what());
    }
    if (!request.contains("start") || !request.contains("end") || !request.contains("radius"))
      throw std::runtime_error("stdin:" + std::to_string(line_no) +
                               ": request needs start, end, radius");
    aomap::CorridorSegment segment;
    for (int a = 0; a < 3; ++a) {
      segment.start[a] = request["start"].at(a).get<double>();
      segment.end[a] = request["end"].at(a).get<double>();
    }
    segment.radius = request["radius"].get<double>();
    if (segment.radius <= 0.0)
      throw std::runtime_error("stdin:" + std::to_string(line_no) + ": radius must be positive");

    const auto result = aomap::check_segment(map, segment, unknown_unsafe);
    const char* verdict = result.verdict == aomap::Verdict::kSafe
                              ? "safe"
                              : result.verdict == aomap::Verdict::kUnsafe ? "unsafe" : "unobserved";
    json out;
    out["verdict"] = verdict;
    out["checks"] = result.visits;
    std::cout << out.dump() << '\n';
  }
  return 0;
}

int run_stats(const std::string& map_path) {
  const aomap::OccupancyOctree map = aomap::load_map(map_path);
  const auto s = map.stats();
  std::cout << "resolution_m " << map.resolution() << "\n"
            << "depth " << map.depth() << "\n"
            << "edge_m " << map.edge_length() << "\n"
            << "nodes " << s.nodes << "\n"
            << "leaf_data_nodes " << s.leaf_data_nodes << "\n"
            << "blocks " << s.blocks << "\n";
  for (int sc = 0; sc <= aomap::VoxelBlock::kMaxScale; ++sc) {
    std::cout << "blocks_at_scale_" << sc << " " << s.blocks_at_scale[sc] << "\n";
  }
  std::cout << "block_cells " << s.block_cells << "\n"
            << "transition_cells " << s.transition_cells << "\n"
            << "data_cells " << s.data_cells << "\n";
  for (std::size_t level = 0; level < s.nodes_per_level.size(); ++level) {
    std::cout << "entities_at_level_" << level << " " << s.nodes_per_level[level] << "\n";
  }
  std::cout << "memory_bytes " << s.memory_bytes << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive-resolution occupancy mapping"};
  app.require_subcommand(1);

  std::string config_path, input, output, stats_path, map_path, out_path, normals_path;
  std::string axis = "z";
  double coord = 0.0;
  double downsample = 0.0;
  bool unknown_unsafe = false;
  std::vector<double> pose_values;

  auto* integrate = app.add_subcommand("integrate", "fuse a dataset into a map file");
  integrate->add_option("--config", config_path, "configuration file");
  integrate->add_option("--input", input, "TUM directory or scene file")->required();
  integrate->add_option("--output", output, "output map file")->required();
  integrate->add_option("--stats", stats_path, "per-frame statistics CSV");
  integrate->add_option("--downsample", downsample, "input downsample factor (0.5)");

  auto* slice = app.add_subcommand("slice", "colour-coded occupancy slice image");
  slice->add_option("--map", map_path, "map file")->required();
  slice->add_option("--axis", axis, "slice axis: x, y or z");
  slice->add_option("--coord", coord, "slice coordinate in metres")->required();
  slice->add_option("--out", out_path, "output PNG")->required();

  auto* mesh = app.add_subcommand("mesh", "extract the occupancy iso-surface");
  mesh->add_option("--map", map_path, "map file")->required();
  mesh->add_option("--out", out_path, "output mesh (.ply or .obj)")->required();

  auto* render = app.add_subcommand("render", "raycast a depth image from a pose");
  render->add_option("--map", map_path, "map file")->required();
  render->add_option("--pose", pose_values, "tx ty tz qx qy qz qw")->expected(7)->required();
  render->add_option("--out", out_path, "output 16-bit depth PNG")->required();
  render->add_option("--normals", normals_path, "optional normal map PNG");
  render->add_option("--config", config_path, "configuration file for intrinsics");

  auto* check = app.add_subcommand("check", "corridor checks: JSON lines stdin -> stdout");
  check->add_option("--map", map_path, "map file")->required();
  check->add_flag("--unknown-unsafe", unknown_unsafe, "treat unobserved space as unsafe");

  auto* stats = app.add_subcommand("stats", "print map structure statistics");
  stats->add_option("--map", map_path, "map file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (integrate->parsed())
      return run_integrate(config_path, input, output, stats_path, downsample);
    if (slice->parsed()) return run_slice(map_path, axis, coord, out_path);
    if (mesh->parsed()) return run_mesh(map_path, out_path);
    if (render->parsed())
      return run_render(map_path, pose_values, out_path, normals_path, config_path);
    if (check->parsed()) return run_check(map_path, unknown_unsafe);
    if (stats->parsed()) return run_stats(map_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
