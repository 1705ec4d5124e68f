// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_IO_CONFIG_HPP
#define AOMAP_IO_CONFIG_HPP

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "aomap/integrator/integrator.hpp"
#include "aomap/sensor/sensor.hpp"

namespace aomap {

/** Everything the pipeline needs, loadable from a flat key-value file. */
struct MapConfig {
  double v_res = 0.02;
  int map_depth = 8;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  SensorSpec sensor;
  IntegrationConfig integration;
  double association_tolerance_s = 0.02;

  void validate() const {
    sensor.validate();
    integration.validate();
    if (v_res <= 0.0) throw std::invalid_argument("config: map.resolution must be positive");
    if (map_depth < 4 || map_depth > 21)
      throw std::invalid_argument("config: map.depth out of range [4, 21]");
  }
};

namespace config_detail {

struct RawConfig {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  template <typename F>
  void apply(const std::string& key, F&& f) const {
    if (const auto it = values.find(key); it != values.end()) f(it->second, lines.at(key));
  }
};

inline double to_double(const std::string& s, const std::string& key, int line) {
  std::istringstream ss(s);
  double v;
  if (!(ss >> v) || !(ss >> std::ws).eof())
    throw std::runtime_error("config:" + std::to_string(line) + ": key '" + key +
                             "' expects a number");
  return v;
}

inline int to_int(const std::string& s, const std::string& key, int line) {
  const double v = to_double(s, key, line);
  if (v != std::floor(v))
    throw std::runtime_error("config:" + std::to_string(line) + ": key '" + key +
                             "' expects an integer");
  return static_cast<int>(v);
}

inline Eigen::Vector3d to_vec3(const std::string& s, const std::string& key, int line) {
  std::istringstream ss(s);
  Eigen::Vector3d v;
  if (!(ss >> v.x() >> v.y() >> v.z()) || !(ss >> std::ws).eof())
    throw std::runtime_error("config:" + std::to_string(line) + ": key '" + key +
                             "' expects three numbers");
  return v;
}

}  // namespace config_detail

/**
 * Parse the flat "key = value" format: '#' starts a comment, values are
 * numbers, triples or bare words. Unknown and duplicate keys are errors so
 * that typos in safety-critical parameters cannot pass silently. Parameters
 * not given explicitly are derived from the map resolution and image size.
 */
inline MapConfig parse_config(std::istream& in) {
  using namespace config_detail;
  static const std::array<const char*, 27> kKnownKeys = {
      "map.resolution",       "map.depth",
      "map.origin",           "sensor.preset",
      "sensor.width",         "sensor.height",
      "sensor.fx",            "sensor.fy",
      "sensor.cx",            "sensor.cy",
      "sensor.near_plane",    "sensor.far_plane",
      "sensor.noise_model",   "sensor.noise_coeff",
      "sensor.sigma_min",     "sensor.sigma_max",
      "sensor.tau_coeff",     "sensor.tau_min",
      "sensor.tau_max",       "sensor.l_min_iter",
      "sensor.l_min_total",   "integration.epsilon",
      "integration.frontier_scale", "integration.w_max",
      "integration.hysteresis",
      "integration.stable_frames",  "integration.downsample"};
  static const std::array<const char*, 3> kKnownKeys2 = {
      "integration.pyramid_levels", "integration.prune_threshold", "dataset.association_tolerance"};

  RawConfig raw;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream check(line);
      std::string word;
      if (check >> word)
        throw std::runtime_error("config:" + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool known = false;
    for (const char* k : kKnownKeys) known |= key == k;
    for (const char* k : kKnownKeys2) known |= key == k;
    if (!known)
      throw std::runtime_error("config:" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (raw.has(key))
      throw std::runtime_error("config:" + std::to_string(line_no) + ": duplicate key '" + key +
                               "'");
    if (value.empty())
      throw std::runtime_error("config:" + std::to_string(line_no) + ": empty value for '" + key +
                               "'");
    raw.values[key] = value;
    raw.lines[key] = line_no;
  }

  MapConfig cfg;

  raw.apply("sensor.preset", [&](const std::string& v, int line) {
    if (v == "tum_rgbd") {
      cfg.sensor.width = 640;
      cfg.sensor.height = 480;
      cfg.sensor.fx = 525.0;
      cfg.sensor.fy = 525.0;
      cfg.sensor.cx = 319.5;
      cfg.sensor.cy = 239.5;
      cfg.sensor.noise_model = NoiseModel::kQuadratic;
      cfg.sensor.noise_coeff = 0.0025;
    } else if (v == "synthetic") {
      cfg.sensor.noise_model = NoiseModel::kLinear;
      cfg.sensor.noise_coeff = 0.05;
    } else {
      throw std::runtime_error("config:" + std::to_string(line) +
                               ": sensor.preset must be tum_rgbd or synthetic");
    }
  });

  raw.apply("map.resolution", [&](const std::string& v, int l) { cfg.v_res = to_double(v, "map.resolution", l); });
  raw.apply("map.depth", [&](const std::string& v, int l) { cfg.map_depth = to_int(v, "map.depth", l); });
  raw.apply("map.origin", [&](const std::string& v, int l) { cfg.origin = to_vec3(v, "map.origin", l); });

  raw.apply("sensor.width", [&](const std::string& v, int l) { cfg.sensor.width = to_int(v, "sensor.width", l); });
  raw.apply("sensor.height", [&](const std::string& v, int l) { cfg.sensor.height = to_int(v, "sensor.height", l); });
  raw.apply("sensor.fx", [&](const std::string& v, int l) { cfg.sensor.fx = to_double(v, "sensor.fx", l); });
  raw.apply("sensor.fy", [&](const std::string& v, int l) { cfg.sensor.fy = to_double(v, "sensor.fy", l); });
  raw.apply("sensor.cx", [&](const std::string& v, int l) { cfg.sensor.cx = to_double(v, "sensor.cx", l); });
  raw.apply("sensor.cy", [&](const std::string& v, int l) { cfg.sensor.cy = to_double(v, "sensor.cy", l); });
  raw.apply("sensor.near_plane", [&](const std::string& v, int l) { cfg.sensor.z_np = to_double(v, "sensor.near_plane", l); });
  raw.apply("sensor.far_plane", [&](const std::string& v, int l) { cfg.sensor.z_fp = to_double(v, "sensor.far_plane", l); });
  raw.apply("sensor.noise_model", [&](const std::string& v, int line) {
    if (v == "linear") {
      cfg.sensor.noise_model = NoiseModel::kLinear;
    } else if (v == "quadratic") {
      cfg.sensor.noise_model = NoiseModel::kQuadratic;
    } else {
      throw std::runtime_error("config:" + std::to_string(line) +
                               ": sensor.noise_model must be linear or quadratic");
    }
  });
  raw.apply("sensor.noise_coeff", [&](const std::string& v, int l) { cfg.sensor.noise_coeff = to_double(v, "sensor.noise_coeff", l); });
  raw.apply("sensor.l_min_iter", [&](const std::string& v, int l) { cfg.sensor.l_min_iter = to_double(v, "sensor.l_min_iter", l); });
  raw.apply("sensor.l_min_total", [&](const std::string& v, int l) { cfg.sensor.l_min_total = to_double(v, "sensor.l_min_total", l); });

  // Resolution-derived defaults, individually overridable.
  cfg.sensor.sigma_min = cfg.v_res;
  cfg.sensor.sigma_max = 3.0 * cfg.v_res;
  cfg.sensor.tau_min = 3.0 * cfg.v_res;
  cfg.sensor.tau_max = 12.0 * cfg.v_res;
  raw.apply("sensor.sigma_min", [&](const std::string& v, int l) { cfg.sensor.sigma_min = to_double(v, "sensor.sigma_min", l); });
  raw.apply("sensor.sigma_max", [&](const std::string& v, int l) { cfg.sensor.sigma_max = to_double(v, "sensor.sigma_max", l); });
  raw.apply("sensor.tau_coeff", [&](const std::string& v, int l) { cfg.sensor.tau_coeff = to_double(v, "sensor.tau_coeff", l); });
  raw.apply("sensor.tau_min", [&](const std::string& v, int l) { cfg.sensor.tau_min = to_double(v, "sensor.tau_min", l); });
  raw.apply("sensor.tau_max", [&](const std::string& v, int l) { cfg.sensor.tau_max = to_double(v, "sensor.tau_max", l); });

  cfg.integration = default_integration_config(cfg.sensor, cfg.v_res);
  raw.apply("integration.epsilon", [&](const std::string& v, int l) { cfg.integration.epsilon = to_double(v, "integration.epsilon", l); });
  raw.apply("integration.frontier_scale", [&](const std::string& v, int l) { cfg.integration.frontier_scale = to_int(v, "integration.frontier_scale", l); });
  raw.apply("integration.w_max", [&](const std::string& v, int l) { cfg.integration.w_max = to_int(v, "integration.w_max", l); });
  raw.apply("integration.hysteresis", [&](const std::string& v, int l) { cfg.integration.hysteresis = to_double(v, "integration.hysteresis", l); });
  raw.apply("integration.stable_frames", [&](const std::string& v, int l) { cfg.integration.stable_frames = to_int(v, "integration.stable_frames", l); });
  raw.apply("integration.downsample", [&](const std::string& v, int l) { cfg.integration.downsample = to_double(v, "integration.downsample", l); });
  raw.apply("integration.pyramid_levels", [&](const std::string& v, int l) { cfg.integration.pyramid_levels = to_int(v, "integration.pyramid_levels", l); });
  raw.apply("integration.prune_threshold", [&](const std::string& v, int l) { cfg.integration.prune_threshold = to_double(v, "integration.prune_threshold", l); });
  raw.apply("dataset.association_tolerance", [&](const std::string& v, int l) { cfg.association_tolerance_s = to_double(v, "dataset.association_tolerance", l); });

  cfg.validate();
  return cfg;
}

inline MapConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  return parse_config(in);
}

/** Defaults for the given image class and resolution with no file at all. */
inline MapConfig default_map_config(double v_res = 0.02, int width = 320, int height = 240) {
  MapConfig cfg;
  cfg.v_res = v_res;
  cfg.sensor.width = width;
  cfg.sensor.height = height;
  cfg.sensor.sigma_min = v_res;
  cfg.sensor.sigma_max = 3.0 * v_res;
  cfg.sensor.tau_min = 3.0 * v_res;
  cfg.sensor.tau_max = 12.0 * v_res;
  cfg.integration = default_integration_config(cfg.sensor, v_res);
  return cfg;
}

}  // namespace aomap

#endif  // AOMAP_IO_CONFIG_HPP
