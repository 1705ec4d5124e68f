// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_TESTS_HELPERS_HPP
#define AOMAP_TESTS_HELPERS_HPP

#include <random>

#include "aomap/aomap.hpp"

namespace aotest {

// Desk-scale setup shared by the pipeline tests: a 2.56 m cube at 2 cm with a
// QQVGA-ish synthetic depth camera whose scale-0 range covers the whole map.
inline aomap::SensorSpec small_sensor(double v_res = 0.02) {
  aomap::SensorSpec spec;
  spec.width = 160;
  spec.height = 120;
  spec.fx = 100.0;
  spec.fy = 100.0;
  spec.cx = 79.5;
  spec.cy = 59.5;
  spec.noise_model = aomap::NoiseModel::kLinear;
  spec.noise_coeff = 0.05;
  spec.sigma_min = v_res;
  spec.sigma_max = 3.0 * v_res;
  spec.tau_min = 3.0 * v_res;
  spec.tau_max = 12.0 * v_res;
  return spec;
}

inline aomap::SyntheticScene wall_scene(double wall_z, const Eigen::Vector3d& camera,
                                        int frames = 20) {
  aomap::SyntheticScene scene;
  scene.primitives.push_back(aomap::Primitive::plane({0.0, 0.0, -1.0}, -wall_z));
  aomap::Keyframe kf;
  kf.position = camera;
  scene.keyframes.push_back(kf);
  scene.frame_count = frames;
  return scene;
}

inline aomap::SyntheticScene wall_pole_scene(double wall_z, double pole_z, double pole_radius,
                                             const Eigen::Vector3d& camera, int frames = 20) {
  aomap::SyntheticScene scene = wall_scene(wall_z, camera, frames);
  scene.primitives.push_back(aomap::Primitive::cylinder({camera.x(), 0.0, pole_z},
                                                        {camera.x(), 3.0, pole_z}, pole_radius));
  return scene;
}

inline void integrate_scene(aomap::MapIntegrator& integrator, const aomap::SyntheticScene& scene,
                            const aomap::SensorSpec& spec) {
  for (int i = 0; i < scene.frame_count; ++i) integrator.integrate(scene.frame(i, spec));
}

// Brute-force ray marcher used as the raycast oracle: steps half a voxel and
// stops at the first occupied cell; unknown space is opaque (no hit).
inline std::optional<double> march_ray(const aomap::OccupancyOctree& map,
                                       const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                       double max_range) {
  const double step = 0.5 * map.resolution();
  for (double t = step; t < max_range; t += step) {
    const Eigen::Vector3d p = origin + t * dir;
    if (!map.contains(p)) return std::nullopt;
    const auto c = aomap::classify_point(map, p);
    if (c.cls == aomap::PointClass::kOccupied) return t;
    if (c.cls == aomap::PointClass::kUnknown) return std::nullopt;
  }
  return std::nullopt;
}

// Brute-force pooling record: min/max over the clipped (2^f+1)^2 window.
inline aomap::PoolingPyramid::Record brute_force_record(const aomap::Image<float>& image, int f,
                                                        int u, int v, double z_np, double z_fp) {
  aomap::PoolingPyramid::Record r;
  const int half = 1 << (f - 1);
  r.touches_boundary = u - half < 0 || v - half < 0 || u + half > image.width() - 1 ||
                       v + half > image.height() - 1;
  for (int dv = -half; dv <= half; ++dv) {
    for (int du = -half; du <= half; ++du) {
      const int uu = u + du;
      const int vv = v + dv;
      if (uu < 0 || uu >= image.width() || vv < 0 || vv >= image.height()) continue;
      const float d = image(uu, vv);
      if (!aomap::valid_depth(d, z_np, z_fp)) {
        r.contains_invalid = true;
      } else {
        r.z_min = std::min(r.z_min, d);
        r.z_max = std::max(r.z_max, d);
      }
    }
  }
  return r;
}

inline aomap::Image<float> random_depth_image(std::mt19937& rng, int width, int height,
                                              double invalid_fraction = 0.05) {
  std::uniform_real_distribution<float> depth(0.5f, 5.5f);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  aomap::Image<float> image(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const double c = coin(rng);
      if (c < invalid_fraction / 3) {
        image(u, v) = 0.0f;
      } else if (c < 2 * invalid_fraction / 3) {
        image(u, v) = std::numeric_limits<float>::quiet_NaN();
      } else if (c < invalid_fraction) {
        image(u, v) = 9.0f;  // beyond the far plane
      } else {
        image(u, v) = depth(rng);
      }
    }
  }
  return image;
}

}  // namespace aotest

#endif  // AOMAP_TESTS_HELPERS_HPP
