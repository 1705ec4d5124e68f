// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_SENSOR_SENSOR_HPP
#define AOMAP_SENSOR_SENSOR_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace aomap {

enum class NoiseModel { kLinear, kQuadratic };

/**
 * Pinhole camera description plus the depth-dependent noise sigma(z) and
 * surface-thickness tau(z) models and the log-odds bounds used during fusion.
 */
struct SensorSpec {
  int width = 320;
  int height = 240;
  double fx = 250.0;
  double fy = 250.0;
  double cx = 159.5;
  double cy = 119.5;

  double z_np = 0.4;   // near plane [m]
  double z_fp = 6.0;   // far plane [m]

  NoiseModel noise_model = NoiseModel::kQuadratic;
  double noise_coeff = 0.0025;  // sigma(z) = k*z (linear) or k*z^2 (quadratic)
  double sigma_min = 0.01;
  double sigma_max = 0.03;

  double tau_coeff = 0.05;  // tau(z) = tau_coeff * z
  double tau_min = 0.03;
  double tau_max = 0.12;

  double l_min_iter = -5.015;   // per-measurement log-odds floor
  double l_min_total = -100.0;  // accumulated log-odds floor

  /** Mean focal length; the scale-selection constant. */
  double focal() const { return 0.5 * (fx + fy); }

  double sigma(double z) const {
    const double raw = noise_model == NoiseModel::kQuadratic ? noise_coeff * z * z : noise_coeff * z;
    return std::clamp(raw, sigma_min, sigma_max);
  }

  double tau(double z) const { return std::clamp(tau_coeff * z, tau_min, tau_max); }

  /**
   * Intrinsics for a downsampled image (factor in (0, 1]); pixel centre
   * convention keeps cx' = (cx + 0.5) * f - 0.5.
   */
  SensorSpec scaled(double factor) const {
    SensorSpec s = *this;
    s.width = static_cast<int>(std::lround(width * factor));
    s.height = static_cast<int>(std::lround(height * factor));
    s.fx = fx * factor;
    s.fy = fy * factor;
    s.cx = (cx + 0.5) * factor - 0.5;
    s.cy = (cy + 0.5) * factor - 0.5;
    return s;
  }

  void validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("sensor: empty image plane");
    if (fx <= 0.0 || fy <= 0.0) throw std::invalid_argument("sensor: non-positive focal length");
    if (!(0.0 < z_np && z_np < z_fp)) throw std::invalid_argument("sensor: need 0 < z_np < z_fp");
    if (sigma_min > sigma_max) throw std::invalid_argument("sensor: sigma_min > sigma_max");
    if (tau_min > tau_max) throw std::invalid_argument("sensor: tau_min > tau_max");
    if (!(l_min_iter < 0.0)) throw std::invalid_argument("sensor: l_min_iter must be negative");
    if (!(l_min_total < l_min_iter)) throw std::invalid_argument("sensor: need l_min_total < l_min_iter");
    // Spans of the inverse model are computed from corner evaluations, which
    // requires the noise to grow slower than range: d(3*sigma)/dz < 1.
    const double slope = noise_model == NoiseModel::kQuadratic
                             ? 2.0 * std::sqrt(std::max(noise_coeff, 0.0) * sigma_max)
                             : noise_coeff;
    if (3.0 * slope >= 1.0) throw std::invalid_argument("sensor: noise model grows too fast");
  }
};

/** Rigid transform T_WC mapping camera-frame points into the world frame. */
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose from_quaternion(const Eigen::Vector3d& t, const Eigen::Quaterniond& q) {
    Pose p;
    p.rotation = q.normalized().toRotationMatrix();
    p.translation = t;
    return p;
  }

  Eigen::Vector3d to_world(const Eigen::Vector3d& p_C) const { return rotation * p_C + translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_W) const {
    return rotation.transpose() * (p_W - translation);
  }

  bool orthonormal(double tol = 1e-6) const {
    return (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).norm() < tol &&
           std::abs(rotation.determinant() - 1.0) < tol;
  }
};

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // camera-frame z of the point
};

/**
 * Project a world point into the image. Returns nothing when the point is
 * behind the camera, outside [z_np, z_fp] or does not fall on a pixel.
 */
inline std::optional<PixelDepth> project(const Pose& T_WC, const SensorSpec& spec,
                                         const Eigen::Vector3d& point_W) {
  const Eigen::Vector3d p_C = T_WC.to_camera(point_W);
  if (p_C.z() <= 0.0) return std::nullopt;
  if (p_C.z() < spec.z_np || p_C.z() > spec.z_fp) return std::nullopt;
  const double u = spec.cx + spec.fx * p_C.x() / p_C.z();
  const double v = spec.cy + spec.fy * p_C.y() / p_C.z();
  if (u < -0.5 || u >= spec.width - 0.5 || v < -0.5 || v >= spec.height - 0.5) return std::nullopt;
  return PixelDepth{u, v, p_C.z()};
}

}  // namespace aomap

#endif  // AOMAP_SENSOR_SENSOR_HPP
