// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_IO_SCENE_HPP
#define AOMAP_IO_SCENE_HPP

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aomap/core/frame.hpp"
#include "aomap/core/image.hpp"
#include "aomap/sensor/sensor.hpp"

namespace aomap {

/**
 * Analytic scene primitive with an exact signed distance (negative inside)
 * and an exact ray intersection, so rendered depth and ground truth cannot
 * disagree.
 */
struct Primitive {
  enum class Kind { kPlane, kSphere, kBox, kCylinder };

  Kind kind = Kind::kPlane;
  // plane: n * p = offset, occupied on the side opposite the normal
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
  // sphere / cylinder
  Eigen::Vector3d a = Eigen::Vector3d::Zero();  // sphere centre / cylinder end
  Eigen::Vector3d b = Eigen::Vector3d::Zero();  // cylinder other end
  double radius = 0.0;
  // box
  Eigen::Vector3d box_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d box_max = Eigen::Vector3d::Zero();

  static Primitive plane(const Eigen::Vector3d& n, double offset_m) {
    Primitive p;
    p.kind = Kind::kPlane;
    p.normal = n.normalized();
    p.offset = offset_m;
    return p;
  }
  static Primitive sphere(const Eigen::Vector3d& c, double r) {
    Primitive p;
    p.kind = Kind::kSphere;
    p.a = c;
    p.radius = r;
    return p;
  }
  static Primitive box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    Primitive p;
    p.kind = Kind::kBox;
    p.box_min = lo;
    p.box_max = hi;
    return p;
  }
  static Primitive cylinder(const Eigen::Vector3d& end_a, const Eigen::Vector3d& end_b, double r) {
    Primitive p;
    p.kind = Kind::kCylinder;
    p.a = end_a;
    p.b = end_b;
    p.radius = r;
    return p;
  }

  double sdf(const Eigen::Vector3d& p) const {
    switch (kind) {
      case Kind::kPlane:
        return normal.dot(p) - offset;
      case Kind::kSphere:
        return (p - a).norm() - radius;
      case Kind::kBox: {
        const Eigen::Vector3d c = 0.5 * (box_min + box_max);
        const Eigen::Vector3d h = 0.5 * (box_max - box_min);
        const Eigen::Vector3d q = (p - c).cwiseAbs() - h;
        const Eigen::Vector3d q_pos = q.cwiseMax(0.0);
        return q_pos.norm() + std::min(q.maxCoeff(), 0.0);
      }
      case Kind::kCylinder: {
        const Eigen::Vector3d ba = b - a;
        const double len = ba.norm();
        const Eigen::Vector3d axis = ba / len;
        const Eigen::Vector3d pa = p - a;
        const double y = pa.dot(axis);
        const double rho = (pa - y * axis).norm();
        const double dx = rho - radius;
        const double dy = std::max(-y, y - len);
        return std::min(std::max(dx, dy), 0.0) +
               std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
      }
    }
    return std::numeric_limits<double>::infinity();
  }

  /** Smallest t >= 0 with origin + t*dir on the surface. */
  std::optional<double> intersect(const Eigen::Vector3d& o, const Eigen::Vector3d& d) const {
    switch (kind) {
      case Kind::kPlane: {
        const double denom = normal.dot(d);
        if (denom == 0.0) return std::nullopt;
        const double t = (offset - normal.dot(o)) / denom;
        if (t < 0.0) return std::nullopt;
        return t;
      }
      case Kind::kSphere:
        return intersect_sphere(o, d, a, radius);
      case Kind::kBox: {
        double t0 = -std::numeric_limits<double>::infinity();
        double t1 = std::numeric_limits<double>::infinity();
        for (int axis = 0; axis < 3; ++axis) {
          if (d[axis] == 0.0) {
            if (o[axis] < box_min[axis] || o[axis] > box_max[axis]) return std::nullopt;
            continue;
          }
          double ta = (box_min[axis] - o[axis]) / d[axis];
          double tb = (box_max[axis] - o[axis]) / d[axis];
          if (ta > tb) std::swap(ta, tb);
          t0 = std::max(t0, ta);
          t1 = std::min(t1, tb);
        }
        if (t1 < t0 || t1 < 0.0) return std::nullopt;
        return std::max(t0, 0.0);
      }
      case Kind::kCylinder:
        return intersect_cylinder(o, d);
    }
    return std::nullopt;
  }

 private:
  static std::optional<double> intersect_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                                const Eigen::Vector3d& c, double r) {
    const Eigen::Vector3d oc = o - c;
    const double qa = d.squaredNorm();
    const double qb = 2.0 * oc.dot(d);
    const double qc = oc.squaredNorm() - r * r;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double t_near = (-qb - sq) / (2.0 * qa);
    const double t_far = (-qb + sq) / (2.0 * qa);
    if (t_near >= 0.0) return t_near;
    if (t_far >= 0.0) return 0.0;  // origin inside
    return std::nullopt;
  }

  std::optional<double> intersect_cylinder(const Eigen::Vector3d& o,
                                           const Eigen::Vector3d& d) const {
    const Eigen::Vector3d ba = b - a;
    const double len = ba.norm();
    const Eigen::Vector3d axis = ba / len;
    std::optional<double> best;

    // lateral surface
    const Eigen::Vector3d oc = o - a;
    const Eigen::Vector3d d_perp = d - d.dot(axis) * axis;
    const Eigen::Vector3d oc_perp = oc - oc.dot(axis) * axis;
    const double qa = d_perp.squaredNorm();
    if (qa > 0.0) {
      const double qb = 2.0 * oc_perp.dot(d_perp);
      const double qc = oc_perp.squaredNorm() - radius * radius;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        for (const double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
          if (t < 0.0) continue;
          const double y = (oc + t * d).dot(axis);
          if (y < 0.0 || y > len) continue;
          if (!best || t < *best) best = t;
        }
      }
    }
    // end caps
    const double d_axis = d.dot(axis);
    if (d_axis != 0.0) {
      for (const double cap : {0.0, len}) {
        const double t = (cap - oc.dot(axis)) / d_axis;
        if (t < 0.0) continue;
        const Eigen::Vector3d q = oc + t * d;
        if ((q - cap * axis).squaredNorm() > radius * radius) continue;
        if (!best || t < *best) best = t;
      }
    }
    return best;
  }
};

struct Keyframe {
  double time = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/**
 * Synthetic sequence: analytic geometry plus an interpolated trajectory.
 * Renders exact z-depth images through per-pixel ray casting; optional
 * additive Gaussian noise follows the sensor's sigma(z) model and is
 * deterministic for a fixed seed.
 */
class SyntheticScene {
 public:
  std::vector<Primitive> primitives;
  std::vector<Keyframe> keyframes;
  int frame_count = 1;
  bool noise = false;
  std::uint32_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(frame_count); }

  /** Exact signed distance to the nearest surface (negative inside geometry). */
  double sdf(const Eigen::Vector3d& p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& prim : primitives) d = std::min(d, prim.sdf(p));
    return d;
  }

  Pose pose(int frame) const {
    if (keyframes.empty()) throw std::invalid_argument("scene: no keyframes");
    if (frame < 0 || frame >= frame_count) throw std::out_of_range("scene: frame out of range");
    if (keyframes.size() == 1 || frame_count == 1) {
      return Pose::from_quaternion(keyframes.front().position, keyframes.front().orientation);
    }
    const double t0 = keyframes.front().time;
    const double t1 = keyframes.back().time;
    const double t = t0 + (t1 - t0) * frame / (frame_count - 1);
    std::size_t k = 0;
    while (k + 2 < keyframes.size() && keyframes[k + 1].time <= t) ++k;
    const Keyframe& lo = keyframes[k];
    const Keyframe& hi = keyframes[k + 1];
    const double span = hi.time - lo.time;
    const double alpha = span > 0.0 ? std::clamp((t - lo.time) / span, 0.0, 1.0) : 0.0;
    Pose p;
    p.translation = (1.0 - alpha) * lo.position + alpha * hi.position;
    p.rotation = lo.orientation.slerp(alpha, hi.orientation).toRotationMatrix();
    return p;
  }

  double timestamp(int frame) const {
    return frame_count > 1 && keyframes.size() > 1
               ? keyframes.front().time +
                     (keyframes.back().time - keyframes.front().time) * frame / (frame_count - 1)
               : 0.0;
  }

  Image<float> render_depth(int frame, const SensorSpec& spec) const {
    const Pose T_WC = pose(frame);
    Image<float> depth(spec.width, spec.height, 0.0f);
    std::mt19937 rng(seed + 0x9e3779b9u * static_cast<std::uint32_t>(frame));
    std::normal_distribution<double> gauss(0.0, 1.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (!noise)
#endif
    for (int v = 0; v < spec.height; ++v) {
      for (int u = 0; u < spec.width; ++u) {
        const Eigen::Vector3d dir_C((u - spec.cx) / spec.fx, (v - spec.cy) / spec.fy, 1.0);
        const Eigen::Vector3d dir_W = T_WC.rotation * dir_C;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& prim : primitives) {
          if (const auto t = prim.intersect(T_WC.translation, dir_W); t && *t < best) best = *t;
        }
        if (!std::isfinite(best)) continue;  // no return -> invalid (0)
        double z = best;  // dir_C.z == 1, so the ray parameter is the z-depth
        if (noise) z += spec.sigma(z) * gauss(rng);
        depth(u, v) = static_cast<float>(z);
      }
    }
    return depth;
  }

  FrameInput frame(int index, const SensorSpec& spec) const {
    return FrameInput{render_depth(index, spec), pose(index), timestamp(index)};
  }
};

/**
 * Parse the versioned scene text format: a header line "aomap-scene 1"
 * followed by primitive, keyframe, frames, noise and seed directives.
 */
inline SyntheticScene load_scene(std::istream& in, const std::string& name = "<scene>") {
  SyntheticScene scene;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  const auto fail = [&](const std::string& msg) {
    throw std::runtime_error(name + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    if (!header_seen) {
      int version = 0;
      if (word != "aomap-scene" || !(ss >> version) || version != 1)
        fail("expected header 'aomap-scene 1'");
      header_seen = true;
      continue;
    }
    const auto need = [&](double& v) {
      if (!(ss >> v)) fail("missing numeric field after '" + word + "'");
    };
    if (word == "plane") {
      Eigen::Vector3d n;
      double off;
      need(n.x()), need(n.y()), need(n.z()), need(off);
      scene.primitives.push_back(Primitive::plane(n, off));
    } else if (word == "sphere") {
      Eigen::Vector3d c;
      double r;
      need(c.x()), need(c.y()), need(c.z()), need(r);
      scene.primitives.push_back(Primitive::sphere(c, r));
    } else if (word == "box") {
      Eigen::Vector3d lo, hi;
      need(lo.x()), need(lo.y()), need(lo.z()), need(hi.x()), need(hi.y()), need(hi.z());
      scene.primitives.push_back(Primitive::box(lo, hi));
    } else if (word == "cylinder") {
      Eigen::Vector3d a, b;
      double r;
      need(a.x()), need(a.y()), need(a.z()), need(b.x()), need(b.y()), need(b.z()), need(r);
      scene.primitives.push_back(Primitive::cylinder(a, b, r));
    } else if (word == "keyframe") {
      Keyframe kf;
      double qx, qy, qz, qw;
      need(kf.time);
      need(kf.position.x()), need(kf.position.y()), need(kf.position.z());
      need(qx), need(qy), need(qz), need(qw);
      kf.orientation = Eigen::Quaterniond(qw, qx, qy, qz).normalized();
      scene.keyframes.push_back(kf);
    } else if (word == "frames") {
      double n;
      need(n);
      scene.frame_count = static_cast<int>(n);
      if (scene.frame_count < 1) fail("frames must be >= 1");
    } else if (word == "noise_sigma") {
      double flag;
      need(flag);
      scene.noise = flag != 0.0;
    } else if (word == "seed") {
      double s;
      need(s);
      scene.seed = static_cast<std::uint32_t>(s);
    } else {
      fail("unknown directive '" + word + "'");
    }
  }
  if (!header_seen) throw std::runtime_error(name + ": missing 'aomap-scene 1' header");
  if (scene.keyframes.empty()) throw std::runtime_error(name + ": scene has no keyframes");
  return scene;
}

inline SyntheticScene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scene: cannot open '" + path + "'");
  return load_scene(in, path);
}

}  // namespace aomap

#endif  // AOMAP_IO_SCENE_HPP
