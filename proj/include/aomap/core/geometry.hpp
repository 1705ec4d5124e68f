// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_CORE_GEOMETRY_HPP
#define AOMAP_CORE_GEOMETRY_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

namespace aomap {

struct Aabb {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();

  Eigen::Vector3d center() const { return 0.5 * (lo + hi); }
  Eigen::Vector3d extent() const { return hi - lo; }

  bool contains(const Eigen::Vector3d& p) const {
    return (p.array() >= lo.array()).all() && (p.array() < hi.array()).all();
  }

  Eigen::Vector3d corner(int i) const {
    return Eigen::Vector3d(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(),
                           i & 4 ? hi.z() : lo.z());
  }
};

/** Squared distance from a point to an axis-aligned box (0 inside). */
inline double squared_distance_point_aabb(const Eigen::Vector3d& p, const Aabb& box) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (p[a] < box.lo[a]) {
      const double d = box.lo[a] - p[a];
      d2 += d * d;
    } else if (p[a] > box.hi[a]) {
      const double d = p[a] - box.hi[a];
      d2 += d * d;
    }
  }
  return d2;
}

inline bool sphere_intersects_aabb(const Eigen::Vector3d& c, double radius, const Aabb& box) {
  return squared_distance_point_aabb(c, box) <= radius * radius;
}

namespace detail {

// One axis' contribution to |s(t) - clamp(s(t), box)|^2 as a quadratic in t,
// restricted to an interval where the clamp regime does not change.
inline void axis_quadratic(double p0, double d, double lo, double hi, double t_mid, double& a,
                           double& b, double& c) {
  const double x = p0 + d * t_mid;
  if (x < lo) {
    // (lo - p0 - d t)^2
    const double k = lo - p0;
    a += d * d;
    b += -2.0 * k * d;
    c += k * k;
  } else if (x > hi) {
    const double k = p0 - hi;
    a += d * d;
    b += 2.0 * k * d;
    c += k * k;
  }
}

}  // namespace detail

/**
 * Exact squared distance between a segment and an axis-aligned box.
 *
 * f(t) = |s(t) - clamp(s(t), box)|^2 is piecewise quadratic and convex in t;
 * the clamp regime can only change where a coordinate of s(t) crosses a box
 * face, so the breakpoints partition [0, 1] into at most seven intervals on
 * which the quadratic is minimised in closed form.
 */
inline double squared_distance_segment_aabb(const Eigen::Vector3d& s0, const Eigen::Vector3d& s1,
                                            const Aabb& box) {
  const Eigen::Vector3d d = s1 - s0;

  std::array<double, 14> ts;
  std::size_t n = 0;
  ts[n++] = 0.0;
  ts[n++] = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) continue;
    for (const double bound : {box.lo[a], box.hi[a]}) {
      const double t = (bound - s0[a]) / d[a];
      if (t > 0.0 && t < 1.0) ts[n++] = t;
    }
  }
  std::sort(ts.begin(), ts.begin() + n);

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double t0 = ts[i];
    const double t1 = ts[i + 1];
    if (t1 <= t0) continue;
    double a = 0.0, b = 0.0, c = 0.0;
    const double t_mid = 0.5 * (t0 + t1);
    for (int axis = 0; axis < 3; ++axis) {
      detail::axis_quadratic(s0[axis], d[axis], box.lo[axis], box.hi[axis], t_mid, a, b, c);
    }
    double t_star = t_mid;
    if (a > 0.0) t_star = std::clamp(-b / (2.0 * a), t0, t1);
    for (const double t : {t0, t1, t_star}) {
      best = std::min(best, a * t * t + b * t + c);
    }
    if (best == 0.0) return 0.0;
  }
  return best;
}

inline bool segment_capsule_intersects_aabb(const Eigen::Vector3d& s0, const Eigen::Vector3d& s1,
                                            double radius, const Aabb& box) {
  return squared_distance_segment_aabb(s0, s1, box) <= radius * radius;
}

/** Ray/box slab test; returns the [t_near, t_far] overlap if any. */
inline std::optional<std::pair<double, double>> intersect_ray_aabb(const Eigen::Vector3d& origin,
                                                                   const Eigen::Vector3d& dir,
                                                                   const Aabb& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.lo[a] || origin[a] >= box.hi[a]) return std::nullopt;
      continue;
    }
    double ta = (box.lo[a] - origin[a]) / dir[a];
    double tb = (box.hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 < t0) return std::nullopt;
  return std::make_pair(t0, t1);
}

}  // namespace aomap

#endif  // AOMAP_CORE_GEOMETRY_HPP
