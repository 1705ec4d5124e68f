// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_REFERENCE_DENSE_ORACLE_HPP
#define AOMAP_REFERENCE_DENSE_ORACLE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aomap/core/frame.hpp"
#include "aomap/core/occupancy.hpp"
#include "aomap/integrator/integrator.hpp"
#include "aomap/query/queries.hpp"
#include "aomap/sensor/inverse_model.hpp"

namespace aomap {

/**
 * Brute-force reference: a flat voxel grid integrating every voxel against
 * every frame with the same sensor model and fusion rule as the adaptive
 * pipeline, but with no spatial adaptivity anywhere.
 */
class DenseGrid {
 public:
  DenseGrid(const Eigen::Vector3i& dims, double v_res, const Eigen::Vector3d& origin)
      : dims_(dims), v_res_(v_res), origin_(origin) {
    const std::int64_t count =
        static_cast<std::int64_t>(dims.x()) * dims.y() * dims.z();
    if (count <= 0) throw std::invalid_argument("dense grid: empty dimensions");
    if (count > (1ll << 25)) throw std::invalid_argument("dense grid: too large to allocate");
    cells_.assign(static_cast<std::size_t>(count), OccupancyState{});
  }

  const Eigen::Vector3i& dims() const { return dims_; }
  double resolution() const { return v_res_; }
  const Eigen::Vector3d& origin() const { return origin_; }
  std::int64_t voxel_count() const { return static_cast<std::int64_t>(cells_.size()); }

  bool contains(const Eigen::Vector3i& c) const {
    return c.x() >= 0 && c.y() >= 0 && c.z() >= 0 && c.x() < dims_.x() && c.y() < dims_.y() &&
           c.z() < dims_.z();
  }
  bool contains(const Eigen::Vector3d& p) const { return contains(voxel_of(p)); }

  Eigen::Vector3i voxel_of(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d q = (p - origin_) / v_res_;
    return Eigen::Vector3i(static_cast<int>(std::floor(q.x())),
                           static_cast<int>(std::floor(q.y())),
                           static_cast<int>(std::floor(q.z())));
  }

  Eigen::Vector3d voxel_center(const Eigen::Vector3i& c) const {
    return origin_ + v_res_ * (c.cast<double>() + Eigen::Vector3d::Constant(0.5));
  }

  OccupancyState& at(const Eigen::Vector3i& c) {
    return cells_[(static_cast<std::size_t>(c.z()) * dims_.y() + c.y()) * dims_.x() + c.x()];
  }
  const OccupancyState& at(const Eigen::Vector3i& c) const {
    return cells_[(static_cast<std::size_t>(c.z()) * dims_.y() + c.y()) * dims_.x() + c.x()];
  }

  /** Classification at a point; outside the grid counts as unknown. */
  PointClass classify(const Eigen::Vector3d& p) const {
    if (!contains(p)) return PointClass::kUnknown;
    return classify_state(at(voxel_of(p)));
  }

  /** The per-frame log-odds the dense pipeline applies at p (if any). */
  std::optional<double> frame_log_odds(const FrameInput& frame, const SensorSpec& spec,
                                       const Eigen::Vector3d& p) const {
    if (!contains(p)) return std::nullopt;
    const auto proj = project(frame.T_WC, spec, voxel_center(voxel_of(p)));
    if (!proj) return std::nullopt;
    const float measured = frame.depth(static_cast<int>(std::floor(proj->u + 0.5)),
                                       static_cast<int>(std::floor(proj->v + 0.5)));
    if (!valid_depth(measured, spec.z_np, spec.z_fp)) return std::nullopt;
    return inverse_model(spec, proj->depth - measured, measured);
  }

  void integrate(const FrameInput& frame, const SensorSpec& spec, std::int32_t w_max) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int z = 0; z < dims_.z(); ++z) {
      for (int y = 0; y < dims_.y(); ++y) {
        for (int x = 0; x < dims_.x(); ++x) {
          const Eigen::Vector3i c(x, y, z);
          const auto proj = project(frame.T_WC, spec, voxel_center(c));
          if (!proj) continue;
          const float measured = frame.depth(static_cast<int>(std::floor(proj->u + 0.5)),
                                             static_cast<int>(std::floor(proj->v + 0.5)));
          if (!valid_depth(measured, spec.z_np, spec.z_fp)) continue;
          const auto l = inverse_model(spec, proj->depth - measured, measured);
          if (!l) continue;
          fuse_cell(at(c), *l, w_max, spec.l_min_total);
        }
      }
    }
  }

 private:
  Eigen::Vector3i dims_;
  double v_res_;
  Eigen::Vector3d origin_;
  std::vector<OccupancyState> cells_;
};

/**
 * Exhaustive collision check: classify every finest-resolution voxel whose
 * box overlaps the primitive. The classify callback maps a point to a
 * PointClass (out-of-bounds must count as unknown).
 */
template <typename ClassifyFn, typename OverlapFn>
CheckResult exhaustive_check(const ClassifyFn& classify, const OverlapFn& overlaps, double v_res,
                             const Eigen::Vector3d& origin, const Aabb& primitive_bounds,
                             bool unknown_is_unsafe) {
  CheckResult result;
  const auto lo = ((primitive_bounds.lo - origin) / v_res).array().floor().cast<int>().eval();
  const auto hi = ((primitive_bounds.hi - origin) / v_res).array().ceil().cast<int>().eval();
  for (int z = lo.z(); z < hi.z(); ++z) {
    for (int y = lo.y(); y < hi.y(); ++y) {
      for (int x = lo.x(); x < hi.x(); ++x) {
        ++result.visits;
        const Eigen::Vector3d corner =
            origin + v_res * Eigen::Vector3d(x, y, z);
        const Aabb voxel{corner, corner + Eigen::Vector3d::Constant(v_res)};
        if (!overlaps(voxel)) continue;
        const PointClass c = classify(voxel.center());
        Verdict v = Verdict::kSafe;
        if (c == PointClass::kOccupied) {
          v = Verdict::kUnsafe;
        } else if (c == PointClass::kUnknown) {
          v = unknown_is_unsafe ? Verdict::kUnsafe : Verdict::kUnobserved;
        }
        if (v == Verdict::kUnsafe) {
          result.verdict = Verdict::kUnsafe;
          return result;
        }
        if (v == Verdict::kUnobserved && result.verdict == Verdict::kSafe) {
          result.verdict = Verdict::kUnobserved;
        }
      }
    }
  }
  return result;
}

template <typename ClassifyFn>
CheckResult exhaustive_check_sphere(const ClassifyFn& classify, double v_res,
                                    const Eigen::Vector3d& origin, const Eigen::Vector3d& center,
                                    double radius, bool unknown_is_unsafe) {
  const Aabb bounds{center - Eigen::Vector3d::Constant(radius),
                    center + Eigen::Vector3d::Constant(radius)};
  return exhaustive_check(
      classify, [&](const Aabb& box) { return sphere_intersects_aabb(center, radius, box); },
      v_res, origin, bounds, unknown_is_unsafe);
}

template <typename ClassifyFn>
CheckResult exhaustive_check_segment(const ClassifyFn& classify, double v_res,
                                     const Eigen::Vector3d& origin,
                                     const CorridorSegment& segment, bool unknown_is_unsafe) {
  const Eigen::Vector3d r = Eigen::Vector3d::Constant(segment.radius);
  const Aabb bounds{segment.start.cwiseMin(segment.end) - r,
                    segment.start.cwiseMax(segment.end) + r};
  return exhaustive_check(
      classify,
      [&](const Aabb& box) {
        return segment_capsule_intersects_aabb(segment.start, segment.end, segment.radius, box);
      },
      v_res, origin, bounds, unknown_is_unsafe);
}

inline CheckResult dense_check_sphere(const DenseGrid& grid, const Eigen::Vector3d& center,
                                      double radius, bool unknown_is_unsafe) {
  return exhaustive_check_sphere([&](const Eigen::Vector3d& p) { return grid.classify(p); },
                                 grid.resolution(), grid.origin(), center, radius,
                                 unknown_is_unsafe);
}

}  // namespace aomap

#endif  // AOMAP_REFERENCE_DENSE_ORACLE_HPP
