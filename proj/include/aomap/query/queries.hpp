// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_QUERY_QUERIES_HPP
#define AOMAP_QUERY_QUERIES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aomap/core/geometry.hpp"
#include "aomap/core/octree.hpp"

namespace aomap {

enum class PointClass { kFree, kOccupied, kUnknown };

/**
 * Free requires an observation with negative accumulated log-odds; occupied
 * requires positive; weight 0 or exactly 0 log-odds carries no information.
 */
inline PointClass classify_state(const OccupancyState& s) {
  if (!s.observed()) return PointClass::kUnknown;
  const double l = s.log_odds();
  if (l > 0.0) return PointClass::kOccupied;
  if (l < 0.0) return PointClass::kFree;
  return PointClass::kUnknown;
}

struct Classification {
  PointClass cls = PointClass::kUnknown;
  double log_odds = 0.0;
  double cell_size = 0.0;
};

inline Classification classify_point(const OccupancyOctree& map, const Eigen::Vector3d& p) {
  const CellRef cell = map.lowest_cell_at(p);
  return Classification{classify_state(cell.state), cell.state.log_odds(), cell.size_m};
}

namespace query_detail {

struct FieldSample {
  double log_odds = 0.0;
  int native_scale = 0;
  bool known = false;
};

/**
 * Field value at pos when sampled on a lattice of the given scale: node data
 * is piecewise constant, blocks answer from the mip level matching the
 * lattice (clamped to the block's data scale).
 */
inline FieldSample field_sample(const OccupancyOctree& map, const Eigen::Vector3d& pos,
                                int lattice_scale) {
  FieldSample out;
  if (!map.contains(pos)) return out;
  const Eigen::Vector3i coord = map.voxel_coord(pos);
  const Node* node = &map.root();
  int level = 0;
  while (true) {
    if (node->is_block()) {
      const auto& block = static_cast<const VoxelBlock&>(*node);
      if (!block.has_data()) return out;
      const int s = std::clamp(lattice_scale, block.current_scale, VoxelBlock::kMaxScale);
      const Eigen::Vector3i local = (coord - block.base) / (1 << s);
      const OccupancyState& cell = block.cell(s, local.x(), local.y(), local.z());
      if (!cell.observed()) return out;
      out.log_odds = cell.log_odds();
      out.native_scale = block.current_scale;
      out.known = true;
      return out;
    }
    if (node->meta.is_leaf_data) {
      if (!node->data.observed()) return out;
      out.log_odds = node->data.log_odds();
      out.native_scale = map.depth() - level;
      out.known = true;
      return out;
    }
    if (!node->has_children()) return out;
    const Node* next = node->child[map.child_index(coord, level)].get();
    if (!next) return out;
    node = next;
    ++level;
  }
}

}  // namespace query_detail

/**
 * Tri-linear interpolation of accumulated log-odds over the eight lattice
 * neighbours of p, sampled at the finest scale at which all contributing
 * neighbours have data. Absent when any contributing neighbour is unknown.
 */
inline std::optional<double> interpolate_occupancy(const OccupancyOctree& map,
                                                   const Eigen::Vector3d& p) {
  if (!map.contains(p)) return std::nullopt;
  int scale = map.lowest_cell_at(p).scale;
  for (int iter = 0; iter <= map.depth() + 1; ++iter) {
    const double h = map.resolution() * (1 << scale);
    const Eigen::Vector3d q = (p - map.origin()) / h - Eigen::Vector3d::Constant(0.5);
    const Eigen::Vector3d base(std::floor(q.x()), std::floor(q.y()), std::floor(q.z()));
    const Eigen::Vector3d frac = q - base;

    double value = 0.0;
    int coarsest = scale;
    bool restart = false;
    for (int k = 0; k < 8; ++k) {
      const Eigen::Vector3d offs(k & 1, (k >> 1) & 1, (k >> 2) & 1);
      const double wx = (k & 1) ? frac.x() : 1.0 - frac.x();
      const double wy = (k & 2) ? frac.y() : 1.0 - frac.y();
      const double wz = (k & 4) ? frac.z() : 1.0 - frac.z();
      const double w = wx * wy * wz;
      if (w == 0.0) continue;
      const Eigen::Vector3d pos =
          map.origin() + (base + offs + Eigen::Vector3d::Constant(0.5)) * h;
      const auto sample = query_detail::field_sample(map, pos, scale);
      if (!sample.known) return std::nullopt;
      if (sample.native_scale > scale) {
        coarsest = std::max(coarsest, sample.native_scale);
        restart = true;
      }
      value += w * sample.log_odds;
    }
    if (!restart) return value;
    scale = coarsest;
  }
  return std::nullopt;
}

struct RaycastHit {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double distance = 0.0;
  int scale = 0;
  bool unknown_boundary = false;
};

/**
 * Hierarchical ray march: fully-free nodes and blocks are crossed in a single
 * step and data regions are sampled every half cell. The surface is where the
 * ray enters occupied data; the hit position is refined to v_res / 4 by
 * bisecting the zero crossing of the interpolated log-odds (falling back to
 * the cell classification where interpolation has no value). Unknown space is
 * opaque: by default it ends the ray without a hit, with
 * report_unknown_boundary it is reported as a hit flagged unknown.
 */
inline std::optional<RaycastHit> raycast(const OccupancyOctree& map,
                                         const Eigen::Vector3d& origin,
                                         const Eigen::Vector3d& dir, double max_range,
                                         bool report_unknown_boundary = false) {
  Aabb bounds;
  bounds.lo = map.origin();
  bounds.hi = map.origin() + Eigen::Vector3d::Constant(map.edge_length());
  const auto clip = intersect_ray_aabb(origin, dir, bounds);
  if (!clip) return std::nullopt;
  // samples sit on absolute multiples of half a voxel so that free-space
  // skips cannot change which surface chord the march lands on
  const double step = 0.5 * map.resolution();
  const auto snap_up = [step](double tq) { return (std::floor(tq / step) + 1.0) * step; };
  double t = snap_up(std::max(clip->first, 0.0));
  const double t_end = std::min(clip->second, max_range);

  // the surface indicator used for refinement: interpolated log-odds where
  // defined, the covering cell's occupancy where not
  const auto inside_surface = [&](double tq) {
    const Eigen::Vector3d p = origin + tq * dir;
    const CellRef cell = map.lowest_cell_at(p);
    if (const auto interp = interpolate_occupancy(map, p)) {
      return *interp >= 0.0 || classify_state(cell.state) == PointClass::kOccupied;
    }
    return classify_state(cell.state) == PointClass::kOccupied;
  };

  bool have_prev = false;
  double t_prev = 0.0;
  while (t < t_end) {
    const Eigen::Vector3d p = origin + t * dir;
    const CellRef cell = map.lowest_cell_at(p);
    if (!cell.state.observed()) {
      if (report_unknown_boundary)
        return RaycastHit{p, t, cell.scale, true};
      return std::nullopt;
    }
    if (cell.entity_fully_free) {
      const auto exit = intersect_ray_aabb(origin, dir, cell.entity_bounds);
      t_prev = t;
      have_prev = true;
      t = snap_up(exit ? exit->second : t + cell.size_m);
      continue;
    }
    if (classify_state(cell.state) == PointClass::kOccupied) {
      double hi = t;
      if (have_prev) {
        double lo = t_prev;
        while (hi - lo > 0.25 * map.resolution()) {
          const double mid = 0.5 * (lo + hi);
          if (inside_surface(mid)) {
            hi = mid;
          } else {
            lo = mid;
          }
        }
      }
      const Eigen::Vector3d hit = origin + hi * dir;
      return RaycastHit{hit, hi, map.lowest_cell_at(hit).scale, false};
    }
    t_prev = t;
    have_prev = true;
    t += 0.5 * cell.size_m;
  }
  return std::nullopt;
}

enum class Verdict { kSafe, kUnsafe, kUnobserved };

struct CheckResult {
  Verdict verdict = Verdict::kSafe;
  std::int64_t visits = 0;
};

struct CorridorSegment {
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d end = Eigen::Vector3d::Zero();
  double radius = 0.0;
};

namespace query_detail {

template <typename OverlapFn>
void check_rec(const OccupancyOctree& map, const Node& node, int level,
               const Eigen::Vector3i& corner, const OverlapFn& overlaps, bool unknown_is_unsafe,
               CheckResult& result) {
  ++result.visits;
  const Aabb bounds = map.node_bounds(level, corner);
  if (!overlaps(bounds)) return;
  if (result.verdict == Verdict::kUnsafe) return;

  const auto raise = [&](Verdict v) {
    if (unknown_is_unsafe && v == Verdict::kUnobserved) v = Verdict::kUnsafe;
    if (v == Verdict::kUnsafe) {
      result.verdict = Verdict::kUnsafe;
    } else if (v == Verdict::kUnobserved && result.verdict == Verdict::kSafe) {
      result.verdict = Verdict::kUnobserved;
    }
  };

  if (!node.meta.contains_unknown && node.meta.max_log_odds < 0.0) return;  // fully free

  if (node.is_block()) {
    const auto& block = static_cast<const VoxelBlock&>(node);
    if (!block.has_data()) {
      raise(Verdict::kUnobserved);
      return;
    }
    const int s = block.current_scale;
    const int n = VoxelBlock::cells_per_edge(s);
    const double cell_size = map.resolution() * (1 << s);
    const Eigen::Vector3d base_W = map.origin() + block.base.cast<double>() * map.resolution();
    for (int z = 0; z < n && result.verdict != Verdict::kUnsafe; ++z) {
      for (int y = 0; y < n && result.verdict != Verdict::kUnsafe; ++y) {
        for (int x = 0; x < n; ++x) {
          ++result.visits;
          const Aabb cell_bounds{base_W + cell_size * Eigen::Vector3d(x, y, z),
                                 base_W + cell_size * Eigen::Vector3d(x + 1, y + 1, z + 1)};
          if (!overlaps(cell_bounds)) continue;
          const PointClass c = classify_state(block.cell(s, x, y, z));
          if (c == PointClass::kOccupied) {
            raise(Verdict::kUnsafe);
            break;
          }
          if (c == PointClass::kUnknown) raise(Verdict::kUnobserved);
        }
      }
    }
    return;
  }

  if (node.meta.is_leaf_data) {
    const PointClass c = classify_state(node.data);
    if (c == PointClass::kOccupied) {
      raise(Verdict::kUnsafe);
    } else if (c == PointClass::kUnknown) {
      raise(Verdict::kUnobserved);
    }
    return;
  }
  if (!node.has_children()) {
    raise(Verdict::kUnobserved);
    return;
  }
  const int child_size = map.node_size_voxels(level + 1);
  for (int i = 0; i < 8; ++i) {
    if (result.verdict == Verdict::kUnsafe) return;
    const Eigen::Vector3i child_corner =
        corner + child_size * Eigen::Vector3i(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    if (!node.child[i]) {
      if (overlaps(map.node_bounds(level + 1, child_corner))) raise(Verdict::kUnobserved);
      continue;
    }
    check_rec(map, *node.child[i], level + 1, child_corner, overlaps, unknown_is_unsafe, result);
  }
}

template <typename OverlapFn>
CheckResult check_primitive(const OccupancyOctree& map, const OverlapFn& overlaps,
                            bool unknown_is_unsafe, const Aabb& primitive_bounds) {
  CheckResult result;
  // Anything reaching outside the map volume is unobserved by definition.
  Aabb map_bounds;
  map_bounds.lo = map.origin();
  map_bounds.hi = map.origin() + Eigen::Vector3d::Constant(map.edge_length());
  if ((primitive_bounds.lo.array() < map_bounds.lo.array()).any() ||
      (primitive_bounds.hi.array() > map_bounds.hi.array()).any()) {
    result.verdict = unknown_is_unsafe ? Verdict::kUnsafe : Verdict::kUnobserved;
  }
  if (result.verdict != Verdict::kUnsafe) {
    check_rec(map, map.root(), 0, Eigen::Vector3i::Zero(), overlaps, unknown_is_unsafe, result);
  }
  return result;
}

}  // namespace query_detail

/**
 * Coarse-to-fine sphere collision check; equals the exhaustive per-voxel
 * overlap test while visiting only as many entities as the hierarchy needs.
 */
inline CheckResult check_sphere(const OccupancyOctree& map, const Eigen::Vector3d& center,
                                double radius, bool unknown_is_unsafe) {
  const Aabb bounds{center - Eigen::Vector3d::Constant(radius),
                    center + Eigen::Vector3d::Constant(radius)};
  return query_detail::check_primitive(
      map, [&](const Aabb& box) { return sphere_intersects_aabb(center, radius, box); },
      unknown_is_unsafe, bounds);
}

/** One corridor segment: a cylinder capped by spheres, i.e. a capsule. */
inline CheckResult check_segment(const OccupancyOctree& map, const CorridorSegment& segment,
                                 bool unknown_is_unsafe) {
  const Eigen::Vector3d r = Eigen::Vector3d::Constant(segment.radius);
  const Aabb bounds{segment.start.cwiseMin(segment.end) - r,
                    segment.start.cwiseMax(segment.end) + r};
  return query_detail::check_primitive(
      map,
      [&](const Aabb& box) {
        return segment_capsule_intersects_aabb(segment.start, segment.end, segment.radius, box);
      },
      unknown_is_unsafe, bounds);
}

inline std::vector<CheckResult> check_corridor(const OccupancyOctree& map,
                                               std::span<const CorridorSegment> segments,
                                               bool unknown_is_unsafe) {
  std::vector<CheckResult> verdicts;
  verdicts.reserve(segments.size());
  for (const auto& segment : segments) {
    verdicts.push_back(check_segment(map, segment, unknown_is_unsafe));
  }
  return verdicts;
}

}  // namespace aomap

#endif  // AOMAP_QUERY_QUERIES_HPP
