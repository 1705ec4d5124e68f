// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_INTEGRATOR_INTEGRATOR_HPP
#define AOMAP_INTEGRATOR_INTEGRATOR_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aomap/core/frame.hpp"
#include "aomap/core/octree.hpp"
#include "aomap/pooling/pooling_pyramid.hpp"
#include "aomap/sensor/inverse_model.hpp"
#include "aomap/sensor/sensor.hpp"

namespace aomap {

struct IntegrationConfig {
  double epsilon = 0.5015;     // split tolerance on the per-frame log-odds span
  int frontier_scale = 1;      // minimum integration scale for frontier-only blocks
  std::int32_t w_max = 20;     // fusion weight clamp
  double hysteresis = 0.25;    // camera travel (in units of focal * v_res) before a scale change
  int stable_frames = 3;       // full observations required to commit a scale change
  double downsample = 1.0;     // input image scale, 1 or 0.5
  int pyramid_levels = 5;      // pooling levels
  double prune_threshold = -95.0;

  void validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("integrator: epsilon must be positive");
    if (frontier_scale < 0 || frontier_scale > VoxelBlock::kMaxScale)
      throw std::invalid_argument("integrator: frontier scale out of [0, 3]");
    if (w_max < 2) throw std::invalid_argument("integrator: w_max must be >= 2");
    if (stable_frames < 1) throw std::invalid_argument("integrator: stable_frames must be >= 1");
    if (downsample != 1.0 && downsample != 0.5)
      throw std::invalid_argument("integrator: downsample must be 1 or 0.5");
    if (pyramid_levels < 1) throw std::invalid_argument("integrator: pyramid_levels must be >= 1");
  }
};

/** Defaults derived from the sensor and map resolution. */
inline IntegrationConfig default_integration_config(const SensorSpec& spec, double v_res) {
  IntegrationConfig cfg;
  cfg.epsilon = 0.1 * -spec.l_min_iter;
  cfg.w_max = static_cast<std::int32_t>(std::lround(spec.l_min_total / spec.l_min_iter));
  cfg.pyramid_levels = spec.width <= 320 ? 5 : 6;
  cfg.frontier_scale = v_res >= 0.08 ? 0 : 1;
  cfg.prune_threshold = 0.95 * spec.l_min_total;
  return cfg;
}

struct IntegrationStats {
  std::int64_t frame = 0;
  std::int64_t nodes_updated = 0;
  std::int64_t nodes_split = 0;
  std::int64_t nodes_skipped = 0;
  std::int64_t blocks_touched = 0;
  std::int64_t cells_fused = 0;
  std::int64_t bytes_allocated = 0;
  double ms_pooling = 0.0;
  double ms_classify = 0.0;
  double ms_fusion = 0.0;
  double ms_propagate = 0.0;
  double ms_prune = 0.0;
  double ms_total = 0.0;

  static std::string csv_header() {
    return "frame,nodes_updated,nodes_split,nodes_skipped,blocks_touched,cells_fused,"
           "bytes_allocated,ms_pooling,ms_classify,ms_fusion,ms_propagate,ms_prune,ms_total";
  }

  std::string csv_row() const {
    std::ostringstream ss;
    ss << frame << ',' << nodes_updated << ',' << nodes_split << ',' << nodes_skipped << ','
       << blocks_touched << ',' << cells_fused << ',' << bytes_allocated << ',' << ms_pooling
       << ',' << ms_classify << ',' << ms_fusion << ',' << ms_propagate << ',' << ms_prune << ','
       << ms_total;
    return ss.str();
  }
};

/**
 * Optional per-frame record of the log-odds value applied at probe points;
 * used to compare against a dense reference. Tracing serialises block fusion.
 */
struct FrameTrace {
  struct Probe {
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    bool applied = false;
    bool node_level = false;
    double l = 0.0;
  };
  std::vector<Probe> probes;

  void begin_frame() {
    for (auto& p : probes) {
      p.applied = false;
      p.node_level = false;
      p.l = 0.0;
    }
  }
};

inline bool valid_depth(float d, double z_np, double z_fp) {
  return std::isfinite(d) && d > 0.0f && d >= z_np && d <= z_fp;
}

/**
 * Map-to-camera integration: each frame the octree is walked from the root,
 * nodes are updated at their own scale when the conservative span of the
 * inverse model over their volume stays below epsilon, split otherwise, and
 * skipped when occluded or outside the frustum; voxel blocks fuse per cell at
 * a distance-selected mip scale with hysteresis and double-buffered scale
 * transitions.
 *
 * integrate() is the frame boundary: the map must not be read while it runs
 * and may be read freely between calls.
 */
class MapIntegrator {
 public:
  MapIntegrator(OccupancyOctree& map, const SensorSpec& spec, const IntegrationConfig& config)
      : map_(map), spec_(spec), config_(config) {
    spec_.validate();
    config_.validate();
  }

  const SensorSpec& sensor() const { return spec_; }
  const IntegrationConfig& config() const { return config_; }

  void set_trace(FrameTrace* trace) { trace_ = trace; }

  IntegrationStats integrate(const FrameInput& frame) {
    using clock = std::chrono::steady_clock;
    const auto ms_since = [](clock::time_point t0) {
      return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };
    const auto t_start = clock::now();

    if (!frame.T_WC.orthonormal()) throw std::invalid_argument("integrate: degenerate pose");

    IntegrationStats stats;
    stats.frame = frame_index_++;
    if (trace_) trace_->begin_frame();

    // Effective image + intrinsics (optional 2x2 min-pool downsampling).
    const Image<float>* image = &frame.depth;
    Image<float> downsampled;
    SensorSpec eff = spec_;
    if (config_.downsample == 0.5) {
      if (frame.depth.width() != spec_.width || frame.depth.height() != spec_.height)
        throw std::invalid_argument("integrate: image dimensions do not match the sensor");
      downsampled = downsample_min(frame.depth, spec_.z_np, spec_.z_fp);
      eff = spec_.scaled(0.5);
      image = &downsampled;
    }
    if (image->width() != eff.width || image->height() != eff.height)
      throw std::invalid_argument("integrate: image dimensions do not match the sensor");

    auto t0 = clock::now();
    PoolingPyramid pyramid(*image, config_.pyramid_levels, eff.z_np, eff.z_fp);
    stats.ms_pooling = ms_since(t0);

    FrameContext ctx{*image, pyramid, eff, frame.T_WC, frame.T_WC.translation, stats};

    t0 = clock::now();
    std::vector<VoxelBlock*> tasks;
    classify_rec(ctx, tasks, &map_.root(), 0, Eigen::Vector3i::Zero());
    stats.ms_classify = ms_since(t0);

    t0 = clock::now();
    std::int64_t cells_fused = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 2) reduction(+ : cells_fused) if (trace_ == nullptr)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(tasks.size()); ++i) {
      cells_fused += integrate_block(ctx, *tasks[i]);
    }
    stats.cells_fused += cells_fused;
    stats.blocks_touched = static_cast<std::int64_t>(tasks.size());
    stats.ms_fusion = ms_since(t0);

    t0 = clock::now();
    map_.up_propagate(tasks);
    stats.ms_propagate = ms_since(t0);

    t0 = clock::now();
    map_.prune(config_.prune_threshold, config_.epsilon);
    stats.ms_prune = ms_since(t0);

    stats.bytes_allocated = map_.stats().memory_bytes;
    stats.ms_total = ms_since(t_start);
    return stats;
  }

  /**
   * Distance-based mip scale with hysteresis: the footprint-matching scale is
   * floor(log2(dist / (focal * v_res))) clamped to [0, 3]; once a scale is
   * committed the camera must travel hysteresis * focal * v_res past the
   * boundary before it changes. Frontier-only blocks never go finer than the
   * frontier scale.
   */
  static int select_scale(double dist, double focal_v_res, int committed_scale, bool frontier_only,
                          const IntegrationConfig& config) {
    int raw = 0;
    while (raw < VoxelBlock::kMaxScale && dist >= focal_v_res * (1 << (raw + 1))) ++raw;
    int s = raw;
    if (committed_scale >= 0 && raw != committed_scale) {
      const double margin = config.hysteresis * focal_v_res;
      s = committed_scale;
      if (raw > committed_scale) {
        if (dist >= focal_v_res * (1 << (committed_scale + 1)) + margin) s = raw;
      } else {
        if (dist <= focal_v_res * (1 << committed_scale) - margin) s = raw;
      }
    }
    if (frontier_only) s = std::max(s, config.frontier_scale);
    return s;
  }

  /** 2x2 min-pool of valid depths; conservative toward nearer obstacles. */
  static Image<float> downsample_min(const Image<float>& in, double z_np, double z_fp) {
    Image<float> out(in.width() / 2, in.height() / 2, 0.0f);
    for (int v = 0; v < out.height(); ++v) {
      for (int u = 0; u < out.width(); ++u) {
        float best = 0.0f;
        for (int k = 0; k < 4; ++k) {
          const float d = in(2 * u + (k & 1), 2 * v + (k >> 1));
          if (!valid_depth(d, z_np, z_fp)) continue;
          if (best <= 0.0f || d < best) best = d;
        }
        out(u, v) = best;
      }
    }
    return out;
  }

 private:
  struct FrameContext {
    const Image<float>& image;
    const PoolingPyramid& pyramid;
    const SensorSpec& spec;
    const Pose& T_WC;
    const Eigen::Vector3d camera_W;
    IntegrationStats& stats;
  };

  enum class FrustumTest { kInside, kOutside, kCrossing };

  static FrustumTest test_frustum(const std::array<Eigen::Vector3d, 8>& corners_C,
                                  const SensorSpec& spec) {
    // All six frustum faces are linear in camera coordinates, so corner
    // evaluations decide containment exactly for a box.
    const auto constraint = [&](const Eigen::Vector3d& p, int k) {
      switch (k) {
        case 0: return p.z() - spec.z_np;
        case 1: return spec.z_fp - p.z();
        case 2: return spec.fx * p.x() + (spec.cx + 0.5) * p.z();
        case 3: return (spec.width - 0.5 - spec.cx) * p.z() - spec.fx * p.x();
        case 4: return spec.fy * p.y() + (spec.cy + 0.5) * p.z();
        default: return (spec.height - 0.5 - spec.cy) * p.z() - spec.fy * p.y();
      }
    };
    bool all_inside = true;
    for (int k = 0; k < 6; ++k) {
      bool any_in = false;
      for (const auto& c : corners_C) {
        if (constraint(c, k) >= 0.0) {
          any_in = true;
        } else {
          all_inside = false;
        }
      }
      if (!any_in) return FrustumTest::kOutside;
    }
    return all_inside ? FrustumTest::kInside : FrustumTest::kCrossing;
  }

  static int nearest_px(double x) { return static_cast<int>(std::floor(x + 0.5)); }

  void classify_rec(FrameContext& ctx, std::vector<VoxelBlock*>& tasks, Node* node, int level,
                    const Eigen::Vector3i& corner) {
    const Aabb bounds = map_.node_bounds(level, corner);
    std::array<Eigen::Vector3d, 8> corners_C;
    for (int i = 0; i < 8; ++i) corners_C[i] = ctx.T_WC.to_camera(bounds.corner(i));

    const FrustumTest frustum = test_frustum(corners_C, ctx.spec);
    if (frustum == FrustumTest::kOutside) {
      ++ctx.stats.nodes_skipped;
      return;
    }

    if (frustum == FrustumTest::kCrossing) {
      if (level == map_.block_level()) {
        enqueue_block_conservative(ctx, tasks, corners_C, corner);
      } else {
        descend(ctx, tasks, node, level, corner);
      }
      return;
    }

    // Fully inside the frustum: conservative span of the model over the node.
    double u_min = 0.0, u_max = 0.0, v_min = 0.0, v_max = 0.0, r_min = 0.0, r_max = 0.0;
    for (int i = 0; i < 8; ++i) {
      const Eigen::Vector3d& p = corners_C[i];
      const double u = ctx.spec.cx + ctx.spec.fx * p.x() / p.z();
      const double v = ctx.spec.cy + ctx.spec.fy * p.y() / p.z();
      if (i == 0) {
        u_min = u_max = u;
        v_min = v_max = v;
        r_min = r_max = p.z();
      } else {
        u_min = std::min(u_min, u), u_max = std::max(u_max, u);
        v_min = std::min(v_min, v), v_max = std::max(v_max, v);
        r_min = std::min(r_min, p.z()), r_max = std::max(r_max, p.z());
      }
    }
    const auto pooled = ctx.pyramid.query_box(nearest_px(u_min), nearest_px(u_max),
                                              nearest_px(v_min), nearest_px(v_max));
    if (!pooled.has_valid()) {
      // Only invalid measurements cover this volume; nothing can update it.
      ++ctx.stats.nodes_skipped;
      return;
    }
    if (pooled.contains_invalid || pooled.touches_boundary) {
      if (level == map_.block_level()) {
        tasks.push_back(allocate_task(corner));
      } else {
        descend(ctx, tasks, node, level, corner);
      }
      return;
    }

    const ModelSpan span = model_span(ctx.spec, r_min, r_max, pooled.z_min, pooled.z_max);
    if (span.empty) {
      ++ctx.stats.nodes_skipped;  // fully behind the measured surface
      return;
    }
    if (level == map_.block_level()) {
      tasks.push_back(allocate_task(corner));
      return;
    }
    if (!span.any_no_update && span.l_high - span.l_low < config_.epsilon) {
      // A subtree from earlier frames keeps its finer partition.
      if (node && (node->has_children() || node->is_block())) {
        descend(ctx, tasks, node, level, corner);
        return;
      }
      const Eigen::Vector3d center_C = ctx.T_WC.to_camera(bounds.center());
      const double z_mid = 0.5 * (pooled.z_min + pooled.z_max);
      const auto l = inverse_model(ctx.spec, center_C.z() - z_mid, z_mid);
      apply_node_update(ctx, level, corner, bounds, l ? *l : span.l_low);
      return;
    }
    descend(ctx, tasks, node, level, corner);
  }

  void descend(FrameContext& ctx, std::vector<VoxelBlock*>& tasks, Node* node, int level,
               const Eigen::Vector3i& corner) {
    ++ctx.stats.nodes_split;
    if (node && node->meta.is_leaf_data) map_.split_node(*node, level, corner);
    const int child_size = map_.node_size_voxels(level + 1);
    for (int i = 0; i < 8; ++i) {
      const Eigen::Vector3i child_corner =
          corner + child_size * Eigen::Vector3i(i & 1, (i >> 1) & 1, (i >> 2) & 1);
      classify_rec(ctx, tasks, node ? node->child[i].get() : nullptr, level + 1, child_corner);
    }
  }

  VoxelBlock* allocate_task(const Eigen::Vector3i& corner) { return map_.allocate_block(corner); }

  void enqueue_block_conservative(FrameContext& ctx, std::vector<VoxelBlock*>& tasks,
                                  const std::array<Eigen::Vector3d, 8>& corners_C,
                                  const Eigen::Vector3i& corner) {
    // Frustum-crossing block: only allocate if some valid measurement could
    // reach it. The pixel box is widened to the whole image when a corner is
    // at or behind the camera plane.
    int u_min = 0, u_max = ctx.spec.width - 1, v_min = 0, v_max = ctx.spec.height - 1;
    bool bounded = true;
    for (const auto& p : corners_C) {
      if (p.z() < 1e-9) {
        bounded = false;
        break;
      }
    }
    if (bounded) {
      double uu0 = 0, uu1 = 0, vv0 = 0, vv1 = 0;
      for (int i = 0; i < 8; ++i) {
        const Eigen::Vector3d& p = corners_C[i];
        const double u = ctx.spec.cx + ctx.spec.fx * p.x() / p.z();
        const double v = ctx.spec.cy + ctx.spec.fy * p.y() / p.z();
        if (i == 0) {
          uu0 = uu1 = u;
          vv0 = vv1 = v;
        } else {
          uu0 = std::min(uu0, u), uu1 = std::max(uu1, u);
          vv0 = std::min(vv0, v), vv1 = std::max(vv1, v);
        }
      }
      u_min = nearest_px(uu0), u_max = nearest_px(uu1);
      v_min = nearest_px(vv0), v_max = nearest_px(vv1);
    }
    const auto pooled = ctx.pyramid.query_box(u_min, u_max, v_min, v_max);
    if (pooled.outside || !pooled.has_valid()) {
      ++ctx.stats.nodes_skipped;
      return;
    }
    tasks.push_back(allocate_task(corner));
  }

  void apply_node_update(FrameContext& ctx, int level, const Eigen::Vector3i& corner,
                         const Aabb& bounds, double l) {
    Node* node = map_.allocate_path(corner, level);
    node->meta.is_leaf_data = true;
    fuse_cell(node->data, l, config_.w_max, ctx.spec.l_min_total);
    ++ctx.stats.nodes_updated;
    ++ctx.stats.cells_fused;
    if (trace_) {
      for (auto& probe : trace_->probes) {
        if (bounds.contains(probe.point)) {
          probe.applied = true;
          probe.node_level = true;
          probe.l = l;
        }
      }
    }
  }

  bool is_frontier_only(const VoxelBlock& block) const {
    return block.has_data() && block.meta.contains_unknown && block.meta.max_log_odds < 0.0;
  }

  /** Returns the number of cells fused. */
  std::int64_t integrate_block(FrameContext& ctx, VoxelBlock& block) {
    const Aabb bounds = map_.node_bounds(map_.block_level(), block.base);
    const double dist = (bounds.center() - ctx.camera_W).norm();
    const double focal_v_res = ctx.spec.focal() * map_.resolution();
    const int committed = block.scale_locked ? block.current_scale : -1;
    const int target = select_scale(dist, focal_v_res, committed, is_frontier_only(block), config_);

    if (!block.scale_locked) {
      commit_initial_scale(block, target);
    } else if (target != block.current_scale) {
      if (!block.transition || block.transition->scale != target) start_transition(block, target);
    } else if (block.transition) {
      block.transition.reset();  // camera moved back before the switch completed
    }

    std::int64_t fused = fuse_scale(ctx, block, block.current_scale,
                                    block.cells[block.current_scale]);
    if (block.transition) {
      fused += fuse_scale(ctx, block, block.transition->scale, block.transition->cells);
      std::array<Eigen::Vector3d, 8> corners_C;
      for (int i = 0; i < 8; ++i) corners_C[i] = ctx.T_WC.to_camera(bounds.corner(i));
      if (test_frustum(corners_C, ctx.spec) == FrustumTest::kInside) {
        ++block.transition->full_observations;
      }
      if (block.transition->full_observations >= config_.stable_frames) {
        complete_transition(block);
      }
    }
    return fused;
  }

  void commit_initial_scale(VoxelBlock& block, int scale) {
    if (!block.has_data()) {
      block.current_scale = scale;
      block.allocate_from_scale(scale);
    } else if (scale < block.current_scale) {
      // A coarse state seeded by a node split: push it down to the new scale.
      const int coarse = block.current_scale;
      block.allocate_from_scale(scale);
      const int n = VoxelBlock::cells_per_edge(scale);
      const int shift = coarse - scale;
      for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            block.cell(scale, x, y, z) = block.cell(coarse, x >> shift, y >> shift, z >> shift);
          }
        }
      }
      block.current_scale = scale;
    }
    block.scale_locked = true;
    block.min_scale_reached = std::min(block.min_scale_reached, block.current_scale);
  }

  void start_transition(VoxelBlock& block, int target) {
    VoxelBlock::Transition t;
    t.scale = target;
    t.cells.assign(VoxelBlock::cell_count(target), OccupancyState{});
    if (target < block.current_scale) {
      // Finer: each child starts from its parent's value.
      const int shift = block.current_scale - target;
      const int n = VoxelBlock::cells_per_edge(target);
      for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            t.cells[VoxelBlock::cell_index(target, x, y, z)] =
                block.cell(block.current_scale, x >> shift, y >> shift, z >> shift);
          }
        }
      }
    } else {
      // Coarser: start from the mip values (means of observed children).
      t.cells = block.cells[target];
    }
    block.transition = std::move(t);
  }

  void complete_transition(VoxelBlock& block) {
    const int target = block.transition->scale;
    if (target < block.current_scale) {
      block.allocate_from_scale(target);
    }
    block.cells[target] = std::move(block.transition->cells);
    if (target > block.current_scale) {
      block.release_below_scale(target);
    }
    block.current_scale = target;
    block.min_scale_reached = std::min(block.min_scale_reached, target);
    ++block.scale_switches;
    block.transition.reset();
  }

  std::int64_t fuse_scale(FrameContext& ctx, VoxelBlock& block, int scale,
                          std::vector<OccupancyState>& cells) {
    const int n = VoxelBlock::cells_per_edge(scale);
    const double cell_size = map_.resolution() * (1 << scale);
    const Eigen::Vector3d base_W =
        map_.origin() + block.base.cast<double>() * map_.resolution();
    std::int64_t fused = 0;
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const Eigen::Vector3d center_W =
              base_W + cell_size * Eigen::Vector3d(x + 0.5, y + 0.5, z + 0.5);
          const auto proj = project(ctx.T_WC, ctx.spec, center_W);
          if (!proj) continue;
          const float measured =
              ctx.image(nearest_px(proj->u), nearest_px(proj->v));
          if (!valid_depth(measured, ctx.spec.z_np, ctx.spec.z_fp)) continue;
          const auto l = inverse_model(ctx.spec, proj->depth - measured, measured);
          if (!l) continue;
          OccupancyState& cell = cells[VoxelBlock::cell_index(scale, x, y, z)];
          fuse_cell(cell, *l, config_.w_max, ctx.spec.l_min_total);
          ++fused;
          if (trace_ && scale == block.current_scale) {
            const Aabb cell_bounds{
                base_W + cell_size * Eigen::Vector3d(x, y, z),
                base_W + cell_size * Eigen::Vector3d(x + 1, y + 1, z + 1)};
            for (auto& probe : trace_->probes) {
              if (cell_bounds.contains(probe.point)) {
                probe.applied = true;
                probe.node_level = false;
                probe.l = *l;
              }
            }
          }
        }
      }
    }
    return fused;
  }

  OccupancyOctree& map_;
  SensorSpec spec_;
  IntegrationConfig config_;
  FrameTrace* trace_ = nullptr;
  std::int64_t frame_index_ = 0;
};

}  // namespace aomap

#endif  // AOMAP_INTEGRATOR_INTEGRATOR_HPP
