// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_CORE_NODE_HPP
#define AOMAP_CORE_NODE_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "aomap/core/occupancy.hpp"

namespace aomap {

/**
 * Hierarchical summary kept at every node: a conservative upper bound on the
 * accumulated log-odds of all descendant cells (0 when nothing below has been
 * observed) and whether any descendant is unobserved.
 */
struct NodeMeta {
  double max_log_odds = 0.0;
  bool contains_unknown = true;
  bool is_leaf_data = false;
};

/**
 * Octree node. A node either carries its own OccupancyState (is_leaf_data),
 * has children, or is an unknown placeholder. Children at the voxel-block
 * level are VoxelBlock instances.
 */
class Node {
 public:
  virtual ~Node() = default;
  virtual bool is_block() const { return false; }

  bool has_children() const {
    for (const auto& c : child) {
      if (c) return true;
    }
    return false;
  }

  OccupancyState data;
  NodeMeta meta;
  std::array<std::unique_ptr<Node>, 8> child;
};

/**
 * Dense 8x8x8 brick at the lowest octree tier. Cell data lives at a single
 * integration scale; coarser mip scales above it are kept consistent (mean of
 * observed children) so that interpolation across blocks of different scales
 * has values to sample. Scale changes go through a double-buffered transition.
 */
class VoxelBlock final : public Node {
 public:
  static constexpr int kSide = 8;
  static constexpr int kMaxScale = 3;

  static int cells_per_edge(int scale) { return kSide >> scale; }
  static int cell_count(int scale) {
    const int n = cells_per_edge(scale);
    return n * n * n;
  }

  bool is_block() const override { return true; }

  bool has_data() const { return current_scale >= 0; }

  OccupancyState& cell(int scale, int x, int y, int z) {
    return cells[scale][cell_index(scale, x, y, z)];
  }
  const OccupancyState& cell(int scale, int x, int y, int z) const {
    return cells[scale][cell_index(scale, x, y, z)];
  }

  static std::size_t cell_index(int scale, int x, int y, int z) {
    const int n = cells_per_edge(scale);
    return static_cast<std::size_t>(z) * n * n + static_cast<std::size_t>(y) * n + x;
  }

  /** Allocate cell arrays for scales [scale, kMaxScale]; existing data is kept. */
  void allocate_from_scale(int scale) {
    for (int s = scale; s <= kMaxScale; ++s) {
      if (cells[s].empty()) cells[s].assign(cell_count(s), OccupancyState{});
    }
  }

  void release_below_scale(int scale) {
    for (int s = 0; s < scale; ++s) {
      cells[s].clear();
      cells[s].shrink_to_fit();
    }
  }

  struct Transition {
    int scale = 0;
    int full_observations = 0;
    std::vector<OccupancyState> cells;
  };

  Eigen::Vector3i base = Eigen::Vector3i::Zero();  // finest-scale corner coordinate
  int current_scale = -1;                          // -1 until any data exists
  int min_scale_reached = kMaxScale;
  bool scale_locked = false;  // false until the first real integration commits a scale
  std::int32_t scale_switches = 0;
  std::array<std::vector<OccupancyState>, kMaxScale + 1> cells;
  std::optional<Transition> transition;
};

}  // namespace aomap

#endif  // AOMAP_CORE_NODE_HPP
