// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_CORE_OCTREE_HPP
#define AOMAP_CORE_OCTREE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "aomap/core/geometry.hpp"
#include "aomap/core/node.hpp"
#include "aomap/core/occupancy.hpp"

namespace aomap {

/** The data-bearing cell covering a query point. */
struct CellRef {
  OccupancyState state;
  int level = 0;        // tree level of the covering entity
  int scale = 0;        // cell edge = v_res * 2^scale
  double size_m = 0.0;
  bool is_block_cell = false;
  Aabb bounds;          // the cell itself
  Aabb entity_bounds;   // the covering node or block
  bool entity_fully_free = false;  // max occupancy < 0 and nothing unknown below
};

struct MapStats {
  std::int64_t nodes = 0;  // excluding voxel blocks
  std::int64_t leaf_data_nodes = 0;
  std::int64_t blocks = 0;
  std::array<std::int64_t, VoxelBlock::kMaxScale + 1> blocks_at_scale{};
  std::int64_t block_cells = 0;       // cells across all allocated scale arrays
  std::int64_t transition_cells = 0;
  std::int64_t data_cells = 0;        // block cells + transition cells + leaf-data nodes
  std::vector<std::int64_t> nodes_per_level;
  std::int64_t memory_bytes = 0;
};

/**
 * Two-tier adaptive occupancy map: a shallow octree whose nodes may carry
 * occupancy data directly, with dense mip-mapped 8x8x8 voxel blocks at the
 * lowest tier. Tree depth is fixed at construction; the map covers the cube
 * [origin, origin + v_res * 2^depth).
 *
 * Occupancy data for any point lives at exactly one entity: the lowest
 * allocated node or block cell containing it.
 */
class OccupancyOctree {
 public:
  OccupancyOctree(double v_res, int depth, const Eigen::Vector3d& origin)
      : v_res_(v_res), depth_(depth), origin_(origin), root_(std::make_unique<Node>()) {
    if (v_res <= 0.0) throw std::invalid_argument("octree: resolution must be positive");
    if (depth < 4 || depth > 21) throw std::invalid_argument("octree: depth out of range [4, 21]");
  }

  double resolution() const { return v_res_; }
  int depth() const { return depth_; }
  int block_level() const { return depth_ - 3; }
  int size_voxels() const { return 1 << depth_; }
  double edge_length() const { return v_res_ * size_voxels(); }
  const Eigen::Vector3d& origin() const { return origin_; }

  Node& root() { return *root_; }
  const Node& root() const { return *root_; }
  void set_root(std::unique_ptr<Node> root) { root_ = std::move(root); }

  int node_size_voxels(int level) const { return 1 << (depth_ - level); }

  bool contains(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d q = p - origin_;
    const double edge = edge_length();
    return q.x() >= 0.0 && q.y() >= 0.0 && q.z() >= 0.0 && q.x() < edge && q.y() < edge &&
           q.z() < edge;
  }

  bool contains_coord(const Eigen::Vector3i& c) const {
    const int n = size_voxels();
    return c.x() >= 0 && c.y() >= 0 && c.z() >= 0 && c.x() < n && c.y() < n && c.z() < n;
  }

  Eigen::Vector3i voxel_coord(const Eigen::Vector3d& p) const {
    const Eigen::Vector3d q = (p - origin_) / v_res_;
    return Eigen::Vector3i(static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
                           static_cast<int>(std::floor(q.z())));
  }

  Aabb cell_bounds(const Eigen::Vector3i& corner, int size_voxels) const {
    Aabb box;
    box.lo = origin_ + corner.cast<double>() * v_res_;
    box.hi = box.lo + Eigen::Vector3d::Constant(size_voxels * v_res_);
    return box;
  }

  Aabb node_bounds(int level, const Eigen::Vector3i& corner) const {
    return cell_bounds(corner, node_size_voxels(level));
  }

  /**
   * Ensure the path from the root to (target_level, coord) exists and return
   * the entity at target_level. New nodes are unknown; leaf-data nodes on the
   * path are split so data stays at the lowest allocated level.
   */
  Node* allocate_path(const Eigen::Vector3i& coord, int target_level) {
    if (!contains_coord(coord)) throw std::out_of_range("octree: coordinate outside map bounds");
    if (target_level < 0 || target_level > block_level())
      throw std::invalid_argument("octree: level outside [0, block_level]");
    Node* node = root_.get();
    for (int level = 0; level < target_level; ++level) {
      if (node->meta.is_leaf_data) split_node(*node, level, level_corner(coord, level));
      const int idx = child_index(coord, level);
      auto& slot = node->child[idx];
      if (!slot) {
        if (level + 1 == block_level()) {
          auto block = std::make_unique<VoxelBlock>();
          block->base = level_corner(coord, level + 1);
          slot = std::move(block);
        } else {
          slot = std::make_unique<Node>();
        }
      }
      node = slot.get();
    }
    return node;
  }

  VoxelBlock* allocate_block(const Eigen::Vector3i& coord) {
    return static_cast<VoxelBlock*>(allocate_path(coord, block_level()));
  }

  /** Entity at exactly (level, coord on its path), or nullptr. */
  Node* find(const Eigen::Vector3i& coord, int target_level) const {
    if (!contains_coord(coord)) return nullptr;
    Node* node = root_.get();
    for (int level = 0; level < target_level; ++level) {
      node = node->child[child_index(coord, level)].get();
      if (!node) return nullptr;
    }
    return node;
  }

  /**
   * Create the eight children of a leaf-data or placeholder node, assigning
   * the parent's state to each child; block-level children start as a single
   * scale-3 cell holding the parent state.
   */
  void split_node(Node& node, int level, const Eigen::Vector3i& corner) {
    if (node.is_block() || level >= block_level())
      throw std::invalid_argument("octree: cannot split below the voxel-block level");
    if (node.has_children()) throw std::invalid_argument("octree: node already has children");
    const bool leaf = node.meta.is_leaf_data;
    const int child_size = node_size_voxels(level + 1);
    for (int i = 0; i < 8; ++i) {
      const Eigen::Vector3i child_corner =
          corner + child_size * Eigen::Vector3i(i & 1, (i >> 1) & 1, (i >> 2) & 1);
      if (level + 1 == block_level()) {
        auto block = std::make_unique<VoxelBlock>();
        block->base = child_corner;
        if (leaf) {
          block->current_scale = VoxelBlock::kMaxScale;
          block->cells[VoxelBlock::kMaxScale].assign(1, node.data);
          block->meta = NodeMeta{node.data.log_odds(), !node.data.observed(), false};
        }
        node.child[i] = std::move(block);
      } else {
        auto c = std::make_unique<Node>();
        if (leaf) {
          c->data = node.data;
          c->meta = NodeMeta{node.data.log_odds(), !node.data.observed(), true};
        }
        node.child[i] = std::move(c);
      }
    }
    node.meta.is_leaf_data = false;
    node.data = OccupancyState{};
  }

  /** The data-bearing cell containing p; unknown regions report weight 0. */
  CellRef lowest_cell_at(const Eigen::Vector3d& p) const {
    if (!contains(p)) throw std::out_of_range("octree: point outside map bounds");
    const Eigen::Vector3i coord = voxel_coord(p);
    const Node* node = root_.get();
    int level = 0;
    while (true) {
      if (node->is_block()) {
        const auto& block = static_cast<const VoxelBlock&>(*node);
        if (!block.has_data()) {
          return make_ref(OccupancyState{}, level, 3, block.base, VoxelBlock::kSide, &block);
        }
        const int s = block.current_scale;
        const Eigen::Vector3i local = (coord - block.base) / (1 << s);
        const OccupancyState& cell = block.cell(s, local.x(), local.y(), local.z());
        const Eigen::Vector3i cell_corner = block.base + local * (1 << s);
        CellRef ref = make_ref(cell, level, s, cell_corner, 1 << s, &block);
        ref.is_block_cell = true;
        return ref;
      }
      if (node->meta.is_leaf_data || !node->has_children()) {
        return make_ref(node->meta.is_leaf_data ? node->data : OccupancyState{}, level,
                        depth_ - level, level_corner(coord, level), node_size_voxels(level),
                        node);
      }
      const int idx = child_index(coord, level);
      const Node* next = node->child[idx].get();
      if (!next) {
        return make_ref(OccupancyState{}, level + 1, depth_ - level - 1,
                        level_corner(coord, level + 1), node_size_voxels(level + 1), nullptr);
      }
      node = next;
      ++level;
    }
  }

  /**
   * Frame finalisation: refresh the mip scales of the given blocks (parents
   * become the mean of their observed children) and recompute the max/unknown
   * summaries of every node up to the root.
   */
  void up_propagate(std::span<VoxelBlock* const> updated_blocks) {
    for (VoxelBlock* block : updated_blocks) refresh_block(*block);
    refresh_node_meta();
  }

  void refresh_block(VoxelBlock& block) const {
    if (!block.has_data()) {
      block.meta = NodeMeta{0.0, true, false};
      return;
    }
    for (int s = block.current_scale + 1; s <= VoxelBlock::kMaxScale; ++s) {
      block.allocate_from_scale(s);
      const int n = VoxelBlock::cells_per_edge(s);
      for (int z = 0; z < n; ++z) {
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            block.cell(s, x, y, z) = mean_of_children(block, s - 1, x, y, z);
          }
        }
      }
    }
    double max_l = 0.0;
    bool any_observed = false;
    bool any_unknown = false;
    for (const OccupancyState& c : block.cells[block.current_scale]) {
      if (c.observed()) {
        max_l = any_observed ? std::max(max_l, c.log_odds()) : c.log_odds();
        any_observed = true;
      } else {
        any_unknown = true;
      }
    }
    block.meta = NodeMeta{any_observed ? max_l : 0.0, any_unknown || !any_observed, false};
  }

  /** Recompute every node's max-pool and unknown flags from its subtree. */
  void refresh_node_meta() { refresh_meta_rec(*root_); }

  /**
   * Merge any node whose eight node children all hold observed leaf data with
   * accumulated log-odds <= threshold and pairwise spread <= epsilon; the
   * parent takes the children's mean state. Returns the number of merges.
   */
  int prune(double threshold, double epsilon) {
    int merged = 0;
    prune_rec(*root_, 0, threshold, epsilon, merged);
    if (merged > 0) refresh_node_meta();
    return merged;
  }

  /** Pre-order visit of all entities as f(node, level, corner_coord). */
  template <typename F>
  void visit(F&& f) const {
    visit_rec(*root_, 0, Eigen::Vector3i::Zero(), f);
  }

  MapStats stats() const {
    MapStats s;
    s.nodes_per_level.assign(block_level() + 1, 0);
    visit([&](const Node& node, int level, const Eigen::Vector3i&) {
      if (node.is_block()) {
        const auto& block = static_cast<const VoxelBlock&>(node);
        ++s.blocks;
        ++s.nodes_per_level[level];
        if (block.has_data()) ++s.blocks_at_scale[block.current_scale];
        s.memory_bytes += sizeof(VoxelBlock);
        for (const auto& arr : block.cells) {
          s.block_cells += static_cast<std::int64_t>(arr.size());
          s.memory_bytes += static_cast<std::int64_t>(arr.capacity() * sizeof(OccupancyState));
        }
        if (block.transition) {
          s.transition_cells += static_cast<std::int64_t>(block.transition->cells.size());
          s.memory_bytes +=
              static_cast<std::int64_t>(block.transition->cells.capacity() * sizeof(OccupancyState));
        }
      } else {
        ++s.nodes;
        ++s.nodes_per_level[level];
        if (node.meta.is_leaf_data) ++s.leaf_data_nodes;
        s.memory_bytes += sizeof(Node);
      }
    });
    s.data_cells = s.block_cells + s.transition_cells + s.leaf_data_nodes;
    return s;
  }

  int child_index(const Eigen::Vector3i& coord, int level) const {
    const int shift = depth_ - level - 1;
    return ((coord.x() >> shift) & 1) | (((coord.y() >> shift) & 1) << 1) |
           (((coord.z() >> shift) & 1) << 2);
  }

  Eigen::Vector3i level_corner(const Eigen::Vector3i& coord, int level) const {
    const int mask = ~(node_size_voxels(level) - 1);
    return Eigen::Vector3i(coord.x() & mask, coord.y() & mask, coord.z() & mask);
  }

  /** Mean state over the observed children of a mip cell (children at scale s_child). */
  static OccupancyState mean_of_children(const VoxelBlock& block, int s_child, int x, int y,
                                         int z) {
    double mean_sum = 0.0;
    std::int64_t weight_sum = 0;
    int observed = 0;
    for (int k = 0; k < 8; ++k) {
      const OccupancyState& c = block.cell(s_child, 2 * x + (k & 1), 2 * y + ((k >> 1) & 1),
                                           2 * z + ((k >> 2) & 1));
      if (c.observed()) {
        mean_sum += c.mean_log_odds;
        weight_sum += c.weight;
        ++observed;
      }
    }
    if (observed == 0) return OccupancyState{};
    OccupancyState out;
    out.mean_log_odds = mean_sum / observed;
    out.weight = static_cast<std::int32_t>(
        std::max<std::int64_t>(1, std::llround(static_cast<double>(weight_sum) / observed)));
    return out;
  }

 private:
  CellRef make_ref(const OccupancyState& state, int level, int scale,
                   const Eigen::Vector3i& corner, int size_voxels, const Node* entity) const {
    CellRef ref;
    ref.state = state;
    ref.level = level;
    ref.scale = scale;
    ref.size_m = size_voxels * v_res_;
    ref.bounds = cell_bounds(corner, size_voxels);
    if (entity && entity->is_block()) {
      ref.entity_bounds =
          cell_bounds(static_cast<const VoxelBlock*>(entity)->base, VoxelBlock::kSide);
    } else {
      ref.entity_bounds = ref.bounds;
    }
    ref.entity_fully_free =
        entity && !entity->meta.contains_unknown && entity->meta.max_log_odds < 0.0;
    return ref;
  }

  void refresh_meta_rec(Node& node) {
    if (node.is_block()) return;  // block meta is maintained by refresh_block
    if (node.meta.is_leaf_data) {
      node.meta.max_log_odds = node.data.log_odds();
      node.meta.contains_unknown = !node.data.observed();
      return;
    }
    if (!node.has_children()) {
      node.meta = NodeMeta{0.0, true, false};
      return;
    }
    double max_l = 0.0;
    bool first = true;
    bool unknown = false;
    for (auto& c : node.child) {
      if (!c) {
        unknown = true;
        continue;
      }
      refresh_meta_rec(*c);
      max_l = first ? c->meta.max_log_odds : std::max(max_l, c->meta.max_log_odds);
      first = false;
      unknown |= c->meta.contains_unknown;
    }
    node.meta.max_log_odds = max_l;
    node.meta.contains_unknown = unknown;
  }

  void prune_rec(Node& node, int level, double threshold, double epsilon, int& merged) {
    if (node.is_block() || !node.has_children()) return;
    for (auto& c : node.child) {
      if (c) prune_rec(*c, level + 1, threshold, epsilon, merged);
    }
    if (level + 1 >= block_level()) return;  // children holding blocks are not merged
    double lo = 0.0, hi = 0.0, mean_sum = 0.0;
    std::int64_t weight_sum = 0;
    for (int i = 0; i < 8; ++i) {
      const Node* c = node.child[i].get();
      if (!c || c->is_block() || !c->meta.is_leaf_data || !c->data.observed()) return;
      const double l = c->data.log_odds();
      if (i == 0) {
        lo = hi = l;
      } else {
        lo = std::min(lo, l);
        hi = std::max(hi, l);
      }
      mean_sum += c->data.mean_log_odds;
      weight_sum += c->data.weight;
    }
    if (hi > threshold || hi - lo > epsilon) return;
    node.data.mean_log_odds = mean_sum / 8.0;
    node.data.weight = static_cast<std::int32_t>(
        std::max<std::int64_t>(1, std::llround(static_cast<double>(weight_sum) / 8.0)));
    node.meta = NodeMeta{node.data.log_odds(), false, true};
    for (auto& c : node.child) c.reset();
    ++merged;
  }

  template <typename F>
  void visit_rec(const Node& node, int level, const Eigen::Vector3i& corner, F& f) const {
    f(node, level, corner);
    if (node.is_block()) return;
    const int child_size = node_size_voxels(level + 1);
    for (int i = 0; i < 8; ++i) {
      if (node.child[i]) {
        visit_rec(*node.child[i], level + 1,
                  corner + child_size * Eigen::Vector3i(i & 1, (i >> 1) & 1, (i >> 2) & 1), f);
      }
    }
  }

  double v_res_;
  int depth_;
  Eigen::Vector3d origin_;
  std::unique_ptr<Node> root_;
};

}  // namespace aomap

#endif  // AOMAP_CORE_OCTREE_HPP
