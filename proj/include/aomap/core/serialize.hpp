// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_CORE_SERIALIZE_HPP
#define AOMAP_CORE_SERIALIZE_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "aomap/core/octree.hpp"

namespace aomap {

// Versioned little-endian map file: header (magic, resolution, depth, origin)
// followed by the node/block records in pre-order, children in index order.
namespace serialize_detail {

static_assert(std::endian::native == std::endian::little, "map files are little-endian");

constexpr char kMagic[4] = {'A', 'O', 'M', '1'};
constexpr std::uint8_t kTagNode = 0;
constexpr std::uint8_t kTagLeaf = 1;
constexpr std::uint8_t kTagBlock = 2;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("map file: truncated");
  return value;
}

inline void write_state(std::ostream& out, const OccupancyState& s) {
  write_pod(out, s.mean_log_odds);
  write_pod(out, s.weight);
}

inline OccupancyState read_state(std::istream& in) {
  OccupancyState s;
  s.mean_log_odds = read_pod<double>(in);
  s.weight = read_pod<std::int32_t>(in);
  return s;
}

inline void write_entity(std::ostream& out, const OccupancyOctree& map, const Node& node,
                         int level, const Eigen::Vector3i& corner) {
  if (node.is_block()) {
    const auto& block = static_cast<const VoxelBlock&>(node);
    write_pod(out, kTagBlock);
    for (int a = 0; a < 3; ++a) write_pod(out, static_cast<std::int32_t>(block.base[a]));
    write_pod(out, static_cast<std::int8_t>(block.current_scale));
    write_pod(out, static_cast<std::int8_t>(block.min_scale_reached));
    write_pod(out, static_cast<std::uint8_t>(block.scale_locked ? 1 : 0));
    write_pod(out, block.scale_switches);
    write_pod(out, block.meta.max_log_odds);
    write_pod(out, static_cast<std::uint8_t>(block.meta.contains_unknown ? 1 : 0));
    if (block.has_data()) {
      for (int s = block.current_scale; s <= VoxelBlock::kMaxScale; ++s) {
        for (const OccupancyState& c : block.cells[s]) write_state(out, c);
      }
    }
    write_pod(out, static_cast<std::uint8_t>(block.transition ? 1 : 0));
    if (block.transition) {
      write_pod(out, static_cast<std::int8_t>(block.transition->scale));
      write_pod(out, static_cast<std::int32_t>(block.transition->full_observations));
      for (const OccupancyState& c : block.transition->cells) write_state(out, c);
    }
    return;
  }

  write_pod(out, node.meta.is_leaf_data ? kTagLeaf : kTagNode);
  write_pod(out, static_cast<std::uint8_t>(level));
  for (int a = 0; a < 3; ++a) write_pod(out, static_cast<std::int32_t>(corner[a]));
  write_pod(out, node.meta.max_log_odds);
  write_pod(out, static_cast<std::uint8_t>(node.meta.contains_unknown ? 1 : 0));
  if (node.meta.is_leaf_data) {
    write_state(out, node.data);
    return;
  }
  std::uint8_t mask = 0;
  for (int i = 0; i < 8; ++i) {
    if (node.child[i]) mask |= static_cast<std::uint8_t>(1u << i);
  }
  write_pod(out, mask);
  const int child_size = map.node_size_voxels(level + 1);
  for (int i = 0; i < 8; ++i) {
    if (!node.child[i]) continue;
    const Eigen::Vector3i child_corner =
        corner + child_size * Eigen::Vector3i(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    write_entity(out, map, *node.child[i], level + 1, child_corner);
  }
}

inline void read_block(std::istream& in, VoxelBlock& block) {
  for (int a = 0; a < 3; ++a) block.base[a] = read_pod<std::int32_t>(in);
  block.current_scale = read_pod<std::int8_t>(in);
  block.min_scale_reached = read_pod<std::int8_t>(in);
  block.scale_locked = read_pod<std::uint8_t>(in) != 0;
  block.scale_switches = read_pod<std::int32_t>(in);
  block.meta.max_log_odds = read_pod<double>(in);
  block.meta.contains_unknown = read_pod<std::uint8_t>(in) != 0;
  block.meta.is_leaf_data = false;
  if (block.current_scale > VoxelBlock::kMaxScale)
    throw std::runtime_error("map file: invalid block scale");
  if (block.has_data()) {
    for (int s = block.current_scale; s <= VoxelBlock::kMaxScale; ++s) {
      block.cells[s].resize(VoxelBlock::cell_count(s));
      for (auto& c : block.cells[s]) c = read_state(in);
    }
  }
  if (read_pod<std::uint8_t>(in) != 0) {
    VoxelBlock::Transition t;
    t.scale = read_pod<std::int8_t>(in);
    if (t.scale < 0 || t.scale > VoxelBlock::kMaxScale)
      throw std::runtime_error("map file: invalid transition scale");
    t.full_observations = read_pod<std::int32_t>(in);
    t.cells.resize(VoxelBlock::cell_count(t.scale));
    for (auto& c : t.cells) c = read_state(in);
    block.transition = std::move(t);
  }
}

inline std::unique_ptr<Node> read_entity(std::istream& in, const OccupancyOctree& map,
                                         int expected_level) {
  const auto tag = read_pod<std::uint8_t>(in);
  if (tag == kTagBlock) {
    if (expected_level != map.block_level())
      throw std::runtime_error("map file: block record at wrong level");
    auto block = std::make_unique<VoxelBlock>();
    read_block(in, *block);
    return block;
  }
  if (tag != kTagNode && tag != kTagLeaf) throw std::runtime_error("map file: bad record tag");
  const int level = read_pod<std::uint8_t>(in);
  if (level != expected_level) throw std::runtime_error("map file: level mismatch");
  Eigen::Vector3i corner;
  for (int a = 0; a < 3; ++a) corner[a] = read_pod<std::int32_t>(in);
  auto node = std::make_unique<Node>();
  node->meta.max_log_odds = read_pod<double>(in);
  node->meta.contains_unknown = read_pod<std::uint8_t>(in) != 0;
  node->meta.is_leaf_data = tag == kTagLeaf;
  if (tag == kTagLeaf) {
    node->data = read_state(in);
    return node;
  }
  const auto mask = read_pod<std::uint8_t>(in);
  for (int i = 0; i < 8; ++i) {
    if (mask & (1u << i)) node->child[i] = read_entity(in, map, level + 1);
  }
  return node;
}

}  // namespace serialize_detail

inline void save_map(const OccupancyOctree& map, std::ostream& out) {
  using namespace serialize_detail;
  out.write(kMagic, 4);
  write_pod(out, map.resolution());
  write_pod(out, static_cast<std::uint32_t>(map.depth()));
  for (int a = 0; a < 3; ++a) write_pod(out, map.origin()[a]);
  write_entity(out, map, map.root(), 0, Eigen::Vector3i::Zero());
  if (!out) throw std::runtime_error("map file: write failed");
}

inline void save_map(const OccupancyOctree& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("map file: cannot open '" + path + "' for writing");
  save_map(map, out);
}

inline OccupancyOctree load_map(std::istream& in) {
  using namespace serialize_detail;
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("map file: bad magic, not an occupancy map");
  const double v_res = read_pod<double>(in);
  const auto depth = read_pod<std::uint32_t>(in);
  Eigen::Vector3d origin;
  for (int a = 0; a < 3; ++a) origin[a] = read_pod<double>(in);
  OccupancyOctree map(v_res, static_cast<int>(depth), origin);
  map.set_root(read_entity(in, map, 0));
  return map;
}

inline OccupancyOctree load_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("map file: cannot open '" + path + "'");
  return load_map(in);
}

}  // namespace aomap

#endif  // AOMAP_CORE_SERIALIZE_HPP
