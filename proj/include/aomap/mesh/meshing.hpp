// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_MESH_MESHING_HPP
#define AOMAP_MESH_MESHING_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aomap/core/octree.hpp"
#include "aomap/query/queries.hpp"

namespace aomap {

struct Mesh {
  struct Vertex {
    Eigen::Vector3f position = Eigen::Vector3f::Zero();
    std::uint8_t scale = 0;
  };
  std::vector<Vertex> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

namespace mesh_detail {

// Kuhn decomposition: six tetrahedra through the main diagonal (corner 0 to
// corner 7 in x | y<<1 | z<<2 indexing). Face diagonals agree between
// neighbouring cubes, so the extracted surface is watertight per block.
constexpr std::array<std::array<int, 4>, 6> kTets = {{
    {0, 1, 3, 7},
    {0, 1, 5, 7},
    {0, 2, 3, 7},
    {0, 2, 6, 7},
    {0, 4, 5, 7},
    {0, 4, 6, 7},
}};

struct BlockMesher {
  Mesh& mesh;
  std::uint8_t scale_tag;
  // vertex cache keyed by the (sorted) lattice ids of the crossing edge
  std::map<std::pair<std::int64_t, std::int64_t>, std::uint32_t> edge_vertices;

  std::uint32_t vertex_on_edge(std::int64_t id_a, std::int64_t id_b, Eigen::Vector3d pa,
                               Eigen::Vector3d pb, double va, double vb) {
    if (id_b < id_a) {
      std::swap(id_a, id_b);
      std::swap(pa, pb);
      std::swap(va, vb);
    }
    const auto key = std::make_pair(id_a, id_b);
    if (const auto it = edge_vertices.find(key); it != edge_vertices.end()) return it->second;
    const double t = va / (va - vb);  // iso-level 0 between opposite signs
    const Eigen::Vector3d p = pa + t * (pb - pa);
    const auto index = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back({p.cast<float>(), scale_tag});
    edge_vertices.emplace(key, index);
    return index;
  }

  void emit(std::uint32_t a, std::uint32_t b, std::uint32_t c,
            const Eigen::Vector3d& inside_point) {
    const Eigen::Vector3d pa = mesh.vertices[a].position.cast<double>();
    const Eigen::Vector3d pb = mesh.vertices[b].position.cast<double>();
    const Eigen::Vector3d pc = mesh.vertices[c].position.cast<double>();
    const Eigen::Vector3d n = (pb - pa).cross(pc - pa);
    // normals point out of the occupied volume
    if (n.dot(inside_point - pa) > 0.0) {
      mesh.triangles.push_back({a, c, b});
    } else {
      mesh.triangles.push_back({a, b, c});
    }
  }

  void polygonise_tet(const std::array<std::int64_t, 4>& ids,
                      const std::array<Eigen::Vector3d, 4>& pos,
                      const std::array<double, 4>& val) {
    int inside[4];
    int outside[4];
    int n_in = 0;
    int n_out = 0;
    for (int i = 0; i < 4; ++i) {
      if (val[i] > 0.0) {
        inside[n_in++] = i;
      } else {
        outside[n_out++] = i;
      }
    }
    if (n_in == 0 || n_out == 0) return;
    if (n_in == 1 || n_in == 3) {
      const int apex = n_in == 1 ? inside[0] : outside[0];
      const int* others = n_in == 1 ? outside : inside;
      std::uint32_t v[3];
      for (int k = 0; k < 3; ++k) {
        v[k] = vertex_on_edge(ids[apex], ids[others[k]], pos[apex], pos[others[k]], val[apex],
                              val[others[k]]);
      }
      emit(v[0], v[1], v[2], n_in == 1 ? pos[inside[0]] : pos[inside[2]]);
      return;
    }
    // two inside, two outside: a quad split into two triangles
    const int a = inside[0], b = inside[1], c = outside[0], d = outside[1];
    const std::uint32_t vac = vertex_on_edge(ids[a], ids[c], pos[a], pos[c], val[a], val[c]);
    const std::uint32_t vad = vertex_on_edge(ids[a], ids[d], pos[a], pos[d], val[a], val[d]);
    const std::uint32_t vbc = vertex_on_edge(ids[b], ids[c], pos[b], pos[c], val[b], val[c]);
    const std::uint32_t vbd = vertex_on_edge(ids[b], ids[d], pos[b], pos[d], val[b], val[d]);
    emit(vac, vad, vbd, pos[a]);
    emit(vac, vbd, vbc, pos[a]);
  }
};

}  // namespace mesh_detail

/**
 * Iso-surface of the accumulated log-odds at level 0, polygonised per voxel
 * block at its current scale over the lattice of cell centres; corner values
 * come from interpolate_occupancy so equal-scale block seams share values.
 * Cubes with any unknown corner emit no geometry. Vertices carry the block
 * scale. Blocks are processed in canonical coordinate order.
 */
inline Mesh extract_mesh(const OccupancyOctree& map) {
  std::vector<const VoxelBlock*> blocks;
  map.visit([&](const Node& node, int, const Eigen::Vector3i&) {
    if (node.is_block()) {
      const auto& block = static_cast<const VoxelBlock&>(node);
      if (block.has_data()) blocks.push_back(&block);
    }
  });
  std::sort(blocks.begin(), blocks.end(), [](const VoxelBlock* a, const VoxelBlock* b) {
    return std::make_tuple(a->base.z(), a->base.y(), a->base.x()) <
           std::make_tuple(b->base.z(), b->base.y(), b->base.x());
  });

  Mesh mesh;
  for (const VoxelBlock* block : blocks) {
    // A fully-free or fully-unknown block cannot contain a zero crossing.
    if (block->meta.contains_unknown && block->meta.max_log_odds == 0.0) continue;
    const int s = block->current_scale;
    const int n = VoxelBlock::cells_per_edge(s);
    const double h = map.resolution() * (1 << s);
    const Eigen::Vector3d base_W = map.origin() + block->base.cast<double>() * map.resolution();

    // corner samples on the (n+1)^3 lattice of cell centres
    std::vector<std::optional<double>> values(
        static_cast<std::size_t>(n + 1) * (n + 1) * (n + 1));
    std::vector<bool> computed(values.size(), false);
    const auto lattice_pos = [&](int i, int j, int k) -> Eigen::Vector3d {
      return base_W + h * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
    };
    const auto sample = [&](int i, int j, int k) -> std::optional<double> {
      const std::size_t idx =
          (static_cast<std::size_t>(k) * (n + 1) + j) * (n + 1) + i;
      if (!computed[idx]) {
        const Eigen::Vector3d pos = lattice_pos(i, j, k);
        values[idx] = map.contains(pos) ? interpolate_occupancy(map, pos) : std::nullopt;
        computed[idx] = true;
      }
      return values[idx];
    };

    mesh_detail::BlockMesher mesher{mesh, static_cast<std::uint8_t>(s), {}};
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          std::array<double, 8> corner_val;
          std::array<Eigen::Vector3d, 8> corner_pos;
          std::array<std::int64_t, 8> corner_id;
          bool known = true;
          bool any_pos = false;
          bool any_neg = false;
          for (int c = 0; c < 8; ++c) {
            const int ci = i + (c & 1);
            const int cj = j + ((c >> 1) & 1);
            const int ck = k + ((c >> 2) & 1);
            const auto v = sample(ci, cj, ck);
            if (!v) {
              known = false;
              break;
            }
            corner_val[c] = *v;
            corner_pos[c] = lattice_pos(ci, cj, ck);
            corner_id[c] =
                (static_cast<std::int64_t>(ck) * (n + 1) + cj) * (n + 1) + ci;
            (corner_val[c] > 0.0 ? any_pos : any_neg) = true;
          }
          if (!known || !any_pos || !any_neg) continue;
          for (const auto& tet : mesh_detail::kTets) {
            mesher.polygonise_tet(
                {corner_id[tet[0]], corner_id[tet[1]], corner_id[tet[2]], corner_id[tet[3]]},
                {corner_pos[tet[0]], corner_pos[tet[1]], corner_pos[tet[2]], corner_pos[tet[3]]},
                {corner_val[tet[0]], corner_val[tet[1]], corner_val[tet[2]], corner_val[tet[3]]});
          }
        }
      }
    }
  }
  return mesh;
}

/** Scale-to-colour convention: 0 green, 1 orange, 2 blue, 3 red. */
inline std::array<std::uint8_t, 3> scale_color(int scale) {
  switch (scale) {
    case 0: return {0, 170, 0};
    case 1: return {255, 165, 0};
    case 2: return {40, 90, 255};
    default: return {220, 30, 30};
  }
}

inline void write_ply(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("mesh: cannot open '" + path + "' for writing");
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property uchar scale\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    out.write(reinterpret_cast<const char*>(v.position.data()), 3 * sizeof(float));
    const auto rgb = scale_color(v.scale);
    out.write(reinterpret_cast<const char*>(rgb.data()), 3);
    out.write(reinterpret_cast<const char*>(&v.scale), 1);
  }
  for (const auto& t : mesh.triangles) {
    const std::uint8_t count = 3;
    out.write(reinterpret_cast<const char*>(&count), 1);
    std::array<std::int32_t, 3> idx = {static_cast<std::int32_t>(t[0]),
                                       static_cast<std::int32_t>(t[1]),
                                       static_cast<std::int32_t>(t[2])};
    out.write(reinterpret_cast<const char*>(idx.data()), 3 * sizeof(std::int32_t));
  }
  if (!out) throw std::runtime_error("mesh: write failed for '" + path + "'");
}

inline void write_obj(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("mesh: cannot open '" + path + "' for writing");
  out << "# occupancy iso-surface, vertex colours encode sampling scale\n";
  for (const auto& v : mesh.vertices) {
    const auto rgb = scale_color(v.scale);
    out << "v " << v.position.x() << ' ' << v.position.y() << ' ' << v.position.z() << ' '
        << rgb[0] / 255.0 << ' ' << rgb[1] / 255.0 << ' ' << rgb[2] / 255.0 << '\n';
  }
  for (const auto& t : mesh.triangles) {
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  if (!out) throw std::runtime_error("mesh: write failed for '" + path + "'");
}

}  // namespace aomap

#endif  // AOMAP_MESH_MESHING_HPP
