// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_POOLING_POOLING_PYRAMID_HPP
#define AOMAP_POOLING_POOLING_PYRAMID_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "aomap/core/image.hpp"

namespace aomap {

/**
 * Multi-scale max-min summary of a depth image. Level f holds, per pixel, the
 * span of valid depths inside the (2^f+1)^2 window centred on it, whether the
 * window contains invalid measurements and whether it is clipped by the image
 * border. Level 1 is computed from the raw image; level f from the four
 * level-(f-1) records at offsets +-2^(f-2).
 *
 * Built once per frame; immutable afterwards and safe for concurrent readers.
 */
class PoolingPyramid {
 public:
  struct Record {
    float z_min = std::numeric_limits<float>::infinity();
    float z_max = -std::numeric_limits<float>::infinity();
    bool contains_invalid = false;
    bool touches_boundary = false;

    bool has_valid() const { return z_min <= z_max; }

    void merge(const Record& o) {
      z_min = std::min(z_min, o.z_min);
      z_max = std::max(z_max, o.z_max);
      contains_invalid |= o.contains_invalid;
      touches_boundary |= o.touches_boundary;
    }
  };

  struct BoxQuery {
    float z_min = std::numeric_limits<float>::infinity();
    float z_max = -std::numeric_limits<float>::infinity();
    bool contains_invalid = false;
    bool touches_boundary = false;
    bool outside = false;  // box does not intersect the image at all
    int level = 0;
    int windows_queried = 0;

    bool has_valid() const { return z_min <= z_max; }
  };

  PoolingPyramid(const Image<float>& depth, int max_level, double z_np, double z_fp)
      : width_(depth.width()), height_(depth.height()), max_level_(max_level) {
    if (depth.empty()) throw std::invalid_argument("pooling: empty depth image");
    if (max_level < 1) throw std::invalid_argument("pooling: max_level must be >= 1");
    levels_.resize(max_level_);
    for (auto& level : levels_) level.resize(static_cast<std::size_t>(width_) * height_);

    const float lo = static_cast<float>(z_np);
    const float hi = static_cast<float>(z_fp);
    std::int64_t ops = 0;

    // Level 1: direct 3x3 windows of the raw image.
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : ops)
#endif
    for (int v = 0; v < height_; ++v) {
      for (int u = 0; u < width_; ++u) {
        Record r;
        r.touches_boundary = u < 1 || v < 1 || u > width_ - 2 || v > height_ - 2;
        for (int dv = -1; dv <= 1; ++dv) {
          for (int du = -1; du <= 1; ++du) {
            const int uu = u + du;
            const int vv = v + dv;
            if (uu < 0 || uu >= width_ || vv < 0 || vv >= height_) continue;
            const float d = depth(uu, vv);
            if (!std::isfinite(d) || d <= 0.0f || d < lo || d > hi) {
              r.contains_invalid = true;
            } else {
              r.z_min = std::min(r.z_min, d);
              r.z_max = std::max(r.z_max, d);
            }
          }
        }
        ops += 8;
        levels_[0][index(u, v)] = r;
      }
    }

    for (int f = 2; f <= max_level_; ++f) {
      const int off = 1 << (f - 2);
      const auto& prev = levels_[f - 2];
      auto& cur = levels_[f - 1];
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : ops)
#endif
      for (int v = 0; v < height_; ++v) {
        for (int u = 0; u < width_; ++u) {
          Record r;
          for (int sv = -1; sv <= 1; sv += 2) {
            for (int su = -1; su <= 1; su += 2) {
              const int uu = std::clamp(u + su * off, 0, width_ - 1);
              const int vv = std::clamp(v + sv * off, 0, height_ - 1);
              r.merge(prev[index(uu, vv)]);
            }
          }
          ops += 4;
          cur[index(u, v)] = r;
        }
      }
    }
    merge_ops_ = ops;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int max_level() const { return max_level_; }
  std::int64_t merge_op_count() const { return merge_ops_; }

  const Record& at(int level, int u, int v) const { return levels_[level - 1][index(u, v)]; }

  /**
   * Conservative depth span over an inclusive pixel box. Selects the largest
   * window that still fits inside the box (floor: level 1) and covers the box
   * with windows anchored at its corners; the merged span may extend at most
   * one window beyond the box, never less than the box.
   */
  BoxQuery query_box(int u_min, int u_max, int v_min, int v_max) const {
    BoxQuery q;
    if (u_max < 0 || v_max < 0 || u_min > width_ - 1 || v_min > height_ - 1 || u_min > u_max ||
        v_min > v_max) {
      q.outside = true;
      return q;
    }
    const int cu_min = std::max(u_min, 0);
    const int cu_max = std::min(u_max, width_ - 1);
    const int cv_min = std::max(v_min, 0);
    const int cv_max = std::min(v_max, height_ - 1);
    q.touches_boundary = cu_min != u_min || cu_max != u_max || cv_min != v_min || cv_max != v_max;

    const int box_w = cu_max - cu_min + 1;
    const int box_h = cv_max - cv_min + 1;
    int f = 1;
    while (f < max_level_ && (1 << (f + 1)) + 1 <= std::min(box_w, box_h)) ++f;
    q.level = f;
    const int half = 1 << (f - 1);
    const int window = (1 << f) + 1;

    const auto centers = [&](int lo, int hi, int img_max) {
      std::vector<int> out;
      if (hi - lo + 1 <= window) {
        out.push_back(std::clamp((lo + hi) / 2, 0, img_max));
        return out;
      }
      for (int c = lo + half;; c += window) {
        if (c + half >= hi) {
          out.push_back(std::clamp(hi - half, 0, img_max));
          return out;
        }
        out.push_back(std::clamp(c, 0, img_max));
      }
    };

    const std::vector<int> cu = centers(cu_min, cu_max, width_ - 1);
    const std::vector<int> cv = centers(cv_min, cv_max, height_ - 1);
    Record merged;
    for (const int v : cv) {
      for (const int u : cu) {
        merged.merge(at(f, u, v));
        ++q.windows_queried;
      }
    }
    q.z_min = merged.z_min;
    q.z_max = merged.z_max;
    q.contains_invalid = merged.contains_invalid;
    q.touches_boundary |= merged.touches_boundary;
    return q;
  }

 private:
  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width_ + u; }

  int width_;
  int height_;
  int max_level_;
  std::int64_t merge_ops_ = 0;
  std::vector<std::vector<Record>> levels_;
};

}  // namespace aomap

#endif  // AOMAP_POOLING_POOLING_PYRAMID_HPP
