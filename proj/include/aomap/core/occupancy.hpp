// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_CORE_OCCUPANCY_HPP
#define AOMAP_CORE_OCCUPANCY_HPP

#include <algorithm>
#include <cstdint>

namespace aomap {

/**
 * Per-cell fusion record: a weighted mean of per-measurement log-odds values
 * together with the (clamped) number of integrations. weight == 0 means the
 * cell has never been observed.
 */
struct OccupancyState {
  double mean_log_odds = 0.0;
  std::int32_t weight = 0;

  bool observed() const { return weight > 0; }

  /** Accumulated log-odds, the quantity used for free/occupied decisions. */
  double log_odds() const { return mean_log_odds * weight; }

  friend bool operator==(const OccupancyState&, const OccupancyState&) = default;
};

/**
 * Fuse one measurement log-odds value into a cell.
 *
 * The mean is updated as (mean * w + l) / (w + 1) while w < w_max; once the
 * weight is saturated the window keeps sliding with an effective history of
 * w_max - 1 samples. The accumulated log-odds mean * weight is clamped to
 * [l_min_total, -l_min_total].
 */
inline void fuse_cell(OccupancyState& state, double l, std::int32_t w_max, double l_min_total) {
  const std::int32_t w_eff = std::min(state.weight, w_max - 1);
  state.mean_log_odds = (state.mean_log_odds * w_eff + l) / (w_eff + 1);
  state.weight = std::min(state.weight + 1, w_max);
  const double mean_floor = l_min_total / state.weight;
  state.mean_log_odds = std::clamp(state.mean_log_odds, mean_floor, -mean_floor);
}

}  // namespace aomap

#endif  // AOMAP_CORE_OCCUPANCY_HPP
