// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_SENSOR_INVERSE_MODEL_HPP
#define AOMAP_SENSOR_INVERSE_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include "aomap/sensor/sensor.hpp"

namespace aomap {

/**
 * Piecewise-linear per-measurement occupancy log-odds as a function of the
 * z-depth difference d_r = r - z between the query point and the measured
 * surface:
 *
 *   d_r <= -3*sigma(z)            -> l_min_iter (clipped free)
 *   -3*sigma(z) < d_r <= tau(z)/2 -> ramp through zero at the surface
 *   d_r > tau(z)/2                -> no update (occluded)
 */
inline std::optional<double> inverse_model(const SensorSpec& spec, double d_r, double z) {
  const double sigma = spec.sigma(z);
  if (d_r > 0.5 * spec.tau(z)) return std::nullopt;
  if (d_r <= -3.0 * sigma) return spec.l_min_iter;
  return -spec.l_min_iter / (3.0 * sigma) * d_r;
}

struct ModelSpan {
  double l_low = 0.0;
  double l_high = 0.0;
  bool any_no_update = false;
  bool empty = false;  // the whole rectangle is behind the measurements
};

/**
 * Conservative bounds on inverse_model over query depths [r_min, r_max] and
 * measured depths [z_min, z_max].
 *
 * For each measured depth the extremes in r sit at r_min and at the defined
 * end min(r_max, z + tau(z)/2) because l is monotone in d_r. Across z the
 * bound l(z) is piecewise monotone between the clamp breakpoints of sigma and
 * tau and the crossover where the occlusion boundary enters the rectangle
 * (SensorSpec::validate() keeps the noise slope below the query slope), so
 * evaluating the interval ends plus those breakpoints is sound.
 */
inline ModelSpan model_span(const SensorSpec& spec, double r_min, double r_max, double z_min,
                            double z_max) {
  ModelSpan span;
  span.any_no_update = r_max > z_min + 0.5 * spec.tau(z_min);
  if (r_min > z_max + 0.5 * spec.tau(z_max)) {
    span.any_no_update = true;
    span.empty = true;
    return span;
  }

  std::array<double, 8> candidates;
  std::size_t n = 0;
  candidates[n++] = z_min;
  candidates[n++] = z_max;
  const auto add = [&](double z) {
    if (z > z_min && z < z_max) candidates[n++] = z;
  };
  if (spec.noise_coeff > 0.0) {
    if (spec.noise_model == NoiseModel::kQuadratic) {
      add(std::sqrt(spec.sigma_min / spec.noise_coeff));
      add(std::sqrt(spec.sigma_max / spec.noise_coeff));
    } else {
      add(spec.sigma_min / spec.noise_coeff);
      add(spec.sigma_max / spec.noise_coeff);
    }
  }
  if (spec.tau_coeff > 0.0) {
    add(spec.tau_min / spec.tau_coeff);
    add(spec.tau_max / spec.tau_coeff);
  }
  {
    // z where the occlusion boundary z + tau(z)/2 crosses r_max (monotone)
    double lo = z_min, hi = z_max;
    if (z_min + 0.5 * spec.tau(z_min) < r_max && r_max < z_max + 0.5 * spec.tau(z_max)) {
      for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid + 0.5 * spec.tau(mid) < r_max ? lo : hi) = mid;
      }
      add(lo);
      add(hi);
    }
  }

  bool first = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = candidates[i];
    const double tau_half = 0.5 * spec.tau(z);
    const double d_hi = std::min(r_max - z, tau_half);
    const double l_hi = *inverse_model(spec, d_hi, z);
    if (first) {
      span.l_low = span.l_high = l_hi;
      first = false;
    }
    span.l_high = std::max(span.l_high, l_hi);
    span.l_low = std::min(span.l_low, l_hi);
    if (r_min - z <= tau_half) {
      const double l_lo = *inverse_model(spec, r_min - z, z);
      span.l_low = std::min(span.l_low, l_lo);
      span.l_high = std::max(span.l_high, l_lo);
    }
  }
  return span;
}

}  // namespace aomap

#endif  // AOMAP_SENSOR_INVERSE_MODEL_HPP
