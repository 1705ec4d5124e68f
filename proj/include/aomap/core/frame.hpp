// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_CORE_FRAME_HPP
#define AOMAP_CORE_FRAME_HPP

#include "aomap/core/image.hpp"
#include "aomap/sensor/sensor.hpp"

namespace aomap {

/** One posed depth measurement: z-depths in metres, invalid pixels <= 0 or NaN. */
struct FrameInput {
  Image<float> depth;
  Pose T_WC;
  double timestamp = 0.0;
};

}  // namespace aomap

#endif  // AOMAP_CORE_FRAME_HPP
