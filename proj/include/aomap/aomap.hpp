// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_AOMAP_HPP
#define AOMAP_AOMAP_HPP

#include "aomap/core/frame.hpp"
#include "aomap/core/geometry.hpp"
#include "aomap/core/image.hpp"
#include "aomap/core/node.hpp"
#include "aomap/core/occupancy.hpp"
#include "aomap/core/octree.hpp"
#include "aomap/core/serialize.hpp"
#include "aomap/integrator/integrator.hpp"
#include "aomap/io/config.hpp"
#include "aomap/io/scene.hpp"
#include "aomap/io/tum.hpp"
#include "aomap/mesh/meshing.hpp"
#include "aomap/pooling/pooling_pyramid.hpp"
#include "aomap/query/queries.hpp"
#include "aomap/reference/dense_oracle.hpp"
#include "aomap/sensor/inverse_model.hpp"
#include "aomap/sensor/sensor.hpp"

#endif  // AOMAP_AOMAP_HPP
