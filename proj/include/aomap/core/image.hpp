// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_CORE_IMAGE_HPP
#define AOMAP_CORE_IMAGE_HPP

#include <cassert>
#include <cstddef>
#include <vector>

namespace aomap {

/** Dense row-major 2D image. */
template <typename T>
class Image {
 public:
  Image() = default;

  Image(int width, int height, T fill = T())
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int u, int v) {
    assert(u >= 0 && u < width_ && v >= 0 && v < height_);
    return data_[static_cast<std::size_t>(v) * width_ + u];
  }
  const T& operator()(int u, int v) const {
    assert(u >= 0 && u < width_ && v >= 0 && v < height_);
    return data_[static_cast<std::size_t>(v) * width_ + u];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

}  // namespace aomap

#endif  // AOMAP_CORE_IMAGE_HPP
