// Copyright Contributors to the aomap Project
// SPDX-License-Identifier: Apache-2.0

#ifndef AOMAP_IO_TUM_HPP
#define AOMAP_IO_TUM_HPP

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aomap/core/frame.hpp"
#include "aomap/io/png_io.hpp"

namespace aomap {

/** TUM convention: 16-bit depth value / 5000 = metres, 0 = no measurement. */
inline float depth_from_tum_raw(std::uint16_t raw) {
  return raw == 0 ? std::numeric_limits<float>::quiet_NaN() : raw / 5000.0f;
}

/**
 * A TUM-format sequence: depth.txt lists timestamped depth images,
 * groundtruth.txt timestamped poses "tx ty tz qx qy qz qw". Depth frames are
 * paired with the nearest pose within the association tolerance; frames
 * without a pose are dropped and counted. Images decode lazily.
 */
class TumSequence {
 public:
  struct Entry {
    double timestamp = 0.0;
    std::string depth_path;
    Pose T_WC;
  };

  std::size_t size() const { return entries_.size(); }
  std::size_t dropped_frames() const { return dropped_; }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }

  FrameInput frame(std::size_t i) const {
    const Entry& e = entries_.at(i);
    const Image<std::uint16_t> raw = read_png_gray16(e.depth_path);
    Image<float> depth(raw.width(), raw.height());
    for (int v = 0; v < raw.height(); ++v) {
      for (int u = 0; u < raw.width(); ++u) depth(u, v) = depth_from_tum_raw(raw(u, v));
    }
    return FrameInput{std::move(depth), e.T_WC, e.timestamp};
  }

  std::vector<Entry> entries_;
  std::size_t dropped_ = 0;
};

namespace tum_detail {

struct TimedPose {
  double timestamp;
  Pose pose;
};

inline std::runtime_error parse_error(const std::string& file, int line, const std::string& msg) {
  return std::runtime_error(file + ":" + std::to_string(line) + ": " + msg);
}

inline std::vector<TimedPose> load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("tum: cannot open '" + path + "'");
  std::vector<TimedPose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw parse_error(path, line_no, "malformed trajectory line");
    Eigen::Quaterniond q(qw, qx, qy, qz);
    const double norm = q.norm();
    if (std::abs(norm - 1.0) >= 1e-3)
      throw parse_error(path, line_no, "quaternion is not normalised");
    poses.push_back({ts, Pose::from_quaternion(Eigen::Vector3d(tx, ty, tz), q)});
  }
  if (poses.empty()) throw std::runtime_error("tum: '" + path + "' contains no poses");
  std::sort(poses.begin(), poses.end(),
            [](const TimedPose& a, const TimedPose& b) { return a.timestamp < b.timestamp; });
  return poses;
}

}  // namespace tum_detail

inline TumSequence load_tum_sequence(const std::string& directory,
                                     double association_tolerance_s = 0.02) {
  const std::string depth_list = directory + "/depth.txt";
  std::ifstream in(depth_list);
  if (!in) throw std::runtime_error("tum: cannot open '" + depth_list + "'");
  const auto poses = tum_detail::load_trajectory(directory + "/groundtruth.txt");

  TumSequence seq;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double ts;
    std::string filename;
    if (!(ss >> ts >> filename))
      throw tum_detail::parse_error(depth_list, line_no, "malformed depth line");

    // nearest pose by timestamp
    const auto it = std::lower_bound(
        poses.begin(), poses.end(), ts,
        [](const tum_detail::TimedPose& p, double t) { return p.timestamp < t; });
    const tum_detail::TimedPose* best = nullptr;
    if (it != poses.end()) best = &*it;
    if (it != poses.begin()) {
      const auto* prev = &*(it - 1);
      if (!best || std::abs(prev->timestamp - ts) < std::abs(best->timestamp - ts)) best = prev;
    }
    if (!best || std::abs(best->timestamp - ts) > association_tolerance_s) {
      ++seq.dropped_;
      continue;
    }
    seq.entries_.push_back({ts, directory + "/" + filename, best->pose});
  }
  return seq;
}

}  // namespace aomap

#endif  // AOMAP_IO_TUM_HPP
