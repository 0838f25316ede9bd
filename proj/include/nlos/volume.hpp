#pragma once

// Axis-aligned voxel albedo grid in wall coordinates, plus the built-in
// hidden scenes used by the simulator.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlos/error.hpp"
#include "nlos/geometry.hpp"

namespace nlos {

struct BoxExtents {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Ones();
  Eigen::Vector3d size() const { return max - min; }
};

class VoxelVolume {
 public:
  VoxelVolume() = default;
  VoxelVolume(std::array<int, 3> dims, BoxExtents bbox) : dims_(dims), bbox_(bbox) {
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
      fail(ErrorCode::invalid_argument, "volume dims must be >= 1 per axis");
    }
    if (!((bbox.max - bbox.min).array() > 0.0).all()) {
      fail(ErrorCode::invalid_argument, "volume bbox needs positive extent per axis");
    }
    data_.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0.0);
  }

  const std::array<int, 3>& dims() const { return dims_; }
  const BoxExtents& bbox() const { return bbox_; }
  std::size_t size() const { return data_.size(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Linear index, x fastest.
  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(dims_[1]) * iz);
  }
  std::array<int, 3> coords(std::size_t i) const {
    const int ix = static_cast<int>(i % dims_[0]);
    const int iy = static_cast<int>((i / dims_[0]) % dims_[1]);
    const int iz = static_cast<int>(i / (static_cast<std::size_t>(dims_[0]) * dims_[1]));
    return {ix, iy, iz};
  }
  Eigen::Vector3d voxel_size() const {
    return bbox_.size().cwiseQuotient(Eigen::Vector3d(dims_[0], dims_[1], dims_[2]));
  }
  Point3 center(int ix, int iy, int iz) const {
    const Eigen::Vector3d h = voxel_size();
    return bbox_.min + Eigen::Vector3d((ix + 0.5) * h.x(), (iy + 0.5) * h.y(), (iz + 0.5) * h.z());
  }
  Point3 center(std::size_t i) const {
    const auto c = coords(i);
    return center(c[0], c[1], c[2]);
  }

  /// Throws unless every albedo is finite and non-negative.
  void validate() const {
    for (double v : data_) {
      if (!std::isfinite(v) || v < 0.0) {
        fail(ErrorCode::domain, "volume albedo must be finite and non-negative");
      }
    }
  }

  double max_value() const {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
  }

 private:
  std::array<int, 3> dims_{1, 1, 1};
  BoxExtents bbox_;
  std::vector<double> data_ = std::vector<double>(1, 0.0);
};

/// 2D reflectance mask of a built-in target in its own centered (u, v)
/// coordinates, meters. Returns 1 inside, 0 outside.
inline double scene_mask(const std::string& name, double u, double v) {
  const auto in = [&](double u0, double u1, double v0, double v1) {
    return u >= u0 && u <= u1 && v >= v0 && v <= v1;
  };
  if (name == "whiteboard") return in(-0.3, 0.3, -0.2, 0.2) ? 1.0 : 0.0;
  if (name == "s-shape") {
    constexpr double w = 0.12;
    const bool s = in(-0.3, 0.3, 0.3 - w, 0.3) || in(-0.3, 0.3, -w / 2, w / 2) ||
                   in(-0.3, 0.3, -0.3, -0.3 + w) || in(-0.3, -0.3 + w, 0.0, 0.3) ||
                   in(0.3 - w, 0.3, -0.3, 0.0);
    return s ? 1.0 : 0.0;
  }
  if (name == "checkerboard") {
    if (!in(-0.4, 0.4, -0.4, 0.4)) return 0.0;
    const int i = std::min(3, static_cast<int>((u + 0.4) / 0.2));
    const int j = std::min(3, static_cast<int>((v + 0.4) / 0.2));
    return (i + j) % 2 == 0 ? 1.0 : 0.0;
  }
  if (name == "reso-board") {
    if (!in(-0.4, 0.4, -0.4, 0.4)) return 0.0;
    // Upper half: vertical bars of decreasing width; lower half: horizontal bars.
    constexpr std::array<double, 4> widths{0.08, 0.05, 0.03, 0.02};
    if (v >= 0.0) {
      double x = -0.38;
      for (double w : widths) {
        if (u >= x && u < x + w) return 1.0;
        x += 2.0 * w + 0.03;
      }
      return 0.0;
    }
    double y = -0.02;
    for (double w : widths) {
      if (v <= y && v > y - w && u >= -0.38 && u <= 0.38) return 1.0;
      y -= 2.0 * w + 0.02;
    }
    return 0.0;
  }
  fail(ErrorCode::invalid_argument, "unknown built-in scene '" + name + "'");
}

inline bool is_builtin_scene(const std::string& name) {
  return name == "whiteboard" || name == "s-shape" || name == "checkerboard" ||
         name == "reso-board";
}

/// Rasterizes a built-in planar target, parallel to the wall at `depth`
/// (wall-frame z), into the voxel slice whose center is nearest that depth.
/// Albedo is the covered fraction of each voxel footprint (4x4 supersampling).
inline VoxelVolume make_scene(const std::string& name, std::array<int, 3> dims,
                              const BoxExtents& bbox, double depth = 0.8) {
  if (!is_builtin_scene(name)) fail(ErrorCode::invalid_argument, "unknown built-in scene '" + name + "'");
  VoxelVolume vol(dims, bbox);
  const Eigen::Vector3d h = vol.voxel_size();
  const int iz = std::clamp(static_cast<int>(std::floor((depth - bbox.min.z()) / h.z())), 0,
                            dims[2] - 1);
  constexpr int kSub = 4;
  for (int iy = 0; iy < dims[1]; ++iy) {
    for (int ix = 0; ix < dims[0]; ++ix) {
      double covered = 0.0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double u = bbox.min.x() + (ix + (sx + 0.5) / kSub) * h.x();
          const double v = bbox.min.y() + (iy + (sy + 0.5) / kSub) * h.y();
          covered += scene_mask(name, u, v);
        }
      }
      vol[vol.index(ix, iy, iz)] = covered / (kSub * kSub);
    }
  }
  return vol;
}

}  // namespace nlos
