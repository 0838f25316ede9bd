#pragma once

// Coordinate frames shared by the rest of the toolkit.
//
// World frame XYZ: origin o at the galvanometer exit pupil, Z pointing at the
// relay wall. Wall frame xyz: origin o_s on the wall, z along the wall normal
// (towards the rig), x/y spanning the wall. Angles are radians in memory.

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "nlos/error.hpp"

namespace nlos {

using Point3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

/// Speed of light in vacuum, m/s.
inline constexpr double kSpeedOfLight = 299'792'458.0;
/// Speed of light in m/ps.
inline constexpr double kMetersPerPs = kSpeedOfLight * 1e-12;

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct ScanAngles {
  double theta_x = 0.0;
  double theta_y = 0.0;

  Vec2 vec() const { return {theta_x, theta_y}; }
  static ScanAngles from(const Vec2& v) { return {v.x(), v.y()}; }
};

enum class Direction { world_to_wall, wall_to_world };

/// Planar relay wall W_X X + W_Y Y + W_Z Z + 1 = 0 with an attached
/// orthonormal frame. Construct through build_wall_frame().
class RelayPlane {
 public:
  const Eigen::Vector3d& coeffs() const { return coeffs_; }
  double wx() const { return coeffs_.x(); }
  double wy() const { return coeffs_.y(); }
  double wz() const { return coeffs_.z(); }
  const Point3& origin() const { return origin_; }
  Eigen::Vector3d basis_x() const { return basis_.col(0); }
  Eigen::Vector3d basis_y() const { return basis_.col(1); }
  Eigen::Vector3d basis_z() const { return basis_.col(2); }
  /// Columns are basis_x, basis_y, basis_z in world coordinates.
  const Eigen::Matrix3d& basis() const { return basis_; }

  /// Unit normal (w_X, w_Y, w_Z); points towards the world origin.
  Eigen::Vector3d unit_normal() const { return coeffs_.normalized(); }
  /// Signed value of the plane equation, W.p + 1.
  double equation(const Point3& p) const { return coeffs_.dot(p) + 1.0; }
  /// Orthogonal point-to-plane distance |W.p + 1| / |W|.
  double distance(const Point3& p) const { return std::abs(equation(p)) / coeffs_.norm(); }
  /// Distance from the world origin to the plane.
  double offset() const { return 1.0 / coeffs_.norm(); }

 private:
  friend RelayPlane build_wall_frame(const Eigen::Vector3d&, const Point3&);
  RelayPlane(Eigen::Vector3d c, Point3 o, Eigen::Matrix3d b)
      : coeffs_(std::move(c)), origin_(std::move(o)), basis_(std::move(b)) {}

  Eigen::Vector3d coeffs_;
  Point3 origin_;
  Eigen::Matrix3d basis_;
};

/// Minimum representable distance between the world origin and the wall.
inline constexpr double kMinPlaneOffset = 1e-3;

/// Builds the wall frame from raw plane coefficients and a frame origin on
/// the plane. basis_z is the unit normal; basis_x follows the closed form
/// (w_Z, 0, -w_X)/sqrt(w_X^2 + w_Z^2) unless w_X or w_Z is (near) zero, in
/// which case the world X axis (or Y, if X is near-normal) is projected onto
/// the plane instead.
inline RelayPlane build_wall_frame(const Eigen::Vector3d& coeffs, const Point3& origin) {
  if (!coeffs.allFinite() || !origin.allFinite()) {
    fail(ErrorCode::invalid_plane, "plane coefficients and origin must be finite");
  }
  const double norm = coeffs.norm();
  if (norm == 0.0) fail(ErrorCode::invalid_plane, "plane coefficients are all zero");
  if (1.0 / norm < kMinPlaneOffset) {
    fail(ErrorCode::invalid_plane, "plane passes within 1 mm of the world origin");
  }
  const Eigen::Vector3d w = coeffs / norm;
  const double residual = std::abs(coeffs.dot(origin) + 1.0) / norm;
  if (residual > 1e-6) {
    std::ostringstream msg;
    msg << "frame origin is " << residual << " m off the plane";
    fail(ErrorCode::invalid_plane, msg.str());
  }

  constexpr double kDegenerate = 1e-6;
  Eigen::Vector3d bx;
  if (std::abs(w.x()) >= kDegenerate && std::abs(w.z()) >= kDegenerate) {
    // (1/w_X, 0, -1/w_Z) normalized, which equals (w_Z, 0, -w_X) up to sign.
    const Eigen::Vector3d raw(1.0 / w.x(), 0.0, -1.0 / w.z());
    bx = raw / std::sqrt(1.0 / (w.x() * w.x()) + 1.0 / (w.z() * w.z()));
  } else {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
    if (std::abs(w.dot(axis)) > 0.9) axis = Eigen::Vector3d::UnitY();
    bx = (axis - w.dot(axis) * w).normalized();
  }
  const Eigen::Vector3d by = w.cross(bx).normalized();
  Eigen::Matrix3d basis;
  basis.col(0) = bx;
  basis.col(1) = by;
  basis.col(2) = w;
  return RelayPlane(coeffs, origin, basis);
}

/// Orthogonal projection of the world origin onto the plane.
inline Point3 foot_of_origin(const Eigen::Vector3d& coeffs) {
  return -coeffs / coeffs.squaredNorm();
}

/// Detection point from scan angles and path length ell = |s - o|.
inline Point3 angles_to_point(const ScanAngles& angles, double ell) {
  if (!(ell > 0.0) || !std::isfinite(ell)) {
    fail(ErrorCode::domain, "path length must be positive and finite");
  }
  const double tx = std::tan(angles.theta_x);
  const double ty = std::tan(angles.theta_y);
  const double z = ell / std::sqrt(1.0 + tx * tx + ty * ty);
  Point3 p(z * tx, z * ty, z);
  if (!p.allFinite() || std::abs(angles.theta_x) >= std::numbers::pi / 2 ||
      std::abs(angles.theta_y) >= std::numbers::pi / 2) {
    fail(ErrorCode::domain, "scan angle at or beyond +-90 degrees");
  }
  return p;
}

/// Inverse of angles_to_point for the direction part: theta = atan(X/Z), atan(Y/Z).
inline ScanAngles point_to_angles(const Point3& p) {
  if (!(p.z() > 0.0)) fail(ErrorCode::domain, "point must lie in front of the scanner (Z > 0)");
  return {std::atan(p.x() / p.z()), std::atan(p.y() / p.z())};
}

inline Point3 transform_point(const RelayPlane& plane, const Point3& p, Direction dir) {
  if (dir == Direction::world_to_wall) {
    return plane.basis().transpose() * (p - plane.origin());
  }
  return plane.origin() + plane.basis() * p;
}

inline Point3 wall_to_world(const RelayPlane& plane, const Vec2& xy) {
  return plane.origin() + plane.basis_x() * xy.x() + plane.basis_y() * xy.y();
}

/// Orthogonal projection of s onto the wall.
inline Point3 project_onto_plane(const RelayPlane& plane, const Point3& s) {
  const Eigen::Vector3d n = plane.basis_z();
  return s - n.dot(s - plane.origin()) * n;
}

}  // namespace nlos
