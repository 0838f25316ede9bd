#pragma once

#include <cmath>

#include "nlos/nlos.hpp"

namespace nlos::fixtures {

// A wall about 1.2 m away, tilted a few degrees off the optical axis.
inline Eigen::Vector3d tilted_coeffs() {
  const Eigen::Vector3d away = Eigen::Vector3d(0.1, -0.05, 1.0).normalized();
  return -away / 1.2;
}

inline RelayPlane tilted_wall() {
  const Eigen::Vector3d w = tilted_coeffs();
  return build_wall_frame(w, foot_of_origin(w));
}

inline GalvoModel skewed_galvo() {
  GalvoModel g;
  g.eps = Vec2(deg_to_rad(0.3), deg_to_rad(-0.2));
  g.beta << deg_to_rad(6.5), deg_to_rad(1.5), deg_to_rad(-1.2), deg_to_rad(6.8);
  return g;
}

inline RigConfig test_rig() {
  RigConfig cfg;
  cfg.true_galvo = skewed_galvo();
  cfg.true_plane = tilted_wall();
  return cfg;
}

}  // namespace nlos::fixtures
