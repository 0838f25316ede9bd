#pragma once

// Detection-point layouts on the relay wall and their compilation to
// galvanometer voltages.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nlos/error.hpp"
#include "nlos/galvo.hpp"
#include "nlos/geometry.hpp"
#include "nlos/parallel.hpp"

namespace nlos {

enum class PatternKind { grid, circles, arbitrary };

inline std::string to_string(PatternKind k) {
  switch (k) {
    case PatternKind::grid: return "grid";
    case PatternKind::circles: return "circles";
    case PatternKind::arbitrary: return "arbitrary";
  }
  return "arbitrary";
}

inline PatternKind pattern_kind_from_string(const std::string& s) {
  if (s == "grid") return PatternKind::grid;
  if (s == "circles") return PatternKind::circles;
  if (s == "arbitrary") return PatternKind::arbitrary;
  fail(ErrorCode::format, "unknown pattern kind '" + s + "'");
}

struct ScanPattern {
  PatternKind kind = PatternKind::arbitrary;
  std::vector<Vec2> points;               ///< wall-frame (x, y), meters
  std::map<std::string, double> params;   ///< grid: n, l; circles: n_r, n_phi, r
  std::string source;                     ///< file name for arbitrary patterns

  std::size_t size() const { return points.size(); }
};

/// Distance below which two pattern points count as duplicates.
inline constexpr double kDuplicateTolerance = 1e-9;

/// Rejects empty patterns and duplicated points.
inline void validate_pattern(const ScanPattern& pattern) {
  if (pattern.points.empty()) fail(ErrorCode::invalid_argument, "scan pattern is empty");
  std::vector<std::size_t> order(pattern.points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto& pts = pattern.points;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].x() < pts[b].x() || (pts[a].x() == pts[b].x() && pts[a].y() < pts[b].y());
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Vec2& p = pts[order[k]];
    if (!p.allFinite()) fail(ErrorCode::invalid_argument, "pattern point is not finite");
    for (std::size_t m = k + 1; m < order.size(); ++m) {
      const Vec2& q = pts[order[m]];
      if (q.x() - p.x() > kDuplicateTolerance) break;
      if ((q - p).norm() <= kDuplicateTolerance) {
        fail(ErrorCode::invalid_argument,
             "duplicate scan points at indices " + std::to_string(order[k]) + " and " +
                 std::to_string(order[m]));
      }
    }
  }
}

/// N x N grid over an L x L square centered on the wall origin, row-major,
/// starting at the top-left corner (-L/2, +L/2).
inline ScanPattern gen_grid(int n, double l) {
  if (n < 2) fail(ErrorCode::invalid_argument, "grid needs N >= 2");
  if (!(l > 0.0)) fail(ErrorCode::invalid_argument, "grid side L must be positive");
  ScanPattern p;
  p.kind = PatternKind::grid;
  p.params = {{"n", n}, {"l", l}};
  p.points.reserve(static_cast<std::size_t>(n) * n);
  const double step = l / (n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      p.points.emplace_back(-l / 2 + j * step, l / 2 - i * step);
    }
  }
  return p;
}

/// N_r concentric circles of N_phi points each, the outermost of radius R.
/// The first point of each circle sits at the top and the sweep runs clockwise.
inline ScanPattern gen_circles(int n_r, int n_phi, double r) {
  if (n_r < 1 || n_phi < 1) fail(ErrorCode::invalid_argument, "circles need N_r, N_phi >= 1");
  if (!(r > 0.0)) fail(ErrorCode::invalid_argument, "circle radius must be positive");
  ScanPattern p;
  p.kind = PatternKind::circles;
  p.params = {{"n_r", n_r}, {"n_phi", n_phi}, {"r", r}};
  p.points.reserve(static_cast<std::size_t>(n_r) * n_phi);
  for (int i = 1; i <= n_r; ++i) {
    const double radius = static_cast<double>(i) / n_r * r;
    for (int j = 1; j <= n_phi; ++j) {
      const double phi = std::numbers::pi / 2 - (j - 1) * 2 * std::numbers::pi / n_phi;
      p.points.emplace_back(radius * std::cos(phi), radius * std::sin(phi));
    }
  }
  return p;
}

/// One commanded detection point.
struct ScanPoint {
  Vec2 wall_xy = Vec2::Zero();      ///< wall frame, m
  Point3 world = Point3::Zero();    ///< world frame, m
  ScanAngles angles;                ///< rad
  Vec2 voltages = Vec2::Zero();     ///< V
};

struct PointFailure {
  std::size_t index = 0;
  ErrorCode code = ErrorCode::out_of_range;
  std::string message;
};

struct CompiledPattern {
  std::vector<ScanPoint> points;        ///< same order as the pattern
  std::vector<PointFailure> failures;   ///< empty when every point compiled
  bool ok() const { return failures.empty(); }
};

/// Optical scan range of the galvanometer, per axis.
inline constexpr double kMaxScanAngle = 40.0 * std::numbers::pi / 180.0;

/// Maps wall points to world coordinates, scan angles and input voltages.
/// Points that leave the +-40 degree scan range or the voltage box are
/// reported in `failures`; their entry in `points` keeps the clamped voltages.
inline CompiledPattern compile_pattern(const ScanPattern& pattern, const RelayPlane& plane,
                                       const GalvoModel& galvo) {
  validate_pattern(pattern);
  if (!galvo.invertible()) fail(ErrorCode::degenerate, "galvo beta is not invertible");

  CompiledPattern out;
  out.points.resize(pattern.size());
  std::vector<std::optional<PointFailure>> slot(pattern.size());
  parallel_for(pattern.size(), [&](std::size_t i) {
    ScanPoint& sp = out.points[i];
    sp.wall_xy = pattern.points[i];
    sp.world = wall_to_world(plane, sp.wall_xy);
    try {
      sp.angles = point_to_angles(sp.world);
      if (std::abs(sp.angles.theta_x) > kMaxScanAngle ||
          std::abs(sp.angles.theta_y) > kMaxScanAngle) {
        std::ostringstream msg;
        msg << "point " << i << " needs scan angles (" << rad_to_deg(sp.angles.theta_x) << ", "
            << rad_to_deg(sp.angles.theta_y) << ") deg, beyond +-40 deg";
        slot[i] = PointFailure{i, ErrorCode::out_of_range, msg.str()};
      }
      sp.voltages = angles_to_voltages(galvo, sp.angles);
    } catch (const VoltageRangeError& e) {
      sp.voltages = e.clamped();
      if (!slot[i]) slot[i] = PointFailure{i, e.code(), e.what()};
    } catch (const Error& e) {
      slot[i] = PointFailure{i, e.code(), e.what()};
    }
  });
  for (auto& f : slot) {
    if (f) out.failures.push_back(std::move(*f));
  }
  return out;
}

/// Acquisition order that sweeps grid rows alternately left-right and
/// right-left. Only a permutation; stored data keeps pattern order.
inline std::vector<std::size_t> serpentine_order(const ScanPattern& pattern) {
  std::vector<std::size_t> order(pattern.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (pattern.kind != PatternKind::grid) return order;
  const auto n = static_cast<std::size_t>(pattern.params.at("n"));
  for (std::size_t row = 1; row < n; row += 2) {
    std::reverse(order.begin() + static_cast<std::ptrdiff_t>(row * n),
                 order.begin() + static_cast<std::ptrdiff_t>((row + 1) * n));
  }
  return order;
}

}  // namespace nlos
