#pragma once

// Online calibration from the direct (LOS) wall return: relay-plane fit,
// measurable bounding box of the hidden scene, and timing-jitter fit.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "nlos/error.hpp"
#include "nlos/galvo.hpp"
#include "nlos/geometry.hpp"
#include "nlos/jitter.hpp"
#include "nlos/optim.hpp"
#include "nlos/parallel.hpp"
#include "nlos/transient.hpp"

namespace nlos {

// ---------------------------------------------------------------------------
// Relay plane

/// Root-mean-square point-to-plane distance for W.p + 1 = 0.
inline double plane_rmse(const Eigen::Vector3d& w, std::span<const Point3> points) {
  const double norm2 = w.squaredNorm();
  double sum = 0.0;
  for (const auto& p : points) {
    const double r = w.dot(p) + 1.0;
    sum += r * r / norm2;
  }
  return std::sqrt(sum / static_cast<double>(points.size()));
}

struct PlaneFit {
  RelayPlane plane;
  double rmse = 0.0;            ///< m
  double seed_rmse = 0.0;       ///< m, total-least-squares seed before refinement
  int refine_evaluations = 0;
};

/// Fits W.p + 1 = 0 to the points by minimizing the RMS point-to-plane
/// distance: closed-form total least squares, then simplex refinement of W.
/// The frame origin is the centroid projected onto the fitted plane unless
/// `origin_hint` is given (it is projected too).
inline PlaneFit fit_plane(std::span<const Point3> points,
                          std::optional<Point3> origin_hint = std::nullopt) {
  if (points.size() < 3) fail(ErrorCode::degenerate, "plane fit needs at least 3 points");
  Point3 centroid = Point3::Zero();
  for (const auto& p : points) {
    if (!p.allFinite()) fail(ErrorCode::domain, "plane fit point is not finite");
    if (p.norm() < kMinPlaneOffset) fail(ErrorCode::invalid_plane, "plane fit point at the world origin");
    centroid += p;
  }
  centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
  if (!(ev(1) > 1e-12 * std::max(ev(2), 1e-300))) {
    fail(ErrorCode::degenerate, "plane fit points are collinear");
  }
  const Eigen::Vector3d normal = eig.eigenvectors().col(0);
  const double offset = normal.dot(centroid);
  if (std::abs(offset) < kMinPlaneOffset) {
    fail(ErrorCode::invalid_plane, "fitted plane passes through the world origin");
  }
  const Eigen::Vector3d seed = -normal / offset;

  PlaneFit fit{build_wall_frame(seed, foot_of_origin(seed)), 0.0, plane_rmse(seed, points), 0};
  SimplexOptions opt;
  opt.max_evals = 600;
  opt.f_tol = 0.0;
  opt.x_tol = 1e-14 * seed.norm();
  const auto objective = [&](const Eigen::VectorXd& w) {
    if (w.norm() * kMinPlaneOffset > 1.0) return std::numeric_limits<double>::infinity();
    return plane_rmse(w, points);
  };
  const Eigen::VectorXd steps = Eigen::VectorXd::Constant(3, 1e-6 * seed.norm());
  const SimplexResult polished = nelder_mead(objective, seed, opt, steps);
  fit.refine_evaluations = polished.evaluations;
  const Eigen::Vector3d w = polished.value < fit.seed_rmse ? Eigen::Vector3d(polished.x) : seed;

  const Point3 anchor = origin_hint ? *origin_hint : centroid;
  const Point3 origin = anchor - (w.dot(anchor) + 1.0) / w.squaredNorm() * w;
  fit.plane = build_wall_frame(w, origin);
  fit.rmse = plane_rmse(w, points);
  return fit;
}

/// Depth along the scan ray from the (refined) LOS peak, minus a known
/// system delay (e.g. the jitter peak offset).
inline double los_depth(const TransientHistogram& h, const LosPeak& peak, double delay_ps = 0.0) {
  return 0.5 * kMetersPerPs * (h.time_of(peak.refined()) - delay_ps);
}

struct DetectionPoints {
  std::vector<Point3> points;
  std::vector<double> depths;  ///< m
  std::vector<LosPeak> peaks;
};

/// World coordinates of every detection point from galvo angles and the LOS
/// depth. `delay_ps` is subtracted from the peak time before conversion.
inline DetectionPoints detection_points(const TransientDataset& ds, const GalvoModel& galvo,
                                        double delay_ps = 0.0) {
  DetectionPoints out;
  out.points.resize(ds.size());
  out.depths.resize(ds.size());
  out.peaks.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.peaks[i] = find_los_peak(ds.histograms[i]);
    out.depths[i] = los_depth(ds.histograms[i], out.peaks[i], delay_ps);
    const ScanAngles angles = voltages_to_angles(galvo, ds.points[i].voltages);
    out.points[i] = angles_to_point(angles, out.depths[i]);
  }
  return out;
}

/// Peak position of the sampled jitter kernel in ps, parabolically refined.
inline double kernel_peak_delay(const DiscreteKernel& kernel, double bin_width_ps) {
  const auto it = std::max_element(kernel.values.begin(), kernel.values.end());
  const auto k = static_cast<std::size_t>(it - kernel.values.begin());
  return (kernel.offset + static_cast<double>(k) + parabolic_offset(kernel.values, k)) * bin_width_ps;
}

// ---------------------------------------------------------------------------
// Bounding box

struct ScanRegion {
  double x_min = -0.4, x_max = 0.4;
  double y_min = -0.4, y_max = 0.4;

  static ScanRegion of(std::span<const Vec2> pts) {
    if (pts.empty()) fail(ErrorCode::invalid_argument, "scan region needs points");
    ScanRegion r{pts[0].x(), pts[0].x(), pts[0].y(), pts[0].y()};
    for (const auto& p : pts) {
      r.x_min = std::min(r.x_min, p.x());
      r.x_max = std::max(r.x_max, p.x());
      r.y_min = std::min(r.y_min, p.y());
      r.y_max = std::max(r.y_max, p.y());
    }
    return r;
  }
};

struct BoundingBox {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  double z_min = 0, z_max = 0;  ///< m
  BoxExtents extents() const { return {{x_min, y_min, z_min}, {x_max, y_max, z_max}}; }
};

enum class ZMinRule {
  literal,    ///< z_min = c * t_delay
  roundtrip,  ///< z_min = c * t_delay / 2
};

/// Depth limits of the measurable hidden region: z_min from the gate delay,
/// z_max = (2 Gamma_min / (3 b))^(1/4) from the weakest detection point.
inline BoundingBox estimate_bbox(const ScanRegion& region, double gamma_min, double bias,
                                 double t_delay_ps, ZMinRule rule = ZMinRule::literal) {
  if (!(bias > 0.0)) fail(ErrorCode::domain, "bias must be positive");
  if (!(t_delay_ps >= 0.0)) fail(ErrorCode::domain, "gate delay must be non-negative");
  if (!(gamma_min > 0.0)) fail(ErrorCode::degenerate, "minimum Gamma is zero");
  BoundingBox box{region.x_min, region.x_max, region.y_min, region.y_max, 0.0, 0.0};
  box.z_min = kMetersPerPs * t_delay_ps * (rule == ZMinRule::roundtrip ? 0.5 : 1.0);
  box.z_max = std::pow(2.0 * gamma_min / (3.0 * bias), 0.25);
  if (!(box.z_max > box.z_min)) {
    std::ostringstream msg;
    msg << "empty bounding box: z_max=" << box.z_max << " m <= z_min=" << box.z_min << " m";
    fail(ErrorCode::empty_box, msg.str());
  }
  return box;
}

inline BoundingBox estimate_bbox(const ScanRegion& region, const GammaMap& gamma, double bias,
                                 double t_delay_ps, ZMinRule rule = ZMinRule::literal) {
  if (gamma.size() == 0) fail(ErrorCode::invalid_argument, "Gamma map is empty");
  return estimate_bbox(region, gamma.min_value(), bias, t_delay_ps, rule);
}

// ---------------------------------------------------------------------------
// Timing jitter

struct JitterFitOptions {
  int restarts = 5;
  int max_evals = 3000;
  double min_counts = 1000.0;
  /// Normalize the model over the fitted bins before taking the log.
  bool normalize_model = true;
  /// Background per bin removed from the LOS counts before fitting.
  double bias = 0.0;
};

/// One LOS histogram prepared for the cross-entropy objective.
struct JitterTarget {
  std::vector<double> t_ps;     ///< time since the direct return, per used bin
  std::vector<double> weights;  ///< counts / Gamma, sums to one
};

inline JitterTarget make_jitter_target(const TransientHistogram& los, double arrival_ps,
                                       const JitterFitOptions& opt) {
  JitterTarget tgt;
  double total = 0.0;
  std::size_t first = los.size(), last = 0;
  for (std::size_t k = 0; k < los.size(); ++k) {
    if (los.counts[k] > 0.0) {
      first = std::min(first, k);
      last = k;
    }
  }
  if (first > last) fail(ErrorCode::low_signal, "LOS histogram is empty");
  for (std::size_t k = first; k <= last; ++k) {
    const double c = std::max(0.0, los.counts[k] - opt.bias);
    tgt.t_ps.push_back(los.time_of(static_cast<double>(k)) - arrival_ps);
    tgt.weights.push_back(c);
    total += c;
  }
  if (total < opt.min_counts) {
    std::ostringstream msg;
    msg << "LOS histogram has " << total << " counts, below " << opt.min_counts;
    fail(ErrorCode::low_signal, msg.str());
  }
  for (double& w : tgt.weights) w /= total;
  return tgt;
}

/// Cross-entropy -sum w_k log j(t_k) between the normalized counts and the
/// jitter model (itself normalized over the same bins when requested).
inline double jitter_cross_entropy(const JitterParams& p, const JitterTarget& tgt,
                                   bool normalize_model = true) {
  constexpr double kFloor = 1e-300;
  std::vector<double> model(tgt.t_ps.size());
  double z = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) {
    const double t = tgt.t_ps[k];
    double v = jitter_gauss(p, t);
    if (p.gamma_w > 0.0 && t > 0.0) v += p.gamma_w * jitter_tail(p, t);
    model[k] = v;
    z += v;
  }
  if (!normalize_model) z = 1.0;
  if (!(z > 0.0)) return std::numeric_limits<double>::infinity();
  double loss = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) {
    if (tgt.weights[k] == 0.0) continue;
    loss -= tgt.weights[k] * std::log(std::max(model[k] / z, kFloor));
  }
  return loss;
}

struct JitterPointFit {
  JitterParams params;
  double loss = 0.0;
  bool converged = false;
  std::vector<double> trace;  ///< best loss per simplex iteration, all restarts chained
};

struct JitterFit {
  JitterParams params;            ///< average of the per-point fits
  std::vector<JitterPointFit> points;
  bool converged = true;
};

namespace detail {

/// Scales live in log space, bounded to [0.01 ps, 1e6 ps]: with a vanishing
/// tail weight the kappas are unidentifiable and would otherwise drift to inf.
inline JitterParams unpack_jitter(const Eigen::VectorXd& x, double kappa1_sign) {
  const auto scale = [](double v) { return std::exp(std::clamp(v, std::log(1e-2), std::log(1e6))); };
  JitterParams p;
  p.mu = x(0);
  p.sigma = scale(x(1));
  p.kappa0 = scale(x(2));
  p.kappa1 = kappa1_sign * scale(x(3));
  p.gamma_w = x(4) * x(4);
  return p;
}

}  // namespace detail

/// Fits the jitter parameters to one LOS histogram. Restarts sweep a
/// log-spaced (kappa0, kappa1) ladder around the initial guess.
inline JitterPointFit fit_jitter_point(const TransientHistogram& los, double arrival_ps,
                                       const JitterParams& init, const JitterFitOptions& opt = {}) {
  init.validate();
  const JitterTarget tgt = make_jitter_target(los, arrival_ps, opt);
  const double sign = init.kappa1 < 0.0 ? -1.0 : 1.0;
  const auto objective = [&](const Eigen::VectorXd& x) {
    return jitter_cross_entropy(detail::unpack_jitter(x, sign), tgt, opt.normalize_model);
  };

  JitterPointFit best;
  best.loss = std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, opt.restarts);
  Eigen::VectorXd carry;
  for (int r = 0; r < restarts; ++r) {
    const double scale = restarts == 1 ? 1.0 : std::pow(4.0, (r - (restarts - 1) / 2.0) / ((restarts - 1) / 2.0));
    Eigen::VectorXd x0(5);
    x0 << init.mu, std::log(init.sigma), std::log(init.kappa0 * scale),
        std::log(std::abs(init.kappa1) * scale), std::sqrt(init.gamma_w);
    if (r > 0 && carry.size() == 5) {
      x0(0) = carry(0);
      x0(1) = carry(1);
    }
    Eigen::VectorXd steps(5);
    steps << std::max(init.sigma, 4.0), 0.3, 0.5, 0.5, 0.2;
    SimplexOptions so;
    so.max_evals = opt.max_evals;
    so.f_tol = 1e-13;
    so.x_tol = 1e-7;
    SimplexResult res = nelder_mead(objective, x0, so, steps);
    // A second pass from the optimum escapes premature simplex collapse.
    SimplexResult polish = nelder_mead(objective, res.x, so, steps * 0.1);
    for (double& v : polish.trace) v = std::min(v, res.value);
    res.trace.insert(res.trace.end(), polish.trace.begin(), polish.trace.end());
    if (polish.value <= res.value) {
      res.x = polish.x;
      res.value = polish.value;
      res.converged = polish.converged;
    }
    for (double v : res.trace) {
      const double prev = best.trace.empty() ? std::numeric_limits<double>::infinity() : best.trace.back();
      best.trace.push_back(std::min(prev, v));
    }
    if (res.value < best.loss) {
      best.loss = res.value;
      best.params = detail::unpack_jitter(res.x, sign);
      best.converged = res.converged;
      carry = res.x;
    }
  }
  return best;
}

/// Fits every LOS histogram independently and averages the parameters in
/// point order. `arrival_ps[i]` is the direct-return time of point i on the
/// histogram's absolute time axis.
inline JitterFit fit_jitter(std::span<const TransientHistogram> los, std::span<const double> arrival_ps,
                            const JitterParams& init, const JitterFitOptions& opt = {}) {
  if (los.empty()) fail(ErrorCode::low_signal, "no LOS histograms to fit");
  if (los.size() != arrival_ps.size()) fail(ErrorCode::invalid_argument, "one arrival time per histogram");
  JitterFit fit;
  fit.points.resize(los.size());
  parallel_for(los.size(), [&](std::size_t i) {
    fit.points[i] = fit_jitter_point(los[i], arrival_ps[i], init, opt);
  });
  JitterParams avg{0, 0, 0, 0, 0};
  for (const auto& p : fit.points) {
    avg.mu += p.params.mu;
    avg.sigma += p.params.sigma;
    avg.kappa0 += p.params.kappa0;
    avg.kappa1 += p.params.kappa1;
    avg.gamma_w += p.params.gamma_w;
    fit.converged = fit.converged && p.converged;
  }
  const double n = static_cast<double>(los.size());
  avg.mu /= n;
  avg.sigma /= n;
  avg.kappa0 /= n;
  avg.kappa1 /= n;
  avg.gamma_w /= n;
  fit.params = avg;
  return fit;
}

}  // namespace nlos
