#pragma once

// Affine voltage -> optical angle model of a dual-axis galvanometer,
//   theta = eps + beta * V,
// its least-squares calibration and the inverse used to command scan points.

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "nlos/error.hpp"
#include "nlos/geometry.hpp"

namespace nlos {

struct GalvoModel {
  Vec2 eps = Vec2::Zero();                          ///< rad
  Eigen::Matrix2d beta = Eigen::Matrix2d::Identity();  ///< rad/V
  double voltage_limit = 5.0;                       ///< admissible |V| per axis, volts

  double det() const { return beta.determinant(); }
  bool invertible() const { return std::abs(det()) > 1e-12; }
};

struct GalvoSample {
  Vec2 voltages = Vec2::Zero();  ///< V
  ScanAngles measured;           ///< rad
};

/// Thrown by angles_to_voltages when the solution leaves the admissible
/// voltage box; carries the clamped voltages.
class VoltageRangeError : public Error {
 public:
  VoltageRangeError(const std::string& what, Vec2 requested, Vec2 clamped)
      : Error(ErrorCode::out_of_range, what), requested_(requested), clamped_(clamped) {}
  const Vec2& requested() const { return requested_; }
  const Vec2& clamped() const { return clamped_; }

 private:
  Vec2 requested_;
  Vec2 clamped_;
};

inline ScanAngles voltages_to_angles(const GalvoModel& model, const Vec2& v) {
  return ScanAngles::from(model.eps + model.beta * v);
}

inline Vec2 angles_to_voltages(const GalvoModel& model, const ScanAngles& angles) {
  if (!model.invertible()) {
    std::ostringstream msg;
    msg << "galvo beta is not invertible (det=" << model.det() << ")";
    fail(ErrorCode::degenerate, msg.str());
  }
  const Vec2 v = model.beta.partialPivLu().solve(angles.vec() - model.eps);
  const double lim = model.voltage_limit;
  if (std::abs(v.x()) > lim || std::abs(v.y()) > lim) {
    const Vec2 clamped = v.cwiseMax(-lim).cwiseMin(lim);
    std::ostringstream msg;
    msg << "voltages (" << v.x() << ", " << v.y() << ") V exceed +-" << lim << " V";
    throw VoltageRangeError(msg.str(), v, clamped);
  }
  return v;
}

enum class GalvoFitMethod {
  two_stage,  ///< beta by no-intercept least squares, then eps as mean residual
  joint,      ///< ordinary affine regression of eps and beta together
};

struct GalvoFit {
  GalvoModel model;
  Vec2 residual_rms = Vec2::Zero();  ///< per axis, rad
  double condition = 0.0;            ///< condition number of the design
};

namespace detail {

/// Solves min ||A x - b|| column-wise. Normal equations unless the design is
/// poorly conditioned, in which case a column-pivoted QR is used.
inline Eigen::MatrixXd least_squares(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                     double* condition) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smin <= smax * 1e-12 || smin == 0.0) {
    fail(ErrorCode::degenerate, "rank-deficient design: voltage samples are collinear");
  }
  const double cond = smax / smin;
  if (condition) *condition = cond;
  if (cond * cond > 1e8) return a.colPivHouseholderQr().solve(b);
  const Eigen::MatrixXd ata = a.transpose() * a;
  return ata.ldlt().solve(a.transpose() * b);
}

}  // namespace detail

inline GalvoFit fit_galvo(std::span<const GalvoSample> samples,
                          GalvoFitMethod method = GalvoFitMethod::two_stage,
                          double voltage_limit = 5.0) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n < 3) fail(ErrorCode::degenerate, "galvo fit needs at least 3 samples");

  Eigen::MatrixXd thetas(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    thetas.row(i) = samples[static_cast<std::size_t>(i)].measured.vec().transpose();
  }

  GalvoFit fit;
  fit.model.voltage_limit = voltage_limit;
  if (method == GalvoFitMethod::two_stage) {
    Eigen::MatrixXd design(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      design.row(i) = samples[static_cast<std::size_t>(i)].voltages.transpose();
    }
    // Rows of theta = V^T beta^T.
    const Eigen::MatrixXd beta_t = detail::least_squares(design, thetas, &fit.condition);
    fit.model.beta = beta_t.transpose();
    const Eigen::MatrixXd residual = thetas - design * beta_t;
    fit.model.eps = residual.colwise().mean().transpose();
  } else {
    Eigen::MatrixXd design(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& v = samples[static_cast<std::size_t>(i)].voltages;
      design.row(i) << 1.0, v.x(), v.y();
    }
    const Eigen::MatrixXd coef = detail::least_squares(design, thetas, &fit.condition);
    fit.model.eps = coef.row(0).transpose();
    fit.model.beta = coef.bottomRows(2).transpose();
  }

  Vec2 sq = Vec2::Zero();
  for (const auto& s : samples) {
    const Vec2 r = s.measured.vec() - voltages_to_angles(fit.model, s.voltages).vec();
    sq += r.cwiseAbs2();
  }
  fit.residual_rms = (sq / static_cast<double>(n)).cwiseSqrt();
  return fit;
}

}  // namespace nlos
