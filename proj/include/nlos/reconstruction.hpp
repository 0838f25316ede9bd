#pragma once

// Linear confocal reconstruction. The forward operator Psi maps a voxel
// albedo volume to realigned NLOS transients (LOS return at bin 0); the
// solver minimizes the Poisson negative log-likelihood plus anisotropic TV
//   L(f) = sum_i [(Psi f)_i - tau_i ln((Psi f)_i + eps)] + lambda TV(f)
// by projected gradient descent with Armijo backtracking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "nlos/error.hpp"
#include "nlos/parallel.hpp"
#include "nlos/simulator.hpp"
#include "nlos/transient.hpp"
#include "nlos/volume.hpp"

namespace nlos {

/// Matrix-free Psi for a set of wall points and a voxel grid. Bin indices are
/// precomputed when the point x voxel table is small enough.
class ConfocalOperator {
 public:
  static constexpr std::size_t kMaxTableEntries = std::size_t{1} << 27;

  ConfocalOperator(std::array<int, 3> dims, BoxExtents bbox, std::vector<Vec2> scan_xy,
                   std::size_t num_bins, double bin_width_ps,
                   Attenuation attenuation = Attenuation::off)
      : grid_(dims, bbox),
        scan_(std::move(scan_xy)),
        num_bins_(num_bins),
        bin_width_(bin_width_ps),
        attenuation_(attenuation) {
    if (scan_.empty()) fail(ErrorCode::invalid_argument, "operator needs scan points");
    if (!(bin_width_ps > 0.0)) fail(ErrorCode::invalid_argument, "bin width must be positive");
    const std::size_t nv = grid_.size();
    centers_.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) centers_[v] = grid_.center(v);
    const bool table = scan_.size() * nv <= kMaxTableEntries;
    if (table) bins_.resize(scan_.size() * nv);
    if (table && attenuation_ == Attenuation::on) weights_.resize(scan_.size() * nv);
    std::vector<std::optional<std::string>> errors(scan_.size());
    parallel_for(scan_.size(), [&](std::size_t p) {
      for (std::size_t v = 0; v < nv; ++v) {
        const long long k = compute_bin(p, v);
        if (k < 0 || k >= static_cast<long long>(num_bins_)) {
          std::ostringstream msg;
          msg << "voxel " << v << " maps to bin " << k << " at scan point " << p
              << "; histograms have " << num_bins_ << " bins";
          errors[p] = msg.str();
          return;
        }
        if (table) {
          bins_[p * nv + v] = static_cast<std::uint32_t>(k);
          if (!weights_.empty()) weights_[p * nv + v] = compute_weight(p, v);
        }
      }
    });
    for (const auto& e : errors) {
      if (e) fail(ErrorCode::coverage, *e);
    }
  }

  std::size_t num_points() const { return scan_.size(); }
  std::size_t num_bins() const { return num_bins_; }
  std::size_t num_voxels() const { return grid_.size(); }
  std::size_t data_size() const { return scan_.size() * num_bins_; }
  const std::array<int, 3>& dims() const { return grid_.dims(); }
  const BoxExtents& bbox() const { return grid_.bbox(); }
  const std::vector<Vec2>& scan_points() const { return scan_; }
  Attenuation attenuation() const { return attenuation_; }

  std::size_t bin(std::size_t point, std::size_t voxel) const {
    if (!bins_.empty()) return bins_[point * grid_.size() + voxel];
    return static_cast<std::size_t>(compute_bin(point, voxel));
  }
  double weight(std::size_t point, std::size_t voxel) const {
    if (attenuation_ == Attenuation::off) return 1.0;
    if (!weights_.empty()) return weights_[point * grid_.size() + voxel];
    return compute_weight(point, voxel);
  }

  /// Psi f, row-major (point, bin).
  std::vector<double> forward(std::span<const double> f) const {
    check_volume(f);
    std::vector<double> y(data_size(), 0.0);
    const std::size_t nv = grid_.size();
    parallel_for(scan_.size(), [&](std::size_t p) {
      double* row = y.data() + p * num_bins_;
      for (std::size_t v = 0; v < nv; ++v) {
        if (f[v] == 0.0) continue;
        row[bin(p, v)] += f[v] * weight(p, v);
      }
    });
    return y;
  }

  /// Psi^T y: each voxel gathers y at its bin for every scan point.
  std::vector<double> adjoint(std::span<const double> y) const {
    if (y.size() != data_size()) fail(ErrorCode::invalid_argument, "adjoint input has the wrong size");
    const std::size_t nv = grid_.size();
    std::vector<double> out(nv, 0.0);
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (nv + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
      const std::size_t begin = c * kChunk;
      const std::size_t end = std::min(nv, begin + kChunk);
      for (std::size_t p = 0; p < scan_.size(); ++p) {
        const double* row = y.data() + p * num_bins_;
        for (std::size_t v = begin; v < end; ++v) out[v] += row[bin(p, v)] * weight(p, v);
      }
    });
    return out;
  }

  /// Largest eigenvalue of Psi^T Psi by power iteration.
  double norm_estimate(int iterations = 10) const {
    std::vector<double> x(grid_.size(), 1.0);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
      const double xn = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
      if (xn == 0.0) return 0.0;
      for (double& v : x) v /= xn;
      x = adjoint(forward(x));
      lambda = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
    }
    return lambda;
  }

 private:
  long long compute_bin(std::size_t p, std::size_t v) const {
    const Point3 s(scan_[p].x(), scan_[p].y(), 0.0);
    return distance_to_bin((centers_[v] - s).norm(), bin_width_);
  }
  float compute_weight(std::size_t p, std::size_t v) const {
    const Point3 s(scan_[p].x(), scan_[p].y(), 0.0);
    const Point3& c = centers_[v];
    return static_cast<float>(confocal_attenuation(c, s, (-c).normalized()));
  }
  void check_volume(std::span<const double> f) const {
    if (f.size() != grid_.size()) fail(ErrorCode::invalid_argument, "volume has the wrong size");
  }

  VoxelVolume grid_;
  std::vector<Point3> centers_;
  std::vector<Vec2> scan_;
  std::size_t num_bins_;
  double bin_width_;
  Attenuation attenuation_;
  std::vector<std::uint32_t> bins_;
  std::vector<float> weights_;
};

/// Operator matching a realigned NLOS dataset.
inline ConfocalOperator make_operator(const TransientDataset& ds, std::array<int, 3> dims,
                                      const BoxExtents& bbox, Attenuation attenuation = Attenuation::off) {
  std::vector<Vec2> xy(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) xy[i] = ds.points[i].wall_xy;
  return ConfocalOperator(dims, bbox, std::move(xy), ds.num_bins, ds.bin_width_ps, attenuation);
}

/// Flattens histograms row-major (point, bin).
inline std::vector<double> flatten(const TransientDataset& ds) {
  std::vector<double> y;
  y.reserve(ds.size() * ds.num_bins);
  for (const auto& h : ds.histograms) y.insert(y.end(), h.counts.begin(), h.counts.end());
  return y;
}

// ---------------------------------------------------------------------------
// Objective

/// Anisotropic total variation with Neumann boundary.
inline double total_variation(std::span<const double> f, const std::array<int, 3>& d) {
  const auto idx = [&](int x, int y, int z) {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(d[0]) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(d[1]) * z);
  };
  double tv = 0.0;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const double c = f[idx(x, y, z)];
        if (x + 1 < d[0]) tv += std::abs(f[idx(x + 1, y, z)] - c);
        if (y + 1 < d[1]) tv += std::abs(f[idx(x, y + 1, z)] - c);
        if (z + 1 < d[2]) tv += std::abs(f[idx(x, y, z + 1)] - c);
      }
    }
  }
  return tv;
}

/// Adds lambda * (sub)gradient of TV to grad; sign(0) = 0.
inline void add_tv_subgradient(std::span<const double> f, const std::array<int, 3>& d, double lambda,
                               std::span<double> grad) {
  if (lambda == 0.0) return;
  const auto idx = [&](int x, int y, int z) {
    return static_cast<std::size_t>(x) + static_cast<std::size_t>(d[0]) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(d[1]) * z);
  };
  const auto sgn = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const std::size_t i = idx(x, y, z);
        const auto edge = [&](std::size_t j) {
          const double s = lambda * sgn(f[j] - f[i]);
          grad[j] += s;
          grad[i] -= s;
        };
        if (x + 1 < d[0]) edge(idx(x + 1, y, z));
        if (y + 1 < d[1]) edge(idx(x, y + 1, z));
        if (z + 1 < d[2]) edge(idx(x, y, z + 1));
      }
    }
  }
}

/// Poisson data term sum_i [m_i - tau_i ln(m_i + eps)] for predictions m.
inline double poisson_data_term(std::span<const double> predicted, std::span<const double> tau, double eps) {
  double loss = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double m = predicted[i];
    loss += m;
    if (tau[i] != 0.0) loss -= tau[i] * std::log(m + eps);
  }
  return loss;
}

enum class ReconInit { backprojection, zero };

struct ReconConfig {
  std::array<int, 3> dims{32, 32, 32};
  BoxExtents bbox;
  double lambda = 0.0;
  int max_iters = 1000;
  /// Initial step; <= 0 selects 1 / ||Psi^T Psi|| from power iteration.
  double initial_step = 0.0;
  double backtrack = 0.5;
  double armijo = 1e-4;
  /// Each iteration starts from growth * previous accepted step (1 disables).
  double growth = 2.0;
  int max_halvings = 30;
  double epsilon = 1e-9;
  Attenuation attenuation = Attenuation::off;
  ReconInit init = ReconInit::backprojection;
  int stall_window = 10;
  double stall_tolerance = 1e-7;

  void validate() const {
    if (!(lambda >= 0.0)) fail(ErrorCode::invalid_argument, "TV weight must be non-negative");
    if (max_iters < 1) fail(ErrorCode::invalid_argument, "max_iters must be >= 1");
    if (!(epsilon > 0.0)) fail(ErrorCode::invalid_argument, "epsilon must be positive");
    if (!(backtrack > 0.0 && backtrack < 1.0)) fail(ErrorCode::invalid_argument, "backtrack factor must be in (0, 1)");
    if (!(growth >= 1.0)) fail(ErrorCode::invalid_argument, "step growth must be >= 1");
  }
};

struct LossGrad {
  double loss = 0.0;
  double data = 0.0;
  std::vector<double> grad;
  std::vector<double> predicted;
};

inline void check_non_negative(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!(x >= 0.0)) fail(ErrorCode::domain, std::string(what) + " must be non-negative");
  }
}

inline double evaluate_loss(const ConfocalOperator& op, std::span<const double> f, std::span<const double> tau,
                            const ReconConfig& cfg, std::vector<double>* predicted = nullptr,
                            double* data_term = nullptr) {
  std::vector<double> m = op.forward(f);
  const double data = poisson_data_term(m, tau, cfg.epsilon);
  if (data_term) *data_term = data;
  const double loss = data + (cfg.lambda > 0.0 ? cfg.lambda * total_variation(f, op.dims()) : 0.0);
  if (predicted) *predicted = std::move(m);
  return loss;
}

/// Loss and gradient Psi^T (1 - tau / (Psi f + eps)) + lambda dTV(f).
inline LossGrad loss_grad(const ConfocalOperator& op, std::span<const double> f, std::span<const double> tau,
                          const ReconConfig& cfg) {
  if (tau.size() != op.data_size()) fail(ErrorCode::invalid_argument, "data has the wrong size");
  check_non_negative(f, "volume");
  check_non_negative(tau, "measurements");
  LossGrad out;
  out.loss = evaluate_loss(op, f, tau, cfg, &out.predicted, &out.data);
  std::vector<double> r(tau.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = 1.0 - tau[i] / (out.predicted[i] + cfg.epsilon);
  out.grad = op.adjoint(r);
  add_tv_subgradient(f, op.dims(), cfg.lambda, out.grad);
  return out;
}

struct ReconResult {
  VoxelVolume volume;
  std::vector<double> loss_trace;   ///< accepted iterates, starting with the initial point
  std::vector<double> data_trace;   ///< Poisson term only
  std::vector<double> step_trace;
  int iterations = 0;
  bool converged = false;           ///< stopped by the stall criterion
};

/// Psi^T tau normalized to [0, 1].
inline VoxelVolume reconstruct_bp(const ConfocalOperator& op, std::span<const double> tau) {
  VoxelVolume vol(op.dims(), op.bbox());
  vol.data() = op.adjoint(tau);
  const double mx = vol.max_value();
  if (mx > 0.0) {
    for (double& v : vol.data()) v = std::max(0.0, v) / mx;
  }
  return vol;
}

/// Projected gradient descent with Armijo backtracking. Starts from `start`
/// when given, otherwise from the configured initialization.
inline ReconResult reconstruct_opt(const ConfocalOperator& op, std::span<const double> tau, const ReconConfig& cfg,
                                   const VoxelVolume* start = nullptr) {
  cfg.validate();
  check_non_negative(tau, "measurements");
  ReconResult res;
  res.volume = VoxelVolume(op.dims(), op.bbox());
  std::vector<double>& f = res.volume.data();
  if (start) {
    if (start->size() != f.size()) fail(ErrorCode::invalid_argument, "start volume has the wrong size");
    f = start->data();
    check_non_negative(f, "start volume");
  } else if (cfg.init == ReconInit::backprojection) {
    f = reconstruct_bp(op, tau).data();
    // Poisson-optimal global scale: sum(Psi f) = sum(tau).
    const std::vector<double> m = op.forward(f);
    const double sm = std::accumulate(m.begin(), m.end(), 0.0);
    const double st = std::accumulate(tau.begin(), tau.end(), 0.0);
    if (sm > 0.0 && st > 0.0) {
      for (double& v : f) v *= st / sm;
    }
  }

  double step = cfg.initial_step;
  if (!(step > 0.0)) {
    const double l = op.norm_estimate(10);
    step = l > 0.0 ? 1.0 / l : 1.0;
  }

  LossGrad cur = loss_grad(op, f, tau, cfg);
  res.loss_trace.push_back(cur.loss);
  res.data_trace.push_back(cur.data);
  std::vector<double> trial(f.size());
  for (int it = 0; it < cfg.max_iters; ++it) {
    double alpha = it == 0 ? step : step * cfg.growth;
    bool accepted = false;
    double trial_loss = 0.0, trial_data = 0.0;
    for (int h = 0; h <= cfg.max_halvings; ++h, alpha *= cfg.backtrack) {
      double decrease = 0.0;
      for (std::size_t v = 0; v < f.size(); ++v) {
        trial[v] = std::max(0.0, f[v] - alpha * cur.grad[v]);
        decrease += cur.grad[v] * (trial[v] - f[v]);
      }
      if (decrease == 0.0) break;  // projected gradient vanishes
      trial_loss = evaluate_loss(op, trial, tau, cfg, nullptr, &trial_data);
      if (trial_loss <= cur.loss + cfg.armijo * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (it == 0) {
        std::ostringstream msg;
        msg << "no decreasing step at iteration 0 (loss " << cur.loss << ", last step " << alpha << ")";
        fail(ErrorCode::step_failure, msg.str());
      }
      res.converged = true;
      break;
    }
    step = alpha;
    f.swap(trial);
    cur = loss_grad(op, f, tau, cfg);
    res.loss_trace.push_back(cur.loss);
    res.data_trace.push_back(cur.data);
    res.step_trace.push_back(step);
    res.iterations = it + 1;
    const std::size_t n = res.loss_trace.size();
    const auto w = static_cast<std::size_t>(cfg.stall_window);
    if (n > w) {
      const double old = res.loss_trace[n - 1 - w];
      const double rel = std::abs(old - cur.loss) / std::max(std::abs(old), 1e-300);
      if (rel < cfg.stall_tolerance) {
        res.converged = true;
        break;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Quality metrics

/// Intersection over union of {recon >= threshold * max(recon)} against
/// {truth > 0}.
inline double support_iou(const VoxelVolume& recon, const VoxelVolume& truth, double threshold = 0.5) {
  if (recon.size() != truth.size()) fail(ErrorCode::invalid_argument, "volume size mismatch");
  const double cut = threshold * recon.max_value();
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const bool a = recon[i] >= cut && recon[i] > 0.0;
    const bool b = truth[i] > 0.0;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

/// Albedo-weighted centroid of voxels at or above threshold * max.
inline Point3 weighted_centroid(const VoxelVolume& vol, double threshold = 0.5) {
  const double cut = threshold * vol.max_value();
  Point3 c = Point3::Zero();
  double w = 0.0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (vol[i] >= cut && vol[i] > 0.0) {
      c += vol[i] * vol.center(i);
      w += vol[i];
    }
  }
  return w > 0.0 ? Point3(c / w) : Point3::Zero();
}

}  // namespace nlos
