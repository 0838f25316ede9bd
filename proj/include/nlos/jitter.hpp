#pragma once

// System timing response: a Gaussian peak plus an exponential tail,
//   j(t) = Gaus(t; mu, sigma) + gamma * Exp(t; mu, kappa0, kappa1),   t > 0,
//   Gaus = exp(-(t - mu)^2 / (2 sigma^2)),
//   Exp  = t^(-1/2) exp(-(t - mu)^2 / (kappa0 t)) (1 + (t - mu) / (kappa1 t)).
// All times are picoseconds.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "nlos/error.hpp"

namespace nlos {

struct JitterParams {
  double mu = 200.0;      ///< ps
  double sigma = 42.5;    ///< ps
  double kappa0 = 50.0;   ///< ps
  double kappa1 = 30.0;   ///< ps
  double gamma_w = 0.0;   ///< weight of the exponential term

  void validate() const {
    if (!(sigma > 0.0) || !(kappa0 > 0.0) || kappa1 == 0.0 || !(gamma_w >= 0.0) ||
        !std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(kappa0) ||
        !std::isfinite(kappa1) || !std::isfinite(gamma_w)) {
      std::ostringstream msg;
      msg << "invalid jitter parameters (mu=" << mu << ", sigma=" << sigma
          << ", kappa0=" << kappa0 << ", kappa1=" << kappa1 << ", gamma=" << gamma_w << ")";
      fail(ErrorCode::domain, msg.str());
    }
  }
};

/// Full width at half maximum of a Gaussian with the given sigma.
inline double gaussian_fwhm(double sigma) { return 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma; }

inline double jitter_gauss(const JitterParams& p, double t) {
  const double d = t - p.mu;
  return std::exp(-d * d / (2.0 * p.sigma * p.sigma));
}

/// Exponential-tail term; the (1 + ...) factor is clipped at zero.
/// Returns 0 in the t -> 0+ limit when mu != 0.
inline double jitter_tail(const JitterParams& p, double t, bool* clipped = nullptr) {
  if (t <= 0.0) return 0.0;
  const double d = t - p.mu;
  const double shape = 1.0 + d / (p.kappa1 * t);
  if (shape < 0.0) {
    if (clipped) *clipped = true;
    return 0.0;
  }
  return std::exp(-d * d / (p.kappa0 * t)) / std::sqrt(t) * shape;
}

inline double jitter_value(const JitterParams& p, double t, bool* clipped = nullptr) {
  double v = jitter_gauss(p, t);
  if (p.gamma_w > 0.0) v += p.gamma_w * jitter_tail(p, t, clipped);
  return v;
}

struct JitterCurve {
  std::vector<double> values;    ///< sums to one
  std::size_t clipped_bins = 0;  ///< samples where the tail factor went negative
};

/// Evaluates the jitter response on an arbitrary time grid and normalizes it
/// to unit sum. The tail term is only defined for t > 0.
inline JitterCurve jitter_curve(const JitterParams& params, std::span<const double> t_ps) {
  params.validate();
  JitterCurve out;
  out.values.resize(t_ps.size());
  for (std::size_t i = 0; i < t_ps.size(); ++i) {
    const double t = t_ps[i];
    if (params.gamma_w > 0.0 && !(t > 0.0)) {
      fail(ErrorCode::domain, "jitter tail evaluated at t <= 0");
    }
    bool clipped = false;
    out.values[i] = jitter_value(params, t, &clipped);
    if (clipped) ++out.clipped_bins;
  }
  const double total = std::accumulate(out.values.begin(), out.values.end(), 0.0);
  if (!(total > 0.0)) fail(ErrorCode::domain, "jitter curve vanishes on the grid");
  for (double& v : out.values) v /= total;
  return out;
}

/// Causal discrete kernel: values[i] is the response at delay (offset + i) bins.
struct DiscreteKernel {
  int offset = 0;
  std::vector<double> values{1.0};

  static DiscreteKernel delta() { return {}; }
  bool is_delta() const { return offset == 0 && values.size() == 1; }
  std::size_t end() const { return static_cast<std::size_t>(offset) + values.size(); }
  /// Dense kernel of length n (zeros outside the support).
  std::vector<double> dense(std::size_t n) const {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const std::size_t k = static_cast<std::size_t>(offset) + i;
      if (k < n) out[k] = values[i];
    }
    return out;
  }
};

/// Relative amplitude below which kernel samples are truncated.
inline constexpr double kKernelTruncation = 1e-4;

/// Samples the jitter response at t_k = k * bin_width (k >= 0; the tail term
/// takes its zero limit at t = 0), drops leading/trailing samples below
/// 1e-4 of the peak, and renormalizes to unit sum.
inline DiscreteKernel jitter_kernel(const JitterParams& params, double bin_width_ps) {
  params.validate();
  if (!(bin_width_ps > 0.0)) fail(ErrorCode::domain, "bin width must be positive");
  if (params.gamma_w > 0.0 && params.mu == 0.0) {
    fail(ErrorCode::domain, "tail term is singular at t = 0 when mu = 0");
  }
  // Past the Gaussian, the tail decays at least as exp(-t / kappa0) / sqrt(t).
  const double horizon = std::max(0.0, params.mu) + 12.0 * params.sigma +
                         (params.gamma_w > 0.0 ? 40.0 * params.kappa0 + 12.0 * std::sqrt(params.kappa0 * std::max(params.mu, bin_width_ps)) : 0.0);
  const auto n = static_cast<std::size_t>(std::ceil(horizon / bin_width_ps)) + 2;
  if (n > 10'000'000) fail(ErrorCode::domain, "jitter kernel support is unreasonably large");
  std::vector<double> raw(n);
  for (std::size_t k = 0; k < n; ++k) raw[k] = jitter_value(params, k * bin_width_ps);
  const double peak = *std::max_element(raw.begin(), raw.end());
  if (!(peak > 0.0)) fail(ErrorCode::domain, "jitter kernel vanishes on the bin grid");
  std::size_t first = 0;
  while (raw[first] < kKernelTruncation * peak) ++first;
  std::size_t last = n - 1;
  while (raw[last] < kKernelTruncation * peak) --last;
  DiscreteKernel kernel;
  kernel.offset = static_cast<int>(first);
  kernel.values.assign(raw.begin() + static_cast<std::ptrdiff_t>(first),
                       raw.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  const double total = std::accumulate(kernel.values.begin(), kernel.values.end(), 0.0);
  for (double& v : kernel.values) v /= total;
  return kernel;
}

/// Linear convolution; mass pushed past the last bin is dropped.
inline std::vector<double> convolve(std::span<const double> signal, const DiscreteKernel& kernel) {
  if (kernel.is_delta()) return {signal.begin(), signal.end()};
  std::vector<double> out(signal.size(), 0.0);
  const std::size_t n = signal.size();
  for (std::size_t s = 0; s < n; ++s) {
    const double x = signal[s];
    if (x == 0.0) continue;
    const std::size_t base = s + static_cast<std::size_t>(kernel.offset);
    for (std::size_t i = 0; i < kernel.values.size() && base + i < n; ++i) {
      out[base + i] += x * kernel.values[i];
    }
  }
  return out;
}

/// FWHM in samples of a unimodal sampled curve, linearly interpolated.
inline double sampled_fwhm(std::span<const double> y) {
  if (y.empty()) return 0.0;
  const auto peak_it = std::max_element(y.begin(), y.end());
  const double half = *peak_it / 2.0;
  const auto peak = static_cast<std::size_t>(peak_it - y.begin());
  std::size_t l = peak;
  while (l > 0 && y[l - 1] > half) --l;
  double left = static_cast<double>(l);
  if (l > 0) left = (l - 1) + (half - y[l - 1]) / (y[l] - y[l - 1]);
  std::size_t r = peak;
  while (r + 1 < y.size() && y[r + 1] > half) ++r;
  double right = static_cast<double>(r);
  if (r + 1 < y.size()) right = r + (y[r] - half) / (y[r] - y[r + 1]);
  return right - left;
}

}  // namespace nlos
