#pragma once

// Wiener deconvolution of the timing jitter, applied per histogram before
// reconstruction:
//   k(nu) = j(nu)^-1 / (1 + (eta |j(nu)|^2)^-1) = eta conj(j) / (eta |j|^2 + 1).

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "nlos/error.hpp"
#include "nlos/jitter.hpp"
#include "nlos/parallel.hpp"
#include "nlos/transient.hpp"

namespace nlos {

using Spectrum = std::vector<std::complex<double>>;

/// Discrete Fourier transform of the unit-sum kernel on num_bins samples.
inline Spectrum kernel_spectrum(const DiscreteKernel& kernel, std::size_t num_bins) {
  if (kernel.end() > num_bins) fail(ErrorCode::invalid_argument, "jitter kernel longer than the histogram");
  Eigen::FFT<double> fft;
  Spectrum out;
  const std::vector<double> dense = kernel.dense(num_bins);
  fft.fwd(out, dense);
  return out;
}

/// Frequency response of the Wiener filter. Finite wherever |j| vanishes
/// because the regularized form never divides by j.
inline Spectrum wiener_kernel(const Spectrum& jitter_spectrum, double eta) {
  if (!(eta > 0.0)) fail(ErrorCode::domain, "Wiener SNR eta must be positive");
  Spectrum k(jitter_spectrum.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    const auto& j = jitter_spectrum[i];
    const double p = std::norm(j);
    k[i] = eta * std::conj(j) / (eta * p + 1.0);
  }
  return k;
}

inline Spectrum wiener_kernel(const DiscreteKernel& kernel, std::size_t num_bins, double eta) {
  return wiener_kernel(kernel_spectrum(kernel, num_bins), eta);
}

inline Spectrum wiener_kernel(const JitterParams& jitter, std::size_t num_bins, double eta,
                              double bin_width_ps) {
  return wiener_kernel(jitter_kernel(jitter, bin_width_ps), num_bins, eta);
}

/// Circular filtering of one signal; no clamping.
inline std::vector<double> wiener_filter(std::span<const double> signal, const Spectrum& filter) {
  if (filter.size() != signal.size()) fail(ErrorCode::invalid_argument, "filter length mismatch");
  Eigen::FFT<double> fft;
  Spectrum spec;
  const std::vector<double> in(signal.begin(), signal.end());
  fft.fwd(spec, in);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= filter[i];
  std::vector<double> out;
  fft.inv(out, spec);
  return out;
}

/// SNR heuristic: (peak count)^2 over the median per-histogram variance of
/// the bins before the first signal (first 10% of each histogram).
inline double estimate_eta(const TransientDataset& ds) {
  double peak = 0.0;
  std::vector<double> variances;
  for (const auto& h : ds.histograms) {
    peak = std::max(peak, *std::max_element(h.counts.begin(), h.counts.end()));
    const std::size_t n = std::max<std::size_t>(2, h.size() / 10);
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += h.counts[k];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t k = 0; k < n; ++k) var += (h.counts[k] - mean) * (h.counts[k] - mean);
    variances.push_back(var / static_cast<double>(n - 1));
  }
  const double noise = median_of(variances);
  if (!(peak > 0.0)) fail(ErrorCode::low_signal, "dataset has no counts");
  // Noise-free background: fall back to the count scale itself.
  return peak * peak / (noise > 0.0 ? noise : std::max(1.0, peak));
}

/// Poisson SNR of the hidden-scene signal: median over points of the
/// largest bias-corrected count outside the LOS window (variance = mean).
/// The LOS-based heuristic above is dominated by the direct return, which
/// is orders of magnitude brighter than anything the filter is meant to
/// sharpen.
inline double estimate_nlos_eta(const TransientDataset& ds, std::size_t window_halfwidth) {
  std::vector<double> peaks;
  for (const auto& h : ds.histograms) {
    if (h.total() == 0.0) continue;
    const LosSplit split = split_los_nlos(h, window_halfwidth);
    const double b = estimate_bias(h, split.window_begin, std::nullopt);
    peaks.push_back(*std::max_element(split.nlos.counts.begin(), split.nlos.counts.end()) - b);
  }
  if (peaks.empty()) fail(ErrorCode::low_signal, "dataset has no counts");
  return std::max(1.0, median_of(peaks));
}

struct Denoised {
  TransientDataset dataset;
  std::vector<double> clamped_mass;  ///< per histogram, negative mass removed
};

/// Deconvolves every histogram with the Wiener filter for the given jitter
/// kernel; negative ringing is clamped to zero and reported.
inline Denoised denoise(const TransientDataset& ds, const DiscreteKernel& kernel, double eta,
                        const std::string& jitter_source = "") {
  ds.validate();
  const Spectrum filter = wiener_kernel(kernel, ds.num_bins, eta);
  Denoised out{ds, std::vector<double>(ds.size(), 0.0)};
  parallel_for(ds.size(), [&](std::size_t i) {
    auto& h = out.dataset.histograms[i];
    std::vector<double> y = wiener_filter(h.counts, filter);
    double clamped = 0.0;
    for (double& v : y) {
      if (v < 0.0) {
        clamped -= v;
        v = 0.0;
      }
    }
    h.counts = std::move(y);
    out.clamped_mass[i] = clamped;
  });
  out.dataset.dtype = CountType::f32;
  out.dataset.enhanced = true;
  out.dataset.eta = eta;
  out.dataset.jitter_source = jitter_source;
  return out;
}

inline Denoised denoise(const TransientDataset& ds, const JitterParams& jitter, double eta,
                        const std::string& jitter_source = "") {
  return denoise(ds, jitter_kernel(jitter, ds.bin_width_ps), eta, jitter_source);
}

}  // namespace nlos
