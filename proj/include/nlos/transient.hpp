#pragma once

// Photon-count histograms and the LOS-side analytics built on them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nlos/error.hpp"
#include "nlos/jitter.hpp"
#include "nlos/parallel.hpp"
#include "nlos/patterns.hpp"

namespace nlos {

inline constexpr std::size_t kMinBins = 16;

struct TransientHistogram {
  std::vector<double> counts;   ///< non-negative; integers until enhanced
  double bin_width_ps = 4.0;
  double t0_ps = 0.0;           ///< absolute time of bin 0, relative to emission

  TransientHistogram() = default;
  TransientHistogram(std::size_t num_bins, double bin_width, double t0 = 0.0)
      : counts(num_bins, 0.0), bin_width_ps(bin_width), t0_ps(t0) {}

  std::size_t size() const { return counts.size(); }
  double total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }
  double time_of(double bin) const { return t0_ps + bin * bin_width_ps; }

  void validate() const {
    if (counts.size() < kMinBins) fail(ErrorCode::invalid_argument, "histogram needs >= 16 bins");
    if (!(bin_width_ps > 0.0)) fail(ErrorCode::invalid_argument, "bin width must be positive");
    for (double c : counts) {
      if (!(c >= 0.0) || !std::isfinite(c)) {
        fail(ErrorCode::domain, "histogram counts must be finite and non-negative");
      }
    }
  }
};

enum class CountType { u32, f32 };

struct TransientDataset {
  std::vector<ScanPoint> points;
  std::vector<TransientHistogram> histograms;
  double bin_width_ps = 4.0;
  std::size_t num_bins = 0;
  double exposure_s = 0.0;
  CountType dtype = CountType::u32;
  bool enhanced = false;
  std::optional<double> eta;        ///< Wiener SNR used by enhancement
  std::string jitter_source;        ///< provenance of the deconvolution kernel
  PatternKind pattern_kind = PatternKind::arbitrary;
  std::map<std::string, double> pattern_params;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.size() != histograms.size()) {
      fail(ErrorCode::format, "dataset needs exactly one histogram per scan point");
    }
    for (const auto& h : histograms) {
      if (h.size() != num_bins || h.bin_width_ps != bin_width_ps) {
        fail(ErrorCode::format, "dataset histograms must share bin width and length");
      }
      h.validate();
    }
  }
};

// ---------------------------------------------------------------------------
// Peak localization

struct LosPeak {
  std::size_t bin = 0;
  double refinement = 0.0;  ///< parabolic sub-bin offset in [-0.5, 0.5]
  double refined() const { return static_cast<double>(bin) + refinement; }
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

/// 3-point parabolic vertex offset around bin k.
inline double parabolic_offset(std::span<const double> y, std::size_t k) {
  if (k == 0 || k + 1 >= y.size()) return 0.0;
  const double denom = y[k - 1] - 2.0 * y[k] + y[k + 1];
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (y[k - 1] - y[k + 1]) / denom, -0.5, 0.5);
}

/// Locates the direct wall return. A supplied bin is taken as-is; otherwise
/// the argmax must dominate (>= 5x the median count).
inline LosPeak find_los_peak(const TransientHistogram& h,
                             std::optional<std::size_t> known_bin = std::nullopt) {
  if (known_bin) {
    if (*known_bin >= h.size()) fail(ErrorCode::out_of_range, "LOS bin outside histogram");
    return {*known_bin, parabolic_offset(h.counts, *known_bin)};
  }
  const auto it = std::max_element(h.counts.begin(), h.counts.end());
  if (it == h.counts.end() || !(*it > 0.0) || *it < 5.0 * median_of(h.counts)) {
    fail(ErrorCode::ambiguous_peak, "no dominant LOS peak in histogram");
  }
  const auto bin = static_cast<std::size_t>(it - h.counts.begin());
  return {bin, parabolic_offset(h.counts, bin)};
}

// ---------------------------------------------------------------------------
// Realignment and LOS/NLOS split

struct Realigned {
  TransientHistogram histogram;
  double dropped = 0.0;  ///< counts shifted out on the left
};

/// Shifts counts left so that `los_bin` becomes bin 0. t0 advances so that
/// every retained sample keeps its absolute time.
inline Realigned realign(const TransientHistogram& h, std::size_t los_bin) {
  if (los_bin >= h.size()) fail(ErrorCode::out_of_range, "realign bin outside histogram");
  Realigned out;
  out.histogram = TransientHistogram(h.size(), h.bin_width_ps, h.t0_ps + los_bin * h.bin_width_ps);
  std::copy(h.counts.begin() + static_cast<std::ptrdiff_t>(los_bin), h.counts.end(),
            out.histogram.counts.begin());
  out.dropped = std::accumulate(h.counts.begin(),
                                h.counts.begin() + static_cast<std::ptrdiff_t>(los_bin), 0.0);
  return out;
}

struct LosSplit {
  TransientHistogram los;
  TransientHistogram nlos;
  LosPeak peak;
  std::size_t window_begin = 0;  ///< inclusive
  std::size_t window_end = 0;    ///< exclusive
};

/// Partitions h into the LOS window [peak - w, peak + w] and its complement.
inline LosSplit split_los_nlos(const TransientHistogram& h, std::size_t window_halfwidth,
                               std::optional<std::size_t> known_bin = std::nullopt) {
  LosSplit out;
  out.peak = find_los_peak(h, known_bin);
  out.window_begin = out.peak.bin >= window_halfwidth ? out.peak.bin - window_halfwidth : 0;
  out.window_end = std::min(h.size(), out.peak.bin + window_halfwidth + 1);
  out.los = TransientHistogram(h.size(), h.bin_width_ps, h.t0_ps);
  out.nlos = h;
  for (std::size_t k = out.window_begin; k < out.window_end; ++k) {
    out.los.counts[k] = h.counts[k];
    out.nlos.counts[k] = 0.0;
  }
  return out;
}

/// LOS half-window: three jitter FWHMs, in bins (at least one bin).
inline std::size_t default_los_halfwidth(const DiscreteKernel& kernel) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(3.0 * sampled_fwhm(kernel.values))));
}
inline std::size_t default_los_halfwidth(const JitterParams& jitter, double bin_width_ps) {
  return default_los_halfwidth(jitter_kernel(jitter, bin_width_ps));
}

// ---------------------------------------------------------------------------
// Gamma / MIP maps

struct LosOptions {
  std::size_t window_halfwidth = 75;
  /// Fixed background per bin; estimated from off-signal bins when unset.
  std::optional<double> bias;
  /// First bin after the plausible NLOS range; bins from here on also count
  /// as off-signal when estimating the bias.
  std::optional<std::size_t> nlos_end_bin;
  /// Known LOS bins per point (skips peak detection).
  std::vector<std::size_t> known_bins;
};

/// Mean count over bins before the LOS window and, if given, after the
/// plausible NLOS range. Zero when no such bins exist.
inline double estimate_bias(const TransientHistogram& h, std::size_t window_begin,
                            std::optional<std::size_t> nlos_end_bin) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < window_begin; ++k, ++n) sum += h.counts[k];
  if (nlos_end_bin) {
    for (std::size_t k = std::max(*nlos_end_bin, window_begin); k < h.size(); ++k, ++n) {
      sum += h.counts[k];
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

struct MapEntry {
  Vec2 xy = Vec2::Zero();
  double value = 0.0;
  double bias = 0.0;
  LosPeak peak;
  std::optional<std::string> error;  ///< set when the point could not be measured
};

/// Per-point map in pattern order (Gamma or MIP).
struct GammaMap {
  std::vector<MapEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<double> values() const {
    std::vector<double> v(entries.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = entries[i].value;
    return v;
  }
  double max_value() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.value);
    return m;
  }
  double min_value() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) {
      if (!e.error) m = std::min(m, e.value);
    }
    return entries.empty() ? 0.0 : m;
  }
  std::size_t failures() const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [](const MapEntry& e) { return e.error.has_value(); }));
  }
};

enum class MapKind { sum, max };

namespace detail {

inline GammaMap los_map(const TransientDataset& ds, const LosOptions& opt, MapKind kind) {
  if (!opt.known_bins.empty() && opt.known_bins.size() != ds.size()) {
    fail(ErrorCode::invalid_argument, "known LOS bins must cover every point");
  }
  GammaMap map;
  map.entries.resize(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    MapEntry& e = map.entries[i];
    e.xy = ds.points[i].wall_xy;
    const auto& h = ds.histograms[i];
    if (h.total() == 0.0) return;  // nothing detected: Gamma = 0
    try {
      std::optional<std::size_t> known;
      if (!opt.known_bins.empty()) known = opt.known_bins[i];
      const LosSplit split = split_los_nlos(h, opt.window_halfwidth, known);
      e.peak = split.peak;
      e.bias = opt.bias ? *opt.bias : estimate_bias(h, split.window_begin, opt.nlos_end_bin);
      const auto first = h.counts.begin() + static_cast<std::ptrdiff_t>(split.window_begin);
      const auto last = h.counts.begin() + static_cast<std::ptrdiff_t>(split.window_end);
      double v = 0.0;
      if (kind == MapKind::sum) {
        v = std::accumulate(first, last, 0.0) -
            e.bias * static_cast<double>(split.window_end - split.window_begin);
      } else {
        v = *std::max_element(first, last) - e.bias;
      }
      e.value = std::max(0.0, v);
    } catch (const Error& err) {
      e.error = err.what();
    }
  });
  return map;
}

}  // namespace detail

/// Sum of the bias-corrected LOS window per point.
inline GammaMap gamma_map(const TransientDataset& ds, const LosOptions& opt) {
  return detail::los_map(ds, opt, MapKind::sum);
}

/// Maximum of the LOS window per point, bias-corrected.
inline GammaMap mip_map(const TransientDataset& ds, const LosOptions& opt) {
  return detail::los_map(ds, opt, MapKind::max);
}

struct Normalized {
  TransientDataset dataset;
  std::vector<std::size_t> floored;  ///< points whose Gamma was below the floor
};

/// Divides every histogram by max(Gamma(s), floor * max Gamma).
inline Normalized normalize_by_gamma(const TransientDataset& ds, const GammaMap& g,
                                     double floor = 0.05) {
  if (g.size() != ds.size()) fail(ErrorCode::invalid_argument, "Gamma map does not cover the dataset");
  const double gmax = g.max_value();
  if (!(gmax > 0.0)) fail(ErrorCode::normalization, "Gamma map is identically zero");
  Normalized out{ds, {}};
  out.dataset.dtype = CountType::f32;
  const double lo = floor * gmax;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double gi = g.entries[i].value;
    if (g.entries[i].error || gi < lo || gi == 0.0) {
      out.floored.push_back(i);
      gi = std::max(gi, lo);
      if (g.entries[i].error) gi = lo;
    }
    for (double& c : out.dataset.histograms[i].counts) c /= gi;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction input

struct NlosPrepOptions {
  std::size_t window_halfwidth = 75;
  bool subtract_bias = true;
  std::optional<std::size_t> nlos_end_bin;
};

struct NlosPrepared {
  TransientDataset dataset;       ///< NLOS only, LOS peak at bin 0
  std::vector<LosPeak> peaks;     ///< in the input's bin coordinates
  std::vector<double> bias;       ///< per point, counts per bin
  std::vector<double> gamma;      ///< per point divisor, empty unless normalized
};

/// Removes the LOS window, subtracts the background and realigns each
/// histogram so its direct return sits at bin 0.
inline NlosPrepared prepare_nlos(const TransientDataset& ds, const NlosPrepOptions& opt) {
  NlosPrepared out;
  out.dataset = ds;
  out.peaks.resize(ds.size());
  out.bias.resize(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    const auto& h = ds.histograms[i];
    const LosSplit split = split_los_nlos(h, opt.window_halfwidth);
    out.peaks[i] = split.peak;
    double b = 0.0;
    if (opt.subtract_bias) b = estimate_bias(h, split.window_begin, opt.nlos_end_bin);
    out.bias[i] = b;
    TransientHistogram nlos = split.nlos;
    for (std::size_t k = 0; k < nlos.size(); ++k) {
      if (k >= split.window_begin && k < split.window_end) continue;
      nlos.counts[k] = std::max(0.0, nlos.counts[k] - b);
    }
    out.dataset.histograms[i] = realign(nlos, split.peak.bin).histogram;
  });
  if (opt.subtract_bias) out.dataset.dtype = CountType::f32;
  return out;
}

/// Reconstruction input: NLOS portion realigned at the LOS peak, background
/// removed, and divided by the Gamma map of the same histograms.
inline NlosPrepared nlos_measurements(const TransientDataset& ds, std::size_t window_halfwidth,
                                      double gamma_floor = 0.05) {
  NlosPrepOptions prep;
  prep.window_halfwidth = window_halfwidth;
  NlosPrepared out = prepare_nlos(ds, prep);
  LosOptions los;
  los.window_halfwidth = window_halfwidth;
  const GammaMap g = gamma_map(ds, los);
  out.dataset = normalize_by_gamma(out.dataset, g, gamma_floor).dataset;
  const double lo = gamma_floor * g.max_value();
  out.gamma.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.gamma[i] = g.entries[i].error ? lo : std::max(g.entries[i].value, lo);
  }
  return out;
}

/// Typical background per bin left in the prepared data, in its own units:
/// median of bias / Gamma over points. Removing the bias clamps at zero, so
/// roughly this much residual noise remains in every bin; using it as the
/// likelihood floor keeps the solver from explaining it with distant voxels.
inline double residual_background(const NlosPrepared& p) {
  std::vector<double> b(p.bias.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = p.gamma.empty() ? p.bias[i] : p.bias[i] / p.gamma[i];
  return b.empty() ? 0.0 : median_of(b);
}

}  // namespace nlos
