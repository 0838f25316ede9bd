#pragma once

// Virtual confocal capture rig. A hidden galvanometer and relay wall place
// each detection point; the hidden voxel scene is rendered into a clean
// transient by binning round-trip distances, the direct wall return is added
// with mass Gamma(s), and the SPAD response (jitter, bias, Poisson counts) is
// applied last.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "nlos/error.hpp"
#include "nlos/galvo.hpp"
#include "nlos/geometry.hpp"
#include "nlos/jitter.hpp"
#include "nlos/parallel.hpp"
#include "nlos/patterns.hpp"
#include "nlos/transient.hpp"
#include "nlos/volume.hpp"

namespace nlos {

struct NoiseModel {
  std::optional<JitterParams> jitter;  ///< unset: ideal timing (delta response)
  double bias = 0.0;                   ///< expected background counts per bin
  std::uint64_t seed = 0;
  bool poisson = true;                 ///< false returns the expected counts

  DiscreteKernel kernel(double bin_width_ps) const {
    return jitter ? jitter_kernel(*jitter, bin_width_ps) : DiscreteKernel::delta();
  }
};

struct RigConfig {
  GalvoModel true_galvo;
  RelayPlane true_plane = build_wall_frame({0.0, 0.0, -1.0}, {0.0, 0.0, 1.0});
  double bin_width_ps = 4.0;
  std::size_t num_bins = 4096;
  /// Gamma(s) = photon_scale * wall_albedo * cos(n_s, s->o) / |s - o|^2,
  /// with |s - o| in meters.
  double photon_scale = 1e4;
  double wall_albedo = 1.0;
  bool cosine_falloff = true;
  /// Ratio of NLOS to LOS flux per unit albedo, before Gamma.
  double nlos_gain = 1.0;
  /// Voxel normal used by the attenuation term. Unset: each voxel faces the
  /// wall origin.
  std::optional<Eigen::Vector3d> voxel_normal;

  void validate() const {
    if (!(bin_width_ps > 0.0)) fail(ErrorCode::invalid_argument, "bin width must be positive");
    if (num_bins < kMinBins) fail(ErrorCode::invalid_argument, "rig needs >= 16 bins");
    if (!(photon_scale >= 0.0) || !(wall_albedo >= 0.0) || !(nlos_gain >= 0.0)) {
      fail(ErrorCode::invalid_argument, "rig scales must be non-negative");
    }
  }
};

/// Reference rig: wall about one meter away, tilted a few degrees, and a
/// galvanometer with mild axis cross-coupling.
inline RigConfig default_rig() {
  RigConfig cfg;
  cfg.true_galvo.eps = Vec2(deg_to_rad(0.4), deg_to_rad(-0.3));
  cfg.true_galvo.beta << deg_to_rad(6.5), deg_to_rad(2.5), deg_to_rad(-2.0), deg_to_rad(6.8);
  const Eigen::Vector3d w = -Eigen::Vector3d(0.08, -0.05, 1.0).normalized();
  cfg.true_plane = build_wall_frame(w, foot_of_origin(w));
  cfg.photon_scale = 1e5;
  cfg.nlos_gain = 2e-4;
  return cfg;
}

/// Round-trip distance to bin index, rounding half away from zero.
inline long long distance_to_bin(double one_way_m, double bin_width_ps) {
  return std::llround(2.0 * one_way_m / (kMetersPerPs * bin_width_ps));
}

/// Confocal attenuation (omega_{p->s} . n_p)^2 (omega_{s->p} . n_s)^2 / |p - s|^4
/// in wall coordinates, with n_s = +z. Back-facing terms contribute zero.
inline double confocal_attenuation(const Point3& p, const Point3& s, const Eigen::Vector3d& n_p) {
  const Eigen::Vector3d d = s - p;
  const double r2 = d.squaredNorm();
  if (r2 == 0.0) return 0.0;
  const double r = std::sqrt(r2);
  const double cos_p = std::max(0.0, d.dot(n_p) / r);
  const double cos_s = std::max(0.0, -d.z() / r);
  return cos_p * cos_p * cos_s * cos_s / (r2 * r2);
}

enum class Attenuation { off, on };

/// Clean NLOS transient at wall point s (wall frame, z = 0): every voxel with
/// positive albedo deposits f_p (times the attenuation term when enabled)
/// into bin round(2 |p - s| / (c dt)).
inline TransientHistogram render_clean_transient(const VoxelVolume& volume, const Vec2& s_xy,
                                                 const RigConfig& cfg, Attenuation attenuation) {
  TransientHistogram h(cfg.num_bins, cfg.bin_width_ps, 0.0);
  const Point3 s(s_xy.x(), s_xy.y(), 0.0);
  const auto& f = volume.data();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(f[i] > 0.0)) continue;
    const Point3 p = volume.center(i);
    const long long k = distance_to_bin((p - s).norm(), cfg.bin_width_ps);
    if (k < 0 || k >= static_cast<long long>(cfg.num_bins)) {
      const auto c = volume.coords(i);
      std::ostringstream msg;
      msg << "voxel (" << c[0] << ", " << c[1] << ", " << c[2] << ") maps to bin " << k
          << " beyond " << cfg.num_bins << " bins";
      fail(ErrorCode::histogram_overflow, msg.str());
    }
    double w = f[i];
    if (attenuation == Attenuation::on) {
      const Eigen::Vector3d n_p = cfg.voxel_normal ? cfg.voxel_normal->normalized()
                                                   : Eigen::Vector3d((-p).normalized());
      w *= confocal_attenuation(p, s, n_p);
    }
    h.counts[static_cast<std::size_t>(k)] += w;
  }
  return h;
}

/// Deterministic per-stream generator: independent of scheduling order.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Pois((h * j)(t) + b) per bin. `stream` selects an independent generator.
inline TransientHistogram apply_spad_noise(const TransientHistogram& clean, const NoiseModel& noise,
                                           std::uint64_t stream = 0) {
  if (!(noise.bias >= 0.0)) fail(ErrorCode::invalid_argument, "bias must be non-negative");
  TransientHistogram out = clean;
  out.counts = convolve(clean.counts, noise.kernel(clean.bin_width_ps));
  for (double& c : out.counts) c += noise.bias;
  if (!noise.poisson) return out;
  auto rng = stream_rng(noise.seed, stream);
  for (double& c : out.counts) {
    if (c > 0.0) {
      std::poisson_distribution<long long> draw(c);
      c = static_cast<double>(draw(rng));
    } else {
      c = 0.0;
    }
  }
  return out;
}

/// Hidden truth for one capture; for tests and diagnostics only.
struct CaptureTruth {
  Point3 world = Point3::Zero();
  Vec2 wall_xy = Vec2::Zero();
  ScanAngles angles;
  double gamma = 0.0;         ///< expected LOS counts
  std::size_t los_bin = 0;    ///< bin of the undelayed direct return
  double arrival_ps = 0.0;    ///< exact round trip 2 |s - o| / c
  double nlos_mass = 0.0;     ///< expected NLOS counts before jitter/bias
};

struct Capture {
  TransientHistogram histogram;
  CaptureTruth truth;
};

/// Where the hidden galvanometer and wall put the laser spot.
inline CaptureTruth locate_spot(const RigConfig& cfg, const Vec2& voltages) {
  CaptureTruth t;
  t.angles = voltages_to_angles(cfg.true_galvo, voltages);
  const Eigen::Vector3d dir =
      Eigen::Vector3d(std::tan(t.angles.theta_x), std::tan(t.angles.theta_y), 1.0).normalized();
  const double denom = cfg.true_plane.coeffs().dot(dir);
  if (!(denom < 0.0)) fail(ErrorCode::domain, "scan ray does not hit the relay wall");
  const double range = -1.0 / denom;
  t.world = range * dir;
  t.wall_xy = transform_point(cfg.true_plane, t.world, Direction::world_to_wall).head<2>();
  const double cos_s = std::max(0.0, cfg.true_plane.basis_z().dot(-dir));
  t.gamma = cfg.photon_scale * cfg.wall_albedo * (cfg.cosine_falloff ? cos_s : 1.0) /
            (range * range);
  t.arrival_ps = 2.0 * range / kMetersPerPs;
  const long long k = distance_to_bin(range, cfg.bin_width_ps);
  if (k < 0 || k >= static_cast<long long>(cfg.num_bins)) {
    fail(ErrorCode::histogram_overflow, "direct wall return falls outside the histogram");
  }
  t.los_bin = static_cast<std::size_t>(k);
  return t;
}

/// One confocal capture at the commanded voltages.
inline Capture rig_capture(const RigConfig& cfg, const VoxelVolume& volume, const Vec2& voltages,
                           const NoiseModel& noise, std::uint64_t stream = 0,
                           Attenuation attenuation = Attenuation::off) {
  cfg.validate();
  const double lim = cfg.true_galvo.voltage_limit;
  if (std::abs(voltages.x()) > lim || std::abs(voltages.y()) > lim) {
    fail(ErrorCode::out_of_range, "commanded voltages outside the admissible range");
  }
  Capture cap;
  cap.truth = locate_spot(cfg, voltages);
  const TransientHistogram clean = render_clean_transient(volume, cap.truth.wall_xy, cfg, attenuation);

  TransientHistogram expected(cfg.num_bins, cfg.bin_width_ps, 0.0);
  const std::size_t k0 = cap.truth.los_bin;
  const double g = cap.truth.gamma;
  expected.counts[k0] += g;
  for (std::size_t k = 0; k < clean.size(); ++k) {
    if (clean.counts[k] == 0.0) continue;
    if (k0 + k >= cfg.num_bins) {
      fail(ErrorCode::histogram_overflow, "NLOS return falls outside the histogram");
    }
    const double v = g * cfg.nlos_gain * clean.counts[k];
    expected.counts[k0 + k] += v;
    cap.truth.nlos_mass += v;
  }
  cap.histogram = apply_spad_noise(expected, noise, stream);
  return cap;
}

struct SimulatedDataset {
  TransientDataset dataset;
  std::vector<CaptureTruth> truth;
};

/// Captures every compiled point. Point i draws from generator stream i.
inline SimulatedDataset simulate_dataset(const RigConfig& cfg, const VoxelVolume& volume,
                                         const CompiledPattern& compiled, const NoiseModel& noise,
                                         Attenuation attenuation = Attenuation::off,
                                         double exposure_s = 0.0) {
  if (!compiled.ok()) fail(ErrorCode::out_of_range, compiled.failures.front().message);
  SimulatedDataset out;
  auto& ds = out.dataset;
  ds.points = compiled.points;
  ds.bin_width_ps = cfg.bin_width_ps;
  ds.num_bins = cfg.num_bins;
  ds.exposure_s = exposure_s;
  ds.dtype = noise.poisson ? CountType::u32 : CountType::f32;
  ds.histograms.resize(compiled.points.size());
  out.truth.resize(compiled.points.size());
  parallel_for(compiled.points.size(), [&](std::size_t i) {
    Capture cap = rig_capture(cfg, volume, compiled.points[i].voltages, noise, i, attenuation);
    ds.histograms[i] = std::move(cap.histogram);
    out.truth[i] = cap.truth;
  });
  return out;
}

/// Noisy angle readings from the hidden galvanometer on a symmetric
/// n x n voltage grid spanning [-v_max, v_max] per axis.
inline std::vector<GalvoSample> sample_galvo(const GalvoModel& truth, int n, double v_max,
                                             double angle_noise_rad, std::uint64_t seed) {
  if (n < 2) fail(ErrorCode::invalid_argument, "galvo sample grid needs n >= 2");
  auto rng = stream_rng(seed, 0);
  std::normal_distribution<double> noise(0.0, angle_noise_rad);
  std::vector<GalvoSample> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      GalvoSample s;
      s.voltages = Vec2(-v_max + 2.0 * v_max * j / (n - 1), -v_max + 2.0 * v_max * i / (n - 1));
      s.measured = voltages_to_angles(truth, s.voltages);
      if (angle_noise_rad > 0.0) {
        s.measured.theta_x += noise(rng);
        s.measured.theta_y += noise(rng);
      }
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace nlos
