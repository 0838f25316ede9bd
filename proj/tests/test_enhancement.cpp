#include <gtest/gtest.h>

#include <complex>

#include "support.hpp"

using namespace nlos;

namespace {

// O(n^2) DFT as an independent reference.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> s = 0;
    for (std::size_t m = 0; m < n; ++m) {
      s += x[m] * std::polar(1.0, -2 * std::numbers::pi * double(k * m % n) / double(n));
    }
    out[k] = s;
  }
  return out;
}

std::vector<double> smooth_signal(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k);
    x[k] = 50 * std::exp(-std::pow(t - 300, 2) / (2 * 20 * 20)) + 20 * std::exp(-std::pow(t - 620, 2) / (2 * 30 * 30));
  }
  return x;
}

}  // namespace

TEST(Enhancement, WienerKernelMatchesClosedForm) {
  const DiscreteKernel k = jitter_kernel({40, 8, 50, 30, 0.1}, 4.0);
  const auto dft = naive_dft(k.dense(128));
  const Spectrum w = wiener_kernel(k, 128, 50.0);
  for (std::size_t i = 0; i < 128; ++i) {
    const auto ref = 1.0 / dft[i] / (1.0 + 1.0 / (50.0 * std::norm(dft[i])));
    EXPECT_LT(std::abs(w[i] - ref), 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST(Enhancement, WienerRejectsBadEta) {
  const DiscreteKernel k = jitter_kernel({40, 8, 50, 30, 0}, 4.0);
  EXPECT_THROW(wiener_kernel(k, 128, 0.0), Error);
  EXPECT_THROW(wiener_kernel(k, 8, 1.0), Error);
}

TEST(Enhancement, RoundTripSmoothSignal) {
  const std::size_t n = 1024;
  const auto x = smooth_signal(n);
  const JitterParams jp{200, 42.5, 50, 30, 0};
  const DiscreteKernel k = jitter_kernel(jp, 4.0);
  // Circular blur so the model matches the filter exactly.
  std::vector<double> y(n, 0.0);
  const auto dense = k.dense(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < n; ++m) y[(i + m) % n] += x[i] * dense[m];
  }
  const auto r = wiener_filter(y, wiener_kernel(k, n, 1e6));
  double num = 0, den = 0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (r[i] - x[i]) * (r[i] - x[i]);
    den += x[i] * x[i];
  }
  EXPECT_LT(std::sqrt(num / den), 1e-3);
  EXPECT_EQ(std::max_element(r.begin(), r.end()) - r.begin(), std::max_element(x.begin(), x.end()) - x.begin());
}

TEST(Enhancement, DenoiseMarksDataset) {
  TransientDataset ds;
  ds.num_bins = 256;
  ds.points.resize(1);
  TransientHistogram h(256, 4.0);
  h.counts[40] = 1e5;
  NoiseModel noise;
  noise.jitter = JitterParams{};
  noise.bias = 1.0;
  noise.seed = 2;
  ds.histograms.push_back(apply_spad_noise(h, noise));
  const double eta = estimate_eta(ds);
  EXPECT_GT(eta, 1.0);
  const Denoised d = denoise(ds, *noise.jitter, eta, "test");
  EXPECT_TRUE(d.dataset.enhanced);
  EXPECT_EQ(d.dataset.dtype, CountType::f32);
  EXPECT_EQ(d.dataset.jitter_source, "test");
  ASSERT_TRUE(d.dataset.eta);
  for (double c : d.dataset.histograms[0].counts) EXPECT_GE(c, 0.0);
  // The jitter delay is removed: the restored peak sits near the true bin.
  const auto& c = d.dataset.histograms[0].counts;
  const auto arg = std::max_element(c.begin(), c.end()) - c.begin();
  EXPECT_NEAR(static_cast<double>(arg), 40.0, 2.0);
}

TEST(Enhancement, NlosEtaIgnoresDirectReturn) {
  // Flat background 2, LOS spike 5000 at bin 200, NLOS peak of known height.
  TransientDataset ds;
  ds.num_bins = 1024;
  const double nlos_peaks[] = {30.0, 40.0, 55.0};
  for (double p : nlos_peaks) {
    TransientHistogram h(ds.num_bins, ds.bin_width_ps, 0.0);
    for (double& c : h.counts) c = 2.0;
    h.counts[200] = 5000.0;
    h.counts[400] = 2.0 + p;
    ds.points.emplace_back();
    ds.histograms.push_back(h);
  }
  EXPECT_DOUBLE_EQ(estimate_nlos_eta(ds, 10), 40.0);
  // Noise-free background: the LOS heuristic falls back to the peak count.
  EXPECT_DOUBLE_EQ(estimate_eta(ds), 5000.0);
}
