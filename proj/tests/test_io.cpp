#include <gtest/gtest.h>

#include <filesystem>

#include "support.hpp"

using namespace nlos;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nlos_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Io, DatasetRoundTrip) {
  const RigConfig cfg = fixtures::test_rig();
  const auto compiled = compile_pattern(gen_grid(3, 0.4), cfg.true_plane, cfg.true_galvo);
  VoxelVolume v({4, 4, 4}, {{-0.2, -0.2, 0.5}, {0.2, 0.2, 0.9}});
  v[v.index(1, 2, 3)] = 1.0;
  NoiseModel noise;
  noise.jitter = JitterParams{};
  noise.bias = 0.2;
  noise.seed = 3;
  auto ds = simulate_dataset(cfg, v, compiled, noise).dataset;
  const fs::path dir = scratch("ds");
  io::write_dataset(dir, ds);
  const TransientDataset back = io::read_dataset(dir);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.dtype, CountType::u32);
  EXPECT_EQ(fs::file_size(dir / "histograms.bin"), ds.size() * ds.num_bins * 4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.histograms[i].counts, ds.histograms[i].counts);
    EXPECT_LT((back.points[i].world - ds.points[i].world).norm(), 1e-12);
    EXPECT_NEAR(back.points[i].angles.theta_x, ds.points[i].angles.theta_x, 1e-15);
  }
  // Little-endian on disk regardless of host.
  std::ifstream in(dir / "histograms.bin", std::ios::binary);
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  const auto first = static_cast<std::uint32_t>(ds.histograms[0].counts[0]);
  EXPECT_EQ(bytes[0], first & 0xFF);
  EXPECT_EQ(bytes[1], (first >> 8) & 0xFF);
}

TEST(Io, FloatDatasetAndTruncation) {
  TransientDataset ds;
  ds.num_bins = 16;
  ds.dtype = CountType::f32;
  ds.enhanced = true;
  ds.eta = 12.5;
  ds.points.resize(1);
  ds.histograms.emplace_back(16, 4.0);
  ds.histograms[0].counts[3] = 0.25;
  const fs::path dir = scratch("f32");
  io::write_dataset(dir, ds);
  const auto back = io::read_dataset(dir);
  EXPECT_TRUE(back.enhanced);
  EXPECT_EQ(*back.eta, 12.5);
  EXPECT_EQ(back.histograms[0].counts[3], 0.25);
  fs::resize_file(dir / "histograms.bin", 60);
  try {
    io::read_dataset(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::format);
  }
}

TEST(Io, VolumeRoundTrip) {
  const VoxelVolume v = make_scene("s-shape", {8, 8, 4}, {{-0.4, -0.4, 0.5}, {0.4, 0.4, 1.0}}, 0.8);
  const fs::path dir = scratch("vol");
  io::write_volume(dir / "scene", v);
  const VoxelVolume back = io::read_volume(dir / "scene.json");
  EXPECT_EQ(back.dims(), v.dims());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(back[i], static_cast<float>(v[i]));
  EXPECT_EQ(fs::file_size(dir / "scene.raw"), v.size() * 4);
}

TEST(Io, ModelsRoundTripInDegrees) {
  const GalvoModel g = fixtures::skewed_galvo();
  const auto j = io::galvo_to_json(g);
  EXPECT_NEAR(j["beta_deg_per_volt"][0][0].get<double>(), 6.5, 1e-12);
  const GalvoModel back = io::galvo_from_json(j);
  EXPECT_LT((back.beta - g.beta).norm(), 1e-15);
  const RelayPlane p = fixtures::tilted_wall();
  const RelayPlane pb = io::plane_from_json(io::plane_to_json(p));
  EXPECT_LT((pb.basis() - p.basis()).norm(), 1e-15);
  const JitterParams jp{190, 41, 55, 28, 0.1};
  const JitterParams jb = io::jitter_from_json(io::jitter_to_json(jp));
  EXPECT_EQ(jb.sigma, 41);
  EXPECT_EQ(jb.gamma_w, 0.1);
}

TEST(Io, CsvFormats) {
  const fs::path dir = scratch("csv");
  const auto samples = sample_galvo(fixtures::skewed_galvo(), 3, 2.0, 0.0, 0);
  io::write_galvo_csv(dir / "g.csv", samples);
  const auto back = io::read_galvo_csv(dir / "g.csv");
  ASSERT_EQ(back.size(), 9u);
  EXPECT_NEAR(back[4].measured.theta_x, samples[4].measured.theta_x, 1e-15);

  io::write_text(dir / "bad.csv", "x_m,y_m\n0.1,zzz\n");
  try {
    io::read_pattern_csv(dir / "bad.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::format);
  }
  io::write_text(dir / "hdr.csv", "x,y\n0.1,0.2\n");
  EXPECT_THROW(io::read_pattern_csv(dir / "hdr.csv"), Error);
  io::write_text(dir / "ok.csv", "x_m,y_m\n0.1,0.2\n-0.1,0.3\n");
  const ScanPattern p = io::read_pattern_csv(dir / "ok.csv");
  EXPECT_EQ(p.size(), 2u);
  EXPECT_EQ(p.kind, PatternKind::arbitrary);
  const ScanPattern pj = io::pattern_from_json(io::pattern_to_json(gen_circles(2, 3, 0.2)));
  EXPECT_EQ(pj.kind, PatternKind::circles);
  EXPECT_EQ(pj.size(), 6u);
}

TEST(Io, PgmHeader) {
  const fs::path dir = scratch("pgm");
  io::write_pgm(dir / "a.pgm", 3, 2, {0, 1, 2, 3, 4, 5});
  const std::string s = io::read_text(dir / "a.pgm");
  EXPECT_EQ(s.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(s.size(), 11u + 6);
  EXPECT_EQ(static_cast<unsigned char>(s.back()), 255);
}
