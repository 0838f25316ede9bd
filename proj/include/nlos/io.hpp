#pragma once

// File formats: JSON documents for models and metadata, CSV tables,
// little-endian raw arrays, and 8-bit PGM previews. Angles are degrees on
// disk and radians in memory.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlos/calibration.hpp"
#include "nlos/error.hpp"
#include "nlos/galvo.hpp"
#include "nlos/geometry.hpp"
#include "nlos/jitter.hpp"
#include "nlos/patterns.hpp"
#include "nlos/simulator.hpp"
#include "nlos/transient.hpp"
#include "nlos/volume.hpp"

namespace nlos::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Plain files

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::io, "short write to " + path.string());
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::format, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Runs fn, turning JSON access errors into format errors naming `what`.
template <class Fn>
auto parse_guard(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    fail(ErrorCode::format, what + ": " + e.what());
  }
}

template <class T>
void write_raw_le(const fs::path& path, const std::vector<T>& values) {
  static_assert(sizeof(T) == 4);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  std::vector<std::uint32_t> words(values.size());
  std::memcpy(words.data(), values.data(), values.size() * 4);
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& w : words) w = __builtin_bswap32(w);
  }
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) fail(ErrorCode::io, "short write to " + path.string());
}

template <class T>
std::vector<T> read_raw_le(const fs::path& path, std::size_t count) {
  static_assert(sizeof(T) == 4);
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint32_t> words(count);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(count * 4));
  if (static_cast<std::size_t>(in.gcount()) != count * 4) {
    fail(ErrorCode::format, path.string() + ": expected " + std::to_string(count * 4) + " bytes");
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    fail(ErrorCode::format, path.string() + ": trailing bytes after " + std::to_string(count) + " values");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& w : words) w = __builtin_bswap32(w);
  }
  std::vector<T> out(count);
  std::memcpy(out.data(), words.data(), count * 4);
  return out;
}

/// Splits a CSV file into rows, checking the header exactly.
inline std::vector<std::vector<double>> read_csv(const fs::path& path, const std::string& header) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::format, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) fail(ErrorCode::format, path.string() + ": expected header '" + header + "'");
  const auto columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        fail(ErrorCode::format, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != columns) {
      fail(ErrorCode::format, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(columns) + " columns");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Shortest decimal that round-trips to the same double.
inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

/// 8-bit binary PGM (P5), min-max normalized. Row 0 is the top of the image.
inline void write_pgm(const fs::path& path, int width, int height, const std::vector<double>& values) {
  if (static_cast<std::size_t>(width) * height != values.size()) {
    fail(ErrorCode::invalid_argument, "PGM size mismatch");
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = values.empty() ? 0.0 : *lo_it;
  const double hi = values.empty() ? 0.0 : *hi_it;
  std::string data = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  for (double v : values) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
  write_text(path, data);
}

// ---------------------------------------------------------------------------
// Geometry and galvo

inline json plane_to_json(const RelayPlane& p) {
  return {{"wx", p.wx()},
          {"wy", p.wy()},
          {"wz", p.wz()},
          {"origin", {p.origin().x(), p.origin().y(), p.origin().z()}},
          {"basis_x", {p.basis_x().x(), p.basis_x().y(), p.basis_x().z()}},
          {"basis_y", {p.basis_y().x(), p.basis_y().y(), p.basis_y().z()}},
          {"basis_z", {p.basis_z().x(), p.basis_z().y(), p.basis_z().z()}}};
}

inline RelayPlane plane_from_json(const json& j) {
  return parse_guard("plane", [&] {
    const auto o = j.at("origin").get<std::vector<double>>();
    if (o.size() != 3) fail(ErrorCode::format, "plane origin needs 3 values");
    return build_wall_frame({j.at("wx").get<double>(), j.at("wy").get<double>(), j.at("wz").get<double>()},
                            {o[0], o[1], o[2]});
  });
}

inline json galvo_to_json(const GalvoModel& g) {
  return {{"eps_deg", {rad_to_deg(g.eps.x()), rad_to_deg(g.eps.y())}},
          {"beta_deg_per_volt",
           {{rad_to_deg(g.beta(0, 0)), rad_to_deg(g.beta(0, 1))},
            {rad_to_deg(g.beta(1, 0)), rad_to_deg(g.beta(1, 1))}}},
          {"voltage_limit", g.voltage_limit}};
}

inline GalvoModel galvo_from_json(const json& j) {
  return parse_guard("galvo model", [&] {
    GalvoModel g;
    const auto eps = j.at("eps_deg").get<std::vector<double>>();
    const auto beta = j.at("beta_deg_per_volt").get<std::vector<std::vector<double>>>();
    if (eps.size() != 2 || beta.size() != 2 || beta[0].size() != 2 || beta[1].size() != 2) {
      fail(ErrorCode::format, "galvo model needs eps[2] and beta[2][2]");
    }
    g.eps = Vec2(deg_to_rad(eps[0]), deg_to_rad(eps[1]));
    g.beta << deg_to_rad(beta[0][0]), deg_to_rad(beta[0][1]), deg_to_rad(beta[1][0]), deg_to_rad(beta[1][1]);
    g.voltage_limit = j.value("voltage_limit", 5.0);
    return g;
  });
}

inline constexpr const char* kGalvoCsvHeader = "vx,vy,theta_x_deg,theta_y_deg";

inline std::vector<GalvoSample> read_galvo_csv(const fs::path& path) {
  std::vector<GalvoSample> out;
  for (const auto& r : read_csv(path, kGalvoCsvHeader)) {
    out.push_back({Vec2(r[0], r[1]), {deg_to_rad(r[2]), deg_to_rad(r[3])}});
  }
  return out;
}

inline void write_galvo_csv(const fs::path& path, const std::vector<GalvoSample>& samples) {
  std::string s = std::string(kGalvoCsvHeader) + "\n";
  for (const auto& g : samples) {
    s += fmt(g.voltages.x()) + "," + fmt(g.voltages.y()) + "," + fmt(rad_to_deg(g.measured.theta_x)) + "," +
         fmt(rad_to_deg(g.measured.theta_y)) + "\n";
  }
  write_text(path, s);
}

// ---------------------------------------------------------------------------
// Patterns

inline json pattern_to_json(const ScanPattern& p) {
  json params = json::object();
  for (const auto& [k, v] : p.params) params[k] = v;
  if (!p.source.empty()) params["source"] = p.source;
  json pts = json::array();
  for (const auto& xy : p.points) pts.push_back({xy.x(), xy.y()});
  return {{"kind", to_string(p.kind)}, {"params", params}, {"points_xy_m", pts}};
}

inline ScanPattern pattern_from_json(const json& j) {
  return parse_guard("pattern", [&] {
    ScanPattern p;
    p.kind = pattern_kind_from_string(j.at("kind").get<std::string>());
    for (const auto& [k, v] : j.at("params").items()) {
      if (v.is_number()) p.params[k] = v.get<double>();
      if (k == "source" && v.is_string()) p.source = v.get<std::string>();
    }
    for (const auto& xy : j.at("points_xy_m")) {
      if (xy.size() != 2) fail(ErrorCode::format, "pattern point needs 2 coordinates");
      p.points.emplace_back(xy[0].get<double>(), xy[1].get<double>());
    }
    validate_pattern(p);
    return p;
  });
}

inline constexpr const char* kPatternCsvHeader = "x_m,y_m";

inline ScanPattern read_pattern_csv(const fs::path& path) {
  ScanPattern p;
  p.kind = PatternKind::arbitrary;
  p.source = path.filename().string();
  for (const auto& r : read_csv(path, kPatternCsvHeader)) p.points.emplace_back(r[0], r[1]);
  validate_pattern(p);
  return p;
}

inline void write_pattern_csv(const fs::path& path, const ScanPattern& p) {
  std::string s = std::string(kPatternCsvHeader) + "\n";
  for (const auto& xy : p.points) s += fmt(xy.x()) + "," + fmt(xy.y()) + "\n";
  write_text(path, s);
}

// ---------------------------------------------------------------------------
// Jitter, wall, bbox

inline json jitter_to_json(const JitterParams& p) {
  return {{"mu_ps", p.mu}, {"sigma_ps", p.sigma}, {"kappa0_ps", p.kappa0}, {"kappa1_ps", p.kappa1}, {"gamma", p.gamma_w}};
}

inline JitterParams jitter_from_json(const json& j) {
  return parse_guard("jitter", [&] {
    const json& p = j.contains("params") ? j.at("params") : j;
    JitterParams out{p.at("mu_ps").get<double>(), p.at("sigma_ps").get<double>(), p.at("kappa0_ps").get<double>(),
                     p.at("kappa1_ps").get<double>(), p.at("gamma").get<double>()};
    out.validate();
    return out;
  });
}

inline json bbox_to_json(const BoundingBox& b) {
  return {{"x_m", {b.x_min, b.x_max}}, {"y_m", {b.y_min, b.y_max}}, {"z_min_m", b.z_min}, {"z_max_m", b.z_max}};
}

inline BoundingBox bbox_from_json(const json& j) {
  return parse_guard("bbox", [&] {
    BoundingBox b;
    const auto x = j.at("x_m").get<std::vector<double>>();
    const auto y = j.at("y_m").get<std::vector<double>>();
    if (x.size() != 2 || y.size() != 2) fail(ErrorCode::format, "bbox x_m/y_m need 2 values");
    b.x_min = x[0];
    b.x_max = x[1];
    b.y_min = y[0];
    b.y_max = y[1];
    b.z_min = j.at("z_min_m").get<double>();
    b.z_max = j.at("z_max_m").get<double>();
    return b;
  });
}

// ---------------------------------------------------------------------------
// Rig description (simulation only)

inline json rig_to_json(const RigConfig& cfg) {
  json j = {{"galvo", galvo_to_json(cfg.true_galvo)},
            {"plane", plane_to_json(cfg.true_plane)},
            {"bin_width_ps", cfg.bin_width_ps},
            {"num_bins", cfg.num_bins},
            {"photon_scale", cfg.photon_scale},
            {"wall_albedo", cfg.wall_albedo},
            {"cosine_falloff", cfg.cosine_falloff},
            {"nlos_gain", cfg.nlos_gain}};
  if (cfg.voxel_normal) j["voxel_normal"] = {cfg.voxel_normal->x(), cfg.voxel_normal->y(), cfg.voxel_normal->z()};
  return j;
}

/// Missing fields keep the values of `base`.
inline RigConfig rig_from_json(const json& j, RigConfig base = default_rig()) {
  return parse_guard("rig", [&] {
    RigConfig cfg = base;
    if (j.contains("galvo")) cfg.true_galvo = galvo_from_json(j.at("galvo"));
    if (j.contains("plane")) {
      const json& p = j.at("plane");
      const Eigen::Vector3d w(p.at("wx").get<double>(), p.at("wy").get<double>(), p.at("wz").get<double>());
      if (p.contains("origin")) {
        cfg.true_plane = plane_from_json(p);
      } else {
        if (w.norm() == 0.0) fail(ErrorCode::invalid_plane, "plane coefficients are all zero");
        cfg.true_plane = build_wall_frame(w, foot_of_origin(w));
      }
    }
    cfg.bin_width_ps = j.value("bin_width_ps", cfg.bin_width_ps);
    cfg.num_bins = j.value("num_bins", cfg.num_bins);
    cfg.photon_scale = j.value("photon_scale", cfg.photon_scale);
    cfg.wall_albedo = j.value("wall_albedo", cfg.wall_albedo);
    cfg.cosine_falloff = j.value("cosine_falloff", cfg.cosine_falloff);
    cfg.nlos_gain = j.value("nlos_gain", cfg.nlos_gain);
    if (j.contains("voxel_normal")) {
      const auto n = j.at("voxel_normal").get<std::vector<double>>();
      if (n.size() != 3) fail(ErrorCode::format, "voxel_normal needs 3 values");
      cfg.voxel_normal = Eigen::Vector3d(n[0], n[1], n[2]);
    }
    cfg.validate();
    return cfg;
  });
}

// ---------------------------------------------------------------------------
// Volumes: <base>.json sidecar + <base>.raw float32, x fastest

inline void write_volume(const fs::path& base, const VoxelVolume& v) {
  const auto& d = v.dims();
  const auto& b = v.bbox();
  json side = {{"dims", {d[0], d[1], d[2]}},
               {"bbox_m", {{"min", {b.min.x(), b.min.y(), b.min.z()}}, {"max", {b.max.x(), b.max.y(), b.max.z()}}}},
               {"dtype", "float32"},
               {"order", "x-fastest"},
               {"raw", base.filename().string() + ".raw"}};
  write_json(fs::path(base.string() + ".json"), side);
  std::vector<float> data(v.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(v[i]);
  write_raw_le(fs::path(base.string() + ".raw"), data);
}

/// Accepts either the base path or the .json sidecar path.
inline VoxelVolume read_volume(fs::path path) {
  if (path.extension() == ".json") path.replace_extension();
  const json side = read_json(fs::path(path.string() + ".json"));
  return parse_guard("volume sidecar", [&] {
    const auto d = side.at("dims").get<std::vector<int>>();
    const auto mn = side.at("bbox_m").at("min").get<std::vector<double>>();
    const auto mx = side.at("bbox_m").at("max").get<std::vector<double>>();
    if (d.size() != 3 || mn.size() != 3 || mx.size() != 3) fail(ErrorCode::format, "volume sidecar needs 3-vectors");
    VoxelVolume v({d[0], d[1], d[2]}, {{mn[0], mn[1], mn[2]}, {mx[0], mx[1], mx[2]}});
    const auto raw = read_raw_le<float>(fs::path(path.string() + ".raw"), v.size());
    for (std::size_t i = 0; i < raw.size(); ++i) v[i] = raw[i];
    v.validate();
    return v;
  });
}

/// Maximum-intensity projections along x, y and z as PGM images.
inline void write_volume_mips(const fs::path& base, const VoxelVolume& v) {
  const auto& d = v.dims();
  const auto proj = [&](int a, int b, int c, const std::string& name) {
    // Image axes (a: columns, b: rows), projected along c.
    std::vector<double> img(static_cast<std::size_t>(d[a]) * d[b], 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto ijk = v.coords(i);
      const int col = ijk[a];
      const int row = d[b] - 1 - ijk[b];
      auto& px = img[static_cast<std::size_t>(row) * d[a] + col];
      px = std::max(px, v[i]);
    }
    (void)c;
    write_pgm(fs::path(base.string() + "_mip_" + name + ".pgm"), d[a], d[b], img);
  };
  proj(0, 1, 2, "z");
  proj(0, 2, 1, "y");
  proj(1, 2, 0, "x");
}

// ---------------------------------------------------------------------------
// Dataset container: <dir>/meta.json + <dir>/histograms.bin

inline json scan_point_to_json(const ScanPoint& p, double t0_ps) {
  return {{"xy_m", {p.wall_xy.x(), p.wall_xy.y()}},
          {"xyz_m", {p.world.x(), p.world.y(), p.world.z()}},
          {"voltages", {p.voltages.x(), p.voltages.y()}},
          {"angles_deg", {rad_to_deg(p.angles.theta_x), rad_to_deg(p.angles.theta_y)}},
          {"t0_ps", t0_ps}};
}

inline void write_dataset(const fs::path& dir, const TransientDataset& ds, const json& extra = json::object()) {
  ds.validate();
  fs::create_directories(dir);
  json meta = {{"bin_width_ps", ds.bin_width_ps},
               {"num_bins", ds.num_bins},
               {"t0_ps", ds.histograms.empty() ? 0.0 : ds.histograms.front().t0_ps},
               {"exposure_s", ds.exposure_s},
               {"dtype", ds.dtype == CountType::u32 ? "uint32" : "float32"},
               {"enhanced", ds.enhanced},
               {"time_origin", "bin 0 = laser emission unless t0_ps says otherwise"},
               {"pattern", {{"kind", to_string(ds.pattern_kind)}, {"params", ds.pattern_params}}}};
  if (ds.eta) meta["eta"] = *ds.eta;
  if (!ds.jitter_source.empty()) meta["jitter_source"] = ds.jitter_source;
  json pts = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) pts.push_back(scan_point_to_json(ds.points[i], ds.histograms[i].t0_ps));
  meta["points"] = pts;
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  write_json(dir / "meta.json", meta);

  const std::size_t n = ds.size() * ds.num_bins;
  if (ds.dtype == CountType::u32) {
    std::vector<std::uint32_t> data;
    data.reserve(n);
    for (const auto& h : ds.histograms) {
      for (double c : h.counts) {
        if (c != std::floor(c) || c > 4294967295.0) {
          fail(ErrorCode::format, "uint32 dataset holds a non-integer count");
        }
        data.push_back(static_cast<std::uint32_t>(c));
      }
    }
    write_raw_le(dir / "histograms.bin", data);
  } else {
    std::vector<float> data;
    data.reserve(n);
    for (const auto& h : ds.histograms) {
      for (double c : h.counts) data.push_back(static_cast<float>(c));
    }
    write_raw_le(dir / "histograms.bin", data);
  }
}

inline TransientDataset read_dataset(const fs::path& dir) {
  const json meta = read_json(dir / "meta.json");
  TransientDataset ds = parse_guard("dataset meta", [&] {
    TransientDataset d;
    d.bin_width_ps = meta.at("bin_width_ps").get<double>();
    d.num_bins = meta.at("num_bins").get<std::size_t>();
    d.exposure_s = meta.value("exposure_s", 0.0);
    const std::string dtype = meta.value("dtype", "uint32");
    if (dtype != "uint32" && dtype != "float32") fail(ErrorCode::format, "unknown dtype " + dtype);
    d.dtype = dtype == "uint32" ? CountType::u32 : CountType::f32;
    d.enhanced = meta.value("enhanced", false);
    if (meta.contains("eta")) d.eta = meta.at("eta").get<double>();
    d.jitter_source = meta.value("jitter_source", "");
    if (meta.contains("pattern")) {
      d.pattern_kind = pattern_kind_from_string(meta.at("pattern").at("kind").get<std::string>());
      for (const auto& [k, v] : meta.at("pattern").at("params").items()) {
        if (v.is_number()) d.pattern_params[k] = v.get<double>();
      }
    }
    const double t0 = meta.value("t0_ps", 0.0);
    for (const auto& p : meta.at("points")) {
      ScanPoint sp;
      const auto xy = p.at("xy_m").get<std::vector<double>>();
      const auto xyz = p.at("xyz_m").get<std::vector<double>>();
      const auto v = p.at("voltages").get<std::vector<double>>();
      const auto a = p.at("angles_deg").get<std::vector<double>>();
      if (xy.size() != 2 || xyz.size() != 3 || v.size() != 2 || a.size() != 2) {
        fail(ErrorCode::format, "malformed dataset point record");
      }
      sp.wall_xy = Vec2(xy[0], xy[1]);
      sp.world = Point3(xyz[0], xyz[1], xyz[2]);
      sp.voltages = Vec2(v[0], v[1]);
      sp.angles = {deg_to_rad(a[0]), deg_to_rad(a[1])};
      d.points.push_back(sp);
      d.histograms.emplace_back(0, d.bin_width_ps, p.value("t0_ps", t0));
    }
    return d;
  });
  const std::size_t n = ds.size() * ds.num_bins;
  std::vector<double> values(n);
  if (ds.dtype == CountType::u32) {
    const auto raw = read_raw_le<std::uint32_t>(dir / "histograms.bin", n);
    std::copy(raw.begin(), raw.end(), values.begin());
  } else {
    const auto raw = read_raw_le<float>(dir / "histograms.bin", n);
    std::copy(raw.begin(), raw.end(), values.begin());
  }
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto first = values.begin() + static_cast<std::ptrdiff_t>(i * ds.num_bins);
    ds.histograms[i].counts.assign(first, first + static_cast<std::ptrdiff_t>(ds.num_bins));
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Gamma / MIP maps

inline void write_map_csv(const fs::path& path, const GammaMap& map) {
  std::string s = "index,x_m,y_m,value\n";
  for (std::size_t i = 0; i < map.size(); ++i) {
    const auto& e = map.entries[i];
    s += std::to_string(i) + "," + fmt(e.xy.x()) + "," + fmt(e.xy.y()) + "," + fmt(e.value) + "\n";
  }
  write_text(path, s);
}

inline GammaMap read_map_csv(const fs::path& path) {
  GammaMap map;
  for (const auto& r : read_csv(path, "index,x_m,y_m,value")) {
    MapEntry e;
    e.xy = Vec2(r[1], r[2]);
    e.value = r[3];
    map.entries.push_back(e);
  }
  return map;
}

/// PGM preview for row-major N x N grid maps; returns false for other layouts.
inline bool write_map_pgm(const fs::path& path, const GammaMap& map, PatternKind kind) {
  const auto n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(map.size()))));
  if (kind != PatternKind::grid || static_cast<std::size_t>(n) * n != map.size()) return false;
  write_pgm(path, n, n, map.values());
  return true;
}

}  // namespace nlos::io
