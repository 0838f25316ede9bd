// nlos: command-line front end for the confocal NLOS pipeline.
//
//   simulate -> calibrate galvo|wall|jitter -> gamma -> bbox -> enhance -> reconstruct
//
// Every command writes its artifacts plus a run.json record into -o DIR.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlos/nlos.hpp"

namespace {

using namespace nlos;
using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";
constexpr int kExitUsage = 1;
constexpr int kExitInternal = 70;

const char* kExitCodes =
    "Exit codes:\n"
    "   0  success\n"
    "   1  usage error (unknown flag, missing or malformed option)\n"
    "   2  invalid_argument    3  domain            4  invalid_plane\n"
    "   5  degenerate          6  out_of_range      7  histogram_overflow\n"
    "   8  ambiguous_peak      9  low_signal       10  normalization\n"
    "  11  step_failure       12  coverage         13  empty_box\n"
    "  14  io                 15  format           70  internal error\n"
    "Failures print one JSON object {\"error\": {...}} on stderr.\n"
    "Environment: NLOS_SEED sets the default --seed.";

// ---------------------------------------------------------------------------
// Argument parsing helpers

std::vector<double> split_numbers(const std::string& s, const std::string& seps) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t end = s.find_first_of(seps, pos);
    const std::string tok = s.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      fail(ErrorCode::invalid_argument, "bad number '" + tok + "' in '" + s + "'");
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

int as_count(double v, const char* what) {
  if (v != std::floor(v) || v < 1) fail(ErrorCode::invalid_argument, std::string(what) + " must be a positive integer");
  return static_cast<int>(v);
}

/// grid:NxL, circles:NR,NPHI,R (or NRxNPHIxR), file:PATH (.csv or .json);
/// a bare path is read as a file.
ScanPattern parse_pattern(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = colon == std::string::npos ? "" : spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? spec : spec.substr(colon + 1);
  if (kind == "grid") {
    const auto v = split_numbers(rest, "x,");
    if (v.size() != 2) fail(ErrorCode::invalid_argument, "grid pattern is grid:NxL");
    return gen_grid(as_count(v[0], "grid N"), v[1]);
  }
  if (kind == "circles") {
    const auto v = split_numbers(rest, "x,");
    if (v.size() != 3) fail(ErrorCode::invalid_argument, "circle pattern is circles:NR,NPHI,R");
    return gen_circles(as_count(v[0], "circle count"), as_count(v[1], "points per circle"), v[2]);
  }
  if (kind == "file" || kind.empty()) {
    const fs::path path = rest;
    if (path.extension() == ".json") return io::pattern_from_json(io::read_json(path));
    return io::read_pattern_csv(path);
  }
  fail(ErrorCode::invalid_argument, "unknown pattern kind '" + kind + "'");
}

/// "N" or "NXxNYxNZ".
std::array<int, 3> parse_dims(const std::string& s) {
  const auto v = split_numbers(s, "x,");
  if (v.size() == 1) {
    const int n = as_count(v[0], "dims");
    return {n, n, n};
  }
  if (v.size() != 3) fail(ErrorCode::invalid_argument, "dims is N or NXxNYxNZ");
  return {as_count(v[0], "dims"), as_count(v[1], "dims"), as_count(v[2], "dims")};
}

/// "xmin,ymin,zmin,xmax,ymax,zmax" in meters.
BoxExtents parse_box(const std::string& s) {
  const auto v = split_numbers(s, ",");
  if (v.size() != 6) fail(ErrorCode::invalid_argument, "bbox needs six comma-separated values");
  BoxExtents b{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
  if (!(b.max.array() > b.min.array()).all()) fail(ErrorCode::invalid_argument, "bbox max must exceed min");
  return b;
}

RelayPlane read_plane(const fs::path& p) {
  const json j = io::read_json(p);
  return io::plane_from_json(j.contains("plane") ? j.at("plane") : j);
}

GalvoModel read_galvo(const fs::path& p) {
  const json j = io::read_json(p);
  return io::galvo_from_json(j.contains("model") ? j.at("model") : j);
}

JitterParams read_jitter(const fs::path& p) { return io::jitter_from_json(io::read_json(p)); }

// ---------------------------------------------------------------------------
// Provenance

struct Context {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<std::string> argv;
};

/// Options of the command as resolved after flags and config file.
json resolved_options(const CLI::App& cmd) {
  json out = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->count() > 0) {
      const auto r = opt->reduced_results();
      out[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else if (!opt->get_default_str().empty()) {
      out[name] = opt->get_default_str();
    } else if (opt->get_type_size() == 0) {
      out[name] = false;
    }
  }
  return out;
}

void write_run(const fs::path& dir, const std::string& command, const CLI::App& cmd, const Context& ctx,
               const json& extra = json::object()) {
  json run = {{"tool", "nlos"},
              {"version", kVersion},
              {"command", command},
              {"seed", ctx.seed},
              {"argv", ctx.argv},
              {"inputs", resolved_options(cmd)}};
  for (const auto& [k, v] : extra.items()) run[k] = v;
  io::write_json(dir / "run.json", run);
}

void report(const json& summary) { std::cout << summary.dump() << "\n"; }

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string scene = "whiteboard";
  std::string dims = "32";
  std::string bbox = "-0.4,-0.4,0.4,0.4,0.4,1.2";
  double depth = 0.8;
  std::string pattern = "grid:16x0.8";
  std::string rig, jitter;
  bool no_jitter = false;
  double bias = 0.05;
  bool no_poisson = false;
  bool attenuation = false;
  double exposure = 0.0;
  int galvo_grid = 10;
  double angle_noise_deg = 0.01;
  std::string out;
};

void run_simulate(const SimulateArgs& a, const CLI::App& cmd, const Context& ctx) {
  RigConfig cfg = default_rig();
  if (!a.rig.empty()) cfg = io::rig_from_json(io::read_json(a.rig), cfg);
  cfg.validate();

  VoxelVolume scene;
  if (is_builtin_scene(a.scene)) {
    scene = make_scene(a.scene, parse_dims(a.dims), parse_box(a.bbox), a.depth);
  } else {
    scene = io::read_volume(a.scene);
  }
  scene.validate();

  const ScanPattern pattern = parse_pattern(a.pattern);
  const CompiledPattern compiled = compile_pattern(pattern, cfg.true_plane, cfg.true_galvo);
  if (!compiled.ok()) {
    const auto& f = compiled.failures.front();
    fail(f.code, "pattern point " + std::to_string(f.index) + ": " + f.message);
  }

  NoiseModel noise;
  if (!a.no_jitter) noise.jitter = a.jitter.empty() ? JitterParams{} : read_jitter(a.jitter);
  noise.bias = a.bias;
  noise.seed = ctx.seed;
  noise.poisson = !a.no_poisson;
  const Attenuation att = a.attenuation ? Attenuation::on : Attenuation::off;

  SimulatedDataset sim = simulate_dataset(cfg, scene, compiled, noise, att, a.exposure);
  sim.dataset.pattern_kind = pattern.kind;
  sim.dataset.pattern_params = pattern.params;

  const fs::path dir = a.out;
  io::write_dataset(dir, sim.dataset);
  io::write_volume(dir / "scene", scene);

  json truth = {{"rig", io::rig_to_json(cfg)}, {"bias", noise.bias}, {"attenuation", a.attenuation}};
  truth["jitter"] = noise.jitter ? io::jitter_to_json(*noise.jitter) : json(nullptr);
  json pts = json::array();
  for (const auto& t : sim.truth) {
    pts.push_back({{"gamma", t.gamma}, {"los_bin", t.los_bin}, {"arrival_ps", t.arrival_ps},
                   {"nlos_mass", t.nlos_mass}});
  }
  truth["points"] = pts;
  io::write_json(dir / "truth.json", truth);

  // Angle readings for galvo calibration, from an independent stream.
  const double vmax = 0.5 * cfg.true_galvo.voltage_limit;
  const auto samples = sample_galvo(cfg.true_galvo, a.galvo_grid, vmax, deg_to_rad(a.angle_noise_deg),
                                    ctx.seed ^ 0x9e3779b97f4a7c15ULL);
  io::write_galvo_csv(dir / "galvo_samples.csv", samples);

  write_run(dir, "simulate", cmd, ctx);
  report({{"points", sim.dataset.size()}, {"num_bins", sim.dataset.num_bins}, {"out", dir.string()}});
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
  std::string samples, method = "two-stage";
  double voltage_limit = 5.0;
  std::string dataset, galvo, plane, jitter, init;
  double delay_ps = -1.0;
  double bias = -1.0;
  std::size_t halfwidth = 0;
  std::string out;
};

void run_calibrate_galvo(const CalibrateArgs& a, const CLI::App& cmd, const Context& ctx) {
  if (a.method != "two-stage" && a.method != "joint") {
    fail(ErrorCode::invalid_argument, "method must be two-stage or joint");
  }
  const auto samples = io::read_galvo_csv(a.samples);
  const GalvoFit fit = fit_galvo(samples, a.method == "joint" ? GalvoFitMethod::joint : GalvoFitMethod::two_stage,
                                 a.voltage_limit);
  const json j = {{"model", io::galvo_to_json(fit.model)},
                  {"residual_rms_deg", {rad_to_deg(fit.residual_rms.x()), rad_to_deg(fit.residual_rms.y())}},
                  {"condition", fit.condition},
                  {"samples", samples.size()}};
  io::write_json(fs::path(a.out) / "galvo.json", j);
  write_run(a.out, "calibrate galvo", cmd, ctx);
  report(j);
}

void run_calibrate_wall(const CalibrateArgs& a, const CLI::App& cmd, const Context& ctx) {
  const TransientDataset ds = io::read_dataset(a.dataset);
  const GalvoModel galvo = read_galvo(a.galvo);
  double delay = a.delay_ps;
  if (delay < 0.0) {
    delay = a.jitter.empty() ? 0.0 : kernel_peak_delay(jitter_kernel(read_jitter(a.jitter), ds.bin_width_ps),
                                                        ds.bin_width_ps);
  }
  const DetectionPoints det = detection_points(ds, galvo, delay);
  const PlaneFit fit = fit_plane(det.points);
  std::string csv = "index,x_m,y_m,z_m,depth_m\n";
  for (std::size_t i = 0; i < det.points.size(); ++i) {
    const auto& p = det.points[i];
    csv += std::to_string(i) + "," + io::fmt(p.x()) + "," + io::fmt(p.y()) + "," + io::fmt(p.z()) + "," +
           io::fmt(det.depths[i]) + "\n";
  }
  const fs::path dir = a.out;
  io::write_text(dir / "detection_points.csv", csv);
  const json j = {{"plane", io::plane_to_json(fit.plane)},
                  {"rmse_m", fit.rmse},
                  {"seed_rmse_m", fit.seed_rmse},
                  {"delay_ps", delay},
                  {"points", det.points.size()}};
  io::write_json(dir / "plane.json", j);
  write_run(dir, "calibrate wall", cmd, ctx);
  report({{"rmse_m", fit.rmse}, {"out", dir.string()}});
}

void run_calibrate_jitter(const CalibrateArgs& a, const CLI::App& cmd, const Context& ctx) {
  const TransientDataset ds = io::read_dataset(a.dataset);
  const RelayPlane plane = read_plane(a.plane);
  const JitterParams init = a.init.empty() ? JitterParams{180.0, 55.0, 50.0, 30.0, 0.1} : read_jitter(a.init);
  const std::size_t w = a.halfwidth > 0 ? a.halfwidth : 2 * default_los_halfwidth(init, ds.bin_width_ps);
  std::vector<TransientHistogram> los;
  std::vector<double> arrival;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    los.push_back(split_los_nlos(ds.histograms[i], w).los);
    const Point3 s = wall_to_world(plane, ds.points[i].wall_xy);
    arrival.push_back(2.0 * s.norm() / kMetersPerPs);
  }
  JitterFitOptions opt;
  if (a.bias >= 0.0) opt.bias = a.bias;
  const JitterFit fit = fit_jitter(los, arrival, init, opt);
  const json j = {{"params", io::jitter_to_json(fit.params)},
                  {"converged", fit.converged},
                  {"points", ds.size()},
                  {"fwhm_ps", sampled_fwhm(jitter_kernel(fit.params, ds.bin_width_ps).values) * ds.bin_width_ps}};
  io::write_json(fs::path(a.out) / "jitter.json", j);
  write_run(a.out, "calibrate jitter", cmd, ctx);
  report(j);
}

// ---------------------------------------------------------------------------
// pattern

struct PatternArgs {
  std::string spec, plane, galvo, out;
};

void run_pattern(const PatternArgs& a, const CLI::App& cmd, const Context& ctx) {
  const ScanPattern pattern = parse_pattern(a.spec);
  const fs::path dir = a.out;
  io::write_json(dir / "pattern.json", io::pattern_to_json(pattern));
  io::write_pattern_csv(dir / "pattern.csv", pattern);
  json summary = {{"kind", to_string(pattern.kind)}, {"points", pattern.size()}};
  if (!a.plane.empty() || !a.galvo.empty()) {
    if (a.plane.empty() || a.galvo.empty()) fail(ErrorCode::invalid_argument, "compiling needs both --plane and --galvo");
    const CompiledPattern c = compile_pattern(pattern, read_plane(a.plane), read_galvo(a.galvo));
    json pts = json::array();
    for (const auto& p : c.points) pts.push_back(io::scan_point_to_json(p, 0.0));
    json fails = json::array();
    for (const auto& f : c.failures) {
      fails.push_back({{"index", f.index}, {"code", std::string(to_string(f.code))}, {"message", f.message}});
    }
    io::write_json(dir / "compiled.json", {{"points", pts}, {"failures", fails}});
    summary["failures"] = c.failures.size();
    write_run(dir, "pattern", cmd, ctx);
    report(summary);
    if (!c.ok()) fail(c.failures.front().code, std::to_string(c.failures.size()) + " pattern points cannot be reached");
    return;
  }
  write_run(dir, "pattern", cmd, ctx);
  report(summary);
}

// ---------------------------------------------------------------------------
// gamma

struct GammaArgs {
  std::string dataset, jitter, out;
  std::size_t halfwidth = 0;
  double bias = -1.0;
  bool mip = false;
};

std::size_t los_halfwidth(std::size_t given, const std::string& jitter, double bin_width_ps) {
  if (given > 0) return given;
  return default_los_halfwidth(jitter.empty() ? JitterParams{} : read_jitter(jitter), bin_width_ps);
}

void run_gamma(const GammaArgs& a, const CLI::App& cmd, const Context& ctx) {
  const TransientDataset ds = io::read_dataset(a.dataset);
  LosOptions opt;
  opt.window_halfwidth = los_halfwidth(a.halfwidth, a.jitter, ds.bin_width_ps);
  if (a.bias >= 0.0) opt.bias = a.bias;
  const fs::path dir = a.out;
  const GammaMap g = gamma_map(ds, opt);
  io::write_map_csv(dir / "gamma.csv", g);
  const bool pgm = io::write_map_pgm(dir / "gamma.pgm", g, ds.pattern_kind);
  json summary = {{"points", g.size()}, {"failures", g.failures()}, {"min", g.min_value()},
                  {"max", g.max_value()}, {"pgm", pgm}};
  if (a.mip) {
    const GammaMap m = mip_map(ds, opt);
    io::write_map_csv(dir / "mip.csv", m);
    io::write_map_pgm(dir / "mip.pgm", m, ds.pattern_kind);
  }
  std::vector<double> bias;
  for (const auto& e : g.entries) bias.push_back(e.bias);
  summary["bias_median"] = bias.empty() ? 0.0 : median_of(bias);
  write_run(dir, "gamma", cmd, ctx, {{"window_halfwidth", opt.window_halfwidth}});
  io::write_json(dir / "gamma_summary.json", summary);
  report(summary);
}

// ---------------------------------------------------------------------------
// bbox

struct BboxArgs {
  std::string dataset, jitter, out;
  std::size_t halfwidth = 0;
  double bias = -1.0;
  double delay_ps = 0.0;
  bool roundtrip = false;
};

void run_bbox(const BboxArgs& a, const CLI::App& cmd, const Context& ctx) {
  const TransientDataset ds = io::read_dataset(a.dataset);
  LosOptions opt;
  opt.window_halfwidth = los_halfwidth(a.halfwidth, a.jitter, ds.bin_width_ps);
  const GammaMap g = gamma_map(ds, opt);
  double bias = a.bias;
  if (bias < 0.0) {
    std::vector<double> b;
    for (const auto& e : g.entries) {
      if (!e.error) b.push_back(e.bias);
    }
    bias = b.empty() ? 0.0 : median_of(b);
  }
  std::vector<Vec2> xy;
  for (const auto& p : ds.points) xy.push_back(p.wall_xy);
  const BoundingBox box = estimate_bbox(ScanRegion::of(xy), g, bias, a.delay_ps,
                                        a.roundtrip ? ZMinRule::roundtrip : ZMinRule::literal);
  const json j = {{"bbox", io::bbox_to_json(box)}, {"gamma_min", g.min_value()}, {"bias", bias}};
  io::write_json(fs::path(a.out) / "bbox.json", j);
  write_run(a.out, "bbox", cmd, ctx);
  report(j);
}

// ---------------------------------------------------------------------------
// enhance

struct EnhanceArgs {
  std::string dataset, jitter, out;
  double snr = 0.0;
  bool nlos_snr = false;
};

void run_enhance(const EnhanceArgs& a, const CLI::App& cmd, const Context& ctx) {
  const TransientDataset ds = io::read_dataset(a.dataset);
  const JitterParams jitter = read_jitter(a.jitter);
  double eta = a.snr;
  if (!(eta > 0.0)) {
    eta = a.nlos_snr ? estimate_nlos_eta(ds, default_los_halfwidth(jitter, ds.bin_width_ps)) : estimate_eta(ds);
  }
  const Denoised d = denoise(ds, jitter, eta, a.jitter);
  double clamped = 0.0;
  for (double c : d.clamped_mass) clamped += c;
  io::write_dataset(a.out, d.dataset, {{"clamped_mass", clamped}});
  write_run(a.out, "enhance", cmd, ctx, {{"eta", eta}});
  report({{"eta", eta}, {"clamped_mass", clamped}, {"out", a.out}});
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructArgs {
  std::string dataset, jitter, out;
  std::string algo = "opt";
  std::string dims = "32";
  std::string bbox = "-0.4,-0.4,0.4,0.4,0.4,1.2";
  std::string bbox_file;
  std::size_t halfwidth = 0;
  int iters = 1000;
  double lambda = 0.0;
  bool attenuation = false;
  double stall = 1e-7;
  std::string epsilon = "1e-9";
};

void run_reconstruct(const ReconstructArgs& a, const CLI::App& cmd, const Context& ctx) {
  if (a.algo != "opt" && a.algo != "bp") fail(ErrorCode::invalid_argument, "algo must be opt or bp");
  const TransientDataset ds = io::read_dataset(a.dataset);
  BoxExtents box = parse_box(a.bbox);
  if (!a.bbox_file.empty()) {
    const json j = io::read_json(a.bbox_file);
    box = io::bbox_from_json(j.contains("bbox") ? j.at("bbox") : j).extents();
  }
  const std::size_t w = los_halfwidth(a.halfwidth, a.jitter, ds.bin_width_ps);
  const NlosPrepared prepared = nlos_measurements(ds, w);
  const Attenuation att = a.attenuation ? Attenuation::on : Attenuation::off;
  const std::array<int, 3> dims = parse_dims(a.dims);
  const ConfocalOperator op = make_operator(prepared.dataset, dims, box, att);
  const std::vector<double> tau = flatten(prepared.dataset);

  const fs::path dir = a.out;
  VoxelVolume vol;
  json summary = {{"algo", a.algo}, {"window_halfwidth", w}};
  if (a.algo == "bp") {
    vol = reconstruct_bp(op, tau);
  } else {
    ReconConfig rc;
    rc.dims = dims;
    rc.bbox = box;
    rc.max_iters = a.iters;
    rc.lambda = a.lambda;
    rc.attenuation = att;
    rc.stall_tolerance = a.stall;
    if (a.epsilon == "auto") {
      rc.epsilon = std::max(rc.epsilon, residual_background(prepared));
    } else {
      const auto v = split_numbers(a.epsilon, ",");
      if (v.size() != 1) fail(ErrorCode::invalid_argument, "epsilon is a number or 'auto'");
      rc.epsilon = v[0];
    }
    summary["epsilon"] = rc.epsilon;
    const ReconResult res = reconstruct_opt(op, tau, rc);
    vol = res.volume;
    std::string csv = "iteration,loss,data,step\n";
    for (std::size_t i = 0; i < res.loss_trace.size(); ++i) {
      csv += std::to_string(i) + "," + io::fmt(res.loss_trace[i]) + "," + io::fmt(res.data_trace[i]) + "," +
             io::fmt(i > 0 ? res.step_trace[i - 1] : 0.0) + "\n";
    }
    io::write_text(dir / "loss.csv", csv);
    summary["iterations"] = res.iterations;
    summary["converged"] = res.converged;
    summary["final_loss"] = res.loss_trace.back();
  }
  io::write_volume(dir / "volume", vol);
  io::write_volume_mips(dir / "volume", vol);
  write_run(dir, "reconstruct", cmd, ctx, {{"window_halfwidth", w}});
  report(summary);
}

// ---------------------------------------------------------------------------

void print_error(const std::string& kind, int code, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"exit_code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confocal non-line-of-sight imaging: simulate, calibrate and reconstruct.", "nlos"};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");

  Context ctx;
  for (int i = 1; i < argc; ++i) ctx.argv.emplace_back(argv[i]);
  // NLOS_SEED replaces the built-in default only; config files and flags win.
  std::string default_seed = "0";
  if (const char* env = std::getenv("NLOS_SEED")) {
    default_seed = env;
    if (default_seed.empty() || default_seed.find_first_not_of("0123456789") != std::string::npos) {
      print_error("usage", kExitUsage, "NLOS_SEED must be a non-negative integer");
      return kExitUsage;
    }
  }
  app.add_option("--seed", ctx.seed, "Random seed (default: $NLOS_SEED or 0)")->default_val(default_seed);
  app.add_option("--threads", ctx.threads, "Worker threads (0 = hardware parallelism)")->default_val(0);

  // simulate
  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Render a synthetic capture into a dataset directory");
  simulate->add_option("--scene", sim.scene, "Built-in scene (whiteboard, s-shape, checkerboard, reso-board) or volume file")
      ->capture_default_str();
  simulate->add_option("--dims", sim.dims, "Voxel grid N or NXxNYxNZ for built-in scenes")->capture_default_str();
  simulate->add_option("--bbox", sim.bbox, "Scene box xmin,ymin,zmin,xmax,ymax,zmax in meters")->capture_default_str();
  simulate->add_option("--depth", sim.depth, "Target depth from the wall, m")->capture_default_str();
  simulate->add_option("--pattern", sim.pattern, "grid:NxL | circles:NR,NPHI,R | file:PATH")->capture_default_str();
  simulate->add_option("--rig", sim.rig, "Rig JSON (galvo, plane, bins, photon scale)");
  simulate->add_option("--jitter", sim.jitter, "Jitter parameter JSON (default: reference SPAD)");
  simulate->add_flag("--no-jitter", sim.no_jitter, "Ideal timing");
  simulate->add_option("--bias", sim.bias, "Background counts per bin")->capture_default_str();
  simulate->add_flag("--no-poisson", sim.no_poisson, "Write expected counts (float32) instead of a draw");
  simulate->add_flag("--attenuation", sim.attenuation, "Apply the confocal attenuation term");
  simulate->add_option("--exposure", sim.exposure, "Exposure per point, s (metadata only)")->capture_default_str();
  simulate->add_option("--galvo-grid", sim.galvo_grid, "Galvo calibration samples per axis")->capture_default_str();
  simulate->add_option("--angle-noise-deg", sim.angle_noise_deg, "Angle reading noise, degrees")->capture_default_str();
  simulate->add_option("-o,--out", sim.out, "Output directory")->required();

  // calibrate
  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Fit galvo, relay wall or jitter models");
  calibrate->require_subcommand(1);
  auto* cal_galvo = calibrate->add_subcommand("galvo", "Affine voltage-to-angle model from angle readings");
  cal_galvo->add_option("--samples", cal.samples, "CSV vx,vy,theta_x_deg,theta_y_deg")->required();
  cal_galvo->add_option("--method", cal.method, "two-stage | joint")->capture_default_str();
  cal_galvo->add_option("--voltage-limit", cal.voltage_limit, "Admissible |V| per axis")->capture_default_str();
  cal_galvo->add_option("-o,--out", cal.out, "Output directory")->required();
  auto* cal_wall = calibrate->add_subcommand("wall", "Relay wall plane from LOS depths");
  cal_wall->add_option("--dataset", cal.dataset, "Dataset directory")->required();
  cal_wall->add_option("--galvo", cal.galvo, "galvo.json")->required();
  cal_wall->add_option("--jitter", cal.jitter, "Jitter JSON; its peak delay is removed from LOS times");
  cal_wall->add_option("--delay-ps", cal.delay_ps, "System delay, ps (overrides --jitter)");
  cal_wall->add_option("-o,--out", cal.out, "Output directory")->required();
  auto* cal_jitter = calibrate->add_subcommand("jitter", "SPAD timing response from LOS returns");
  cal_jitter->add_option("--dataset", cal.dataset, "Dataset directory")->required();
  cal_jitter->add_option("--plane", cal.plane, "plane.json")->required();
  cal_jitter->add_option("--init", cal.init, "Initial jitter JSON");
  cal_jitter->add_option("--bias", cal.bias, "Background per bin removed before fitting");
  cal_jitter->add_option("--halfwidth", cal.halfwidth, "LOS window half-width, bins");
  cal_jitter->add_option("-o,--out", cal.out, "Output directory")->required();

  // pattern
  PatternArgs pat;
  auto* pattern = app.add_subcommand("pattern", "Generate a scan pattern, optionally compiled to voltages");
  pattern->add_option("spec", pat.spec, "grid:NxL | circles:NR,NPHI,R | file:PATH")->required();
  pattern->add_option("--plane", pat.plane, "plane.json to compile against");
  pattern->add_option("--galvo", pat.galvo, "galvo.json to compile against");
  pattern->add_option("-o,--out", pat.out, "Output directory")->required();

  // gamma
  GammaArgs gam;
  auto* gamma = app.add_subcommand("gamma", "Per-point LOS intensity map");
  gamma->add_option("--dataset", gam.dataset, "Dataset directory")->required();
  gamma->add_option("--jitter", gam.jitter, "Jitter JSON (sets the LOS window)");
  gamma->add_option("--halfwidth", gam.halfwidth, "LOS window half-width, bins");
  gamma->add_option("--bias", gam.bias, "Known background per bin");
  gamma->add_flag("--mip", gam.mip, "Also write the max-intensity map");
  gamma->add_option("-o,--out", gam.out, "Output directory")->required();

  // bbox
  BboxArgs bb;
  auto* bbox = app.add_subcommand("bbox", "Measurable hidden region from Gamma and background");
  bbox->add_option("--dataset", bb.dataset, "Dataset directory")->required();
  bbox->add_option("--jitter", bb.jitter, "Jitter JSON (sets the LOS window)");
  bbox->add_option("--halfwidth", bb.halfwidth, "LOS window half-width, bins");
  bbox->add_option("--bias", bb.bias, "Background per bin (default: median estimate)");
  bbox->add_option("--delay-ps", bb.delay_ps, "Gate delay, ps")->capture_default_str();
  bbox->add_flag("--roundtrip-zmin", bb.roundtrip, "z_min = c t / 2 instead of c t");
  bbox->add_option("-o,--out", bb.out, "Output directory")->required();

  // enhance
  EnhanceArgs enh;
  auto* enhance = app.add_subcommand("enhance", "Wiener deconvolution of the jitter response");
  enhance->add_option("--dataset", enh.dataset, "Dataset directory")->required();
  enhance->add_option("--jitter", enh.jitter, "Jitter JSON")->required();
  enhance->add_option("--snr", enh.snr, "Wiener SNR eta (default: estimated)");
  enhance->add_flag("--nlos-snr", enh.nlos_snr, "Estimate eta from the NLOS peak instead of the LOS peak");
  enhance->add_option("-o,--out", enh.out, "Output dataset directory")->required();

  // reconstruct
  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand("reconstruct", "Recover the hidden albedo volume");
  reconstruct->add_option("--dataset", rec.dataset, "Dataset directory")->required();
  reconstruct->add_option("--algo", rec.algo, "opt | bp")->capture_default_str();
  reconstruct->add_option("--dims", rec.dims, "Voxel grid N or NXxNYxNZ")->capture_default_str();
  reconstruct->add_option("--bbox", rec.bbox, "xmin,ymin,zmin,xmax,ymax,zmax in meters")->capture_default_str();
  reconstruct->add_option("--bbox-file", rec.bbox_file, "bbox.json from the bbox command");
  reconstruct->add_option("--jitter", rec.jitter, "Jitter JSON (sets the LOS window)");
  reconstruct->add_option("--halfwidth", rec.halfwidth, "LOS window half-width, bins");
  reconstruct->add_option("--iters", rec.iters, "OPT iterations")->capture_default_str();
  reconstruct->add_option("--lambda", rec.lambda, "TV weight")->capture_default_str();
  reconstruct->add_option("--stall", rec.stall, "Relative loss change that stops OPT (0 runs every iteration)")
      ->capture_default_str();
  reconstruct->add_option("--epsilon", rec.epsilon,
                          "Likelihood floor, or 'auto' for the residual background level")
      ->capture_default_str();
  reconstruct->add_flag("--attenuation", rec.attenuation, "Model the confocal attenuation term");
  reconstruct->add_option("-o,--out", rec.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", kExitUsage, e.what());
    return kExitUsage;
  }

  try {
    set_max_threads(ctx.threads);
    if (*simulate) run_simulate(sim, *simulate, ctx);
    else if (*cal_galvo) run_calibrate_galvo(cal, *cal_galvo, ctx);
    else if (*cal_wall) run_calibrate_wall(cal, *cal_wall, ctx);
    else if (*cal_jitter) run_calibrate_jitter(cal, *cal_jitter, ctx);
    else if (*pattern) run_pattern(pat, *pattern, ctx);
    else if (*gamma) run_gamma(gam, *gamma, ctx);
    else if (*bbox) run_bbox(bb, *bbox, ctx);
    else if (*enhance) run_enhance(enh, *enhance, ctx);
    else if (*reconstruct) run_reconstruct(rec, *reconstruct, ctx);
  } catch (const Error& e) {
    const int code = static_cast<int>(e.code());
    print_error(std::string(to_string(e.code())), code, e.what());
    return code;
  } catch (const fs::filesystem_error& e) {
    print_error("io", static_cast<int>(ErrorCode::io), e.what());
    return static_cast<int>(ErrorCode::io);
  } catch (const std::exception& e) {
    print_error("internal", kExitInternal, e.what());
    return kExitInternal;
  }
  return 0;
}
