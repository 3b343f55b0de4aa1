#include "dff/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "dff/align.hpp"
#include "dff/calib.hpp"
#include "dff/focusvol.hpp"
#include "dff/gradcheck.hpp"
#include "dff/imageio.hpp"
#include "dff/metrics.hpp"
#include "dff/optics.hpp"
#include "dff/parallel.hpp"
#include "dff/scene.hpp"
#include "dff/simulator.hpp"
#include "dff/textio.hpp"

namespace fs = std::filesystem;

namespace dff {

std::string RunManifest::format() const {
  std::ostringstream os;
  os << "tool = dfflab\n"
     << "version = " << kToolVersion << '\n'
     << "subcommand = " << subcommand << '\n'
     << "seed = " << seed << '\n';
  for (const auto& [k, v] : parameters) os << "param." << k << " = " << v << '\n';
  for (std::size_t i = 0; i < inputs.size(); ++i) os << "input." << i << " = " << inputs[i] << '\n';
  for (std::size_t i = 0; i < outputs.size(); ++i) os << "output." << i << " = " << outputs[i] << '\n';
  return os.str();
}

namespace {

struct SimulateArgs {
  std::string rgb, depth, camera, errors, out, format = "pfm", psf = "disc";
  bool no_misalign = false;
  std::uint64_t seed = 0;
  int layers = 32;
};

struct CalibrateArgs {
  std::string stacks, out;
};

struct AlignArgs {
  std::string stack, out, format = "pfm";
  double q = 0.4;
  double eps = 0.01;
  int levels = 3;
};

struct DepthArgs {
  std::string stack, out, measure = "ring";
  int radius = 2;
  double temp = 10.0;
  bool wta = false;
  bool raw_scores = false;
};

struct EvalArgs {
  std::string pred, gt, csv, name = "pred";
  double fmin = 0.0;
  double fmax = 0.0;
};

struct SceneArgs {
  std::string out;
  std::uint64_t seed = 1;
  int size = 256;
  int slices = 10;
  bool pattern = false;
};

SliceFormat parse_format(const std::string& s) { return s == "png" ? SliceFormat::kPng : SliceFormat::kPfm; }

std::string describe(const BasisCoefficients& c) {
  return format_real(c.alpha) + ' ' + format_real(c.beta) + ' ' + format_real(c.gamma);
}

void write_manifest(const RunManifest& m, const fs::path& path) { write_text_file(path, m.format()); }

DepthMap read_depth(const fs::path& path) {
  Image img = read_image(path);
  if (img.channels() != 1) throw DataError(path.string() + ": depth map must have one channel");
  DepthMap d{img, Image(img.width(), img.height(), 1, 1.0f), Mask(img.width(), img.height(), false)};
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float v = img.at(x, y);
      d.valid.set(x, y, std::isfinite(v) && v > 0.0f);
    }
  }
  return d;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const Image rgb = read_image(a.rgb);
  const Image depth = read_image(a.depth);
  const CameraConfig cam = load_camera_config(a.camera);
  if (rgb.channels() != 3) throw DataError(a.rgb + ": expected an RGB image");
  if (depth.channels() != 1) throw DataError(a.depth + ": expected a single-channel depth map");
  if (rgb.width() != cam.image_width_px() || rgb.height() != cam.image_height_px()) {
    throw DataError("image size does not match the camera configuration");
  }
  std::optional<ErrorModel> model;
  if (!a.no_misalign) {
    if (!a.errors.empty()) {
      model = to_error_model(parse_error_ranges(read_text_file(a.errors)), a.seed);
    } else {
      model = ErrorModel{};
      model->seed = a.seed;
    }
  }
  RenderOptions opts;
  opts.layers = a.layers;
  opts.psf = a.psf == "gaussian" ? PsfShape::kGaussian : PsfShape::kDisc;
  const SimulatedStack sim = render_stack(rgb, depth, cam, model, opts);

  const fs::path dir(a.out);
  save_stack(sim.stack, dir, parse_format(a.format));
  std::ostringstream truth;
  truth << "# index residual_alpha residual_beta residual_gamma total_alpha total_beta total_gamma\n";
  for (std::size_t i = 0; i < sim.stack.size(); ++i) {
    truth << i << ' ' << describe(sim.residual_truth[i]) << ' ' << describe(sim.total_truth[i]) << '\n';
  }
  write_text_file(dir / "truth.txt", truth.str());

  RunManifest m{"simulate", {}, {a.rgb, a.depth, a.camera}, {a.out}, a.seed};
  if (!a.errors.empty()) m.inputs.push_back(a.errors);
  m.parameters = {{"layers", std::to_string(a.layers)},
                  {"psf", a.psf},
                  {"format", a.format},
                  {"misalign", a.no_misalign ? "none" : (a.errors.empty() ? "default" : "calibrated")}};
  if (model) {
    m.parameters.emplace_back("scale_err_range",
                              format_real(model->scale_err_range.first) + ", " + format_real(model->scale_err_range.second));
    m.parameters.emplace_back("translation_err_range_px", format_real(model->translation_err_range_px.first) + ", " +
                                                              format_real(model->translation_err_range_px.second));
  }
  write_manifest(m, dir / "manifest.txt");
  out << "simulated " << sim.stack.size() << " slices into " << a.out << " (target slice "
      << sim.stack.target_index << ")\n";
  return kExitOk;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(a.stacks)) {
    if (e.is_directory() && fs::exists(e.path() / "metadata.txt")) dirs.push_back(e.path());
  }
  if (fs::exists(fs::path(a.stacks) / "metadata.txt")) dirs.push_back(a.stacks);
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no stacks found under " + a.stacks);
  std::vector<FocalStack> stacks;
  for (const auto& d : dirs) stacks.push_back(initial_fov_align(load_stack(d)));
  std::vector<std::string> warnings;
  const ErrorRanges r = estimate_ranges(stacks, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  write_text_file(a.out, format_error_ranges(r));
  RunManifest m{"calibrate", {{"stacks_found", std::to_string(dirs.size())}}, {a.stacks}, {a.out}, 0};
  write_manifest(m, a.out + ".manifest.txt");
  out << "calibrated from " << r.samples << " samples (" << r.skipped_stacks << " stacks skipped)\n";
  return kExitOk;
}

int cmd_align(const AlignArgs& a, std::ostream& out, std::ostream& err) {
  const FocalStack stack = load_stack(a.stack);
  SolveOptions opts;
  opts.loss = {a.q, a.eps};
  opts.levels = a.levels;
  validate(opts.loss);
  if (a.levels < 1) throw DataError("--levels must be at least 1");
  const AlignedStack aligned = align_stack(stack, opts);
  const fs::path dir(a.out);
  save_stack(aligned.stack, dir, parse_format(a.format));
  write_text_file(dir / "align_report.txt", format_align_report(aligned.result));
  std::ostringstream totals;
  totals << "# index total_alpha total_beta total_gamma status\n";
  for (std::size_t i = 0; i < aligned.result.total.size(); ++i) {
    totals << i << ' ' << describe(aligned.result.total[i]) << ' ' << to_string(aligned.result.status[i]) << '\n';
    if (!aligned.result.converged[i]) {
      err << "warning: slice " << i << " " << to_string(aligned.result.status[i]) << '\n';
    }
  }
  write_text_file(dir / "align_total.txt", totals.str());
  RunManifest m{"align",
                {{"q", format_real(a.q)}, {"eps", format_real(a.eps)}, {"levels", std::to_string(a.levels)},
                 {"format", a.format}},
                {a.stack},
                {a.out},
                0};
  write_manifest(m, dir / "manifest.txt");
  out << "aligned " << stack.size() << " slices to slice " << stack.target_index << '\n';
  return kExitOk;
}

int cmd_depth(const DepthArgs& a, std::ostream& out) {
  const FocalStack stack = load_stack(a.stack);
  const FocusMeasure measure = a.measure == "mlap" ? FocusMeasure::kModifiedLaplacian : FocusMeasure::kRingDifference;
  FocusVolume vol = focus_measure(stack, measure, a.radius);
  DepthMap d;
  if (a.wta) {
    d = winner_take_all(vol);
  } else {
    if (!a.raw_scores) vol = standardize(vol);
    d = regress_depth(vol, {a.temp, false});
  }
  Image depth = d.depth_mm;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!d.valid(x, y)) depth.at(x, y) = std::numeric_limits<float>::quiet_NaN();
    }
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_pfm(depth, dir / "depth.pfm");
  write_pfm(d.confidence, dir / "confidence.pfm");
  write_png(all_in_focus(stack, vol), dir / "all_in_focus.png");
  RunManifest m{"depth",
                {{"measure", a.measure},
                 {"radius", std::to_string(a.radius)},
                 {"temp", format_real(a.temp)},
                 {"wta", a.wta ? "true" : "false"},
                 {"scores", a.raw_scores ? "raw" : "standardized"}},
                {a.stack},
                {a.out},
                0};
  write_manifest(m, dir / "manifest.txt");
  out << "depth for " << d.valid.count() << " valid pixels written to " << a.out << '\n';
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const DepthMap pred = read_depth(a.pred);
  const DepthMap gt = read_depth(a.gt);
  const MetricReport r = evaluate(pred, gt, a.fmin, a.fmax);
  out << report_table({{a.name, r}});
  if (!a.csv.empty()) {
    write_text_file(a.csv, csv_header() + csv_row(a.name, r));
    RunManifest m{"eval", {{"fmin", format_real(a.fmin)}, {"fmax", format_real(a.fmax)}, {"name", a.name}},
                  {a.pred, a.gt}, {a.csv}, 0};
    write_manifest(m, a.csv + ".manifest.txt");
  }
  return kExitOk;
}

int cmd_scene(const SceneArgs& a, std::ostream& out) {
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const CameraConfig cam = preset_camera(a.size, a.size, a.slices);
  Scene s;
  if (a.pattern) {
    s = circle_pattern_scene(a.size, a.size, 500.0, 5, 5, a.size / 40.0, a.size / 8.0);
  } else {
    SceneParams p;
    p.width = p.height = a.size;
    p.seed = a.seed;
    s = textured_scene(p);
  }
  write_png(s.rgb, dir / "rgb.png");
  write_pfm(s.depth_mm, dir / "depth.pfm");
  save_camera_config(cam, dir / "camera.txt");
  RunManifest m{"scene",
                {{"size", std::to_string(a.size)}, {"slices", std::to_string(a.slices)},
                 {"kind", a.pattern ? "circles" : "textured"}},
                {},
                {a.out},
                a.seed};
  write_manifest(m, dir / "manifest.txt");
  out << "scene written to " << a.out << '\n';
  return kExitOk;
}

struct Check {
  std::string name;
  bool ok;
  std::string detail;
};

// Fast invariant probes over the bundled scene, independent of the test suite.
std::vector<Check> invariant_checks() {
  std::vector<Check> out;
  const CameraConfig cam = preset_camera(64, 64, 5);
  {
    const auto st = lens_states(cam);
    double spread = 0.0;
    for (const auto& s : st) spread = std::max(spread, std::abs(s.fov_mm * s.sensor_distance_mm - st[0].fov_mm * st[0].sensor_distance_mm));
    out.push_back({"optics fov*s constant", spread < 1e-9 * st[0].fov_mm * st[0].sensor_distance_mm,
                   "spread " + format_real(spread)});
  }
  {
    Image flat(64, 64, 3, 0.5f);
    Image depth(64, 64, 1, 420.0f);
    for (int x = 32; x < 64; ++x) {
      for (int y = 0; y < 64; ++y) depth.at(x, y) = 650.0f;
    }
    const FocalSlice s = render_slice(flat, depth, cam, 0);
    double dev = 0.0;
    for (float v : s.pixels.data()) dev = std::max(dev, std::abs(double(v) - 0.5));
    out.push_back({"simulator constant image", dev < 1e-6, "max deviation " + format_real(dev)});
  }
  {
    SceneParams p;
    p.width = p.height = 64;
    const Scene sc = textured_scene(p);
    const auto w = warp_basis(sc.rgb, {}, image_center(64, 64));
    const bool same = w.image.data() == sc.rgb.data() && w.valid.count() == 64u * 64u;
    out.push_back({"warp identity", same, same ? "exact" : "differs"});

    // Fronto-parallel plane: alignment is exact up to blur, so the probe stays tight.
    SceneParams plane;
    plane.width = plane.height = 128;
    plane.background_near_mm = plane.background_far_mm = 560.0;
    const Scene flat_scene = textured_scene(plane);
    const CameraConfig cam3 = preset_camera(128, 128, 3);
    ErrorModel em;
    em.seed = 3;
    const auto sim = render_stack(flat_scene.rgb, flat_scene.depth_mm, cam3, em);
    const auto al = align_stack(sim.stack);
    double epe = 0.0;
    for (std::size_t i = 0; i < sim.stack.size(); ++i) {
      epe += mean_endpoint_error(al.result.total[i], sim.total_truth[i], image_center(128, 128), 128, 128);
    }
    epe /= static_cast<double>(sim.stack.size());
    out.push_back({"alignment round trip (128px)", epe < 0.25, "mean endpoint error " + format_real(epe)});

    const DepthMap d = regress_depth(standardize(focus_measure(al.stack, FocusMeasure::kRingDifference, 2)), {10.0});
    bool inside = true;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        if (d.valid(x, y)) inside = inside && d.depth_mm.at(x, y) >= 300.0f && d.depth_mm.at(x, y) <= 700.0f;
      }
    }
    out.push_back({"depth within focus range", inside, std::to_string(d.valid.count()) + " valid pixels"});

    const DepthMap gt{sc.depth_mm, Image(64, 64, 1, 1.0f), Mask(64, 64, true)};
    const MetricReport r = evaluate(gt, gt, 300.0, 700.0);
    const bool zero = r.mae == 0.0 && r.rmse == 0.0 && r.delta1 == 1.0 && r.bumpiness == 0.0;
    out.push_back({"metrics identity", zero, "mae " + format_real(r.mae)});
  }
  {
    Image zero(8, 8, 1, 0.0f);
    const double l = robust_loss(zero, Mask(8, 8, true), {});
    out.push_back({"robust loss at zero", std::abs(l - std::pow(0.01, 0.4)) < 1e-12, format_real(l)});
  }
  return out;
}

int cmd_selftest(bool grad, std::ostream& out) {
  bool all = true;
  for (const auto& c : invariant_checks()) {
    out << (c.ok ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    all = all && c.ok;
  }
  if (grad) {
    for (const auto& g : nn::run_gradient_checks()) {
      out << (g.passed() ? "PASS " : "FAIL ") << "grad " << g.name << " (max error " << format_real(g.max_rel_error)
          << " < " << format_real(g.tolerance) << ", " << g.entries << " entries)\n";
      all = all && g.passed();
    }
  }
  return all ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-from-focus toolkit: simulate, calibrate, align and evaluate focal stacks", "dfflab"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Render a misaligned focal stack");
  simulate->add_option("--rgb", sim.rgb, "All-in-focus image (PNG or PFM)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--depth", sim.depth, "Depth map in mm (PFM)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--camera", sim.camera, "Camera configuration")->required()->check(CLI::ExistingFile);
  auto* errors = simulate->add_option("--errors", sim.errors, "Calibrated error ranges")->check(CLI::ExistingFile);
  simulate->add_flag("--no-misalign", sim.no_misalign, "Focal breathing only")->excludes(errors);
  simulate->add_option("--out", sim.out, "Output stack directory")->required();
  simulate->add_option("--seed", sim.seed, "Error sampling seed");
  simulate->add_option("--layers", sim.layers, "Depth layers")->check(CLI::PositiveNumber);
  simulate->add_option("--psf", sim.psf, "Blur kernel")->check(CLI::IsMember({"disc", "gaussian"}));
  simulate->add_option("--format", sim.format, "Slice file format")->check(CLI::IsMember({"pfm", "png"}));

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Estimate intrinsic error ranges from circle-pattern stacks");
  calibrate->add_option("--stacks", cal.stacks, "Directory of stack directories")->required()->check(CLI::ExistingDirectory);
  calibrate->add_option("--out", cal.out, "Output error range file")->required();

  AlignArgs al;
  auto* align = app.add_subcommand("align", "Align every slice to the narrowest-FoV slice");
  align->add_option("--stack", al.stack, "Input stack directory")->required()->check(CLI::ExistingDirectory);
  align->add_option("--out", al.out, "Output stack directory")->required();
  align->add_option("--q", al.q, "Robust loss exponent");
  align->add_option("--eps", al.eps, "Robust loss offset");
  align->add_option("--levels", al.levels, "Pyramid levels");
  align->add_option("--format", al.format, "Slice file format")->check(CLI::IsMember({"pfm", "png"}));

  DepthArgs dp;
  auto* depth = app.add_subcommand("depth", "Estimate depth from an aligned stack");
  depth->add_option("--stack", dp.stack, "Input stack directory")->required()->check(CLI::ExistingDirectory);
  depth->add_option("--out", dp.out, "Output directory")->required();
  depth->add_option("--measure", dp.measure, "Focus measure")->check(CLI::IsMember({"ring", "mlap"}));
  depth->add_option("--radius", dp.radius, "Focus measure radius")->check(CLI::PositiveNumber);
  depth->add_option("--temp", dp.temp, "Soft-plus temperature");
  depth->add_flag("--wta", dp.wta, "Winner-take-all instead of soft-plus regression");
  depth->add_flag("--raw-scores", dp.raw_scores, "Skip per-pixel score standardization");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Compare a predicted depth map with ground truth");
  eval->add_option("--pred", ev.pred, "Predicted depth (PFM)")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ev.gt, "Ground-truth depth (PFM)")->required()->check(CLI::ExistingFile);
  eval->add_option("--fmin", ev.fmin, "Nearest focus distance (mm)")->required();
  eval->add_option("--fmax", ev.fmax, "Farthest focus distance (mm)")->required();
  eval->add_option("--csv", ev.csv, "Also write a CSV report");
  eval->add_option("--name", ev.name, "Row label");

  SceneArgs sc;
  auto* scene = app.add_subcommand("scene", "Write the bundled procedural scene and camera");
  scene->add_option("--out", sc.out, "Output directory")->required();
  scene->add_option("--seed", sc.seed, "Texture seed");
  scene->add_option("--size", sc.size, "Image side in pixels")->check(CLI::Range(16, 4096));
  scene->add_option("--slices", sc.slices, "Focus schedule length")->check(CLI::PositiveNumber);
  scene->add_flag("--pattern", sc.pattern, "Circle calibration pattern instead of the textured scene");

  bool grad = false;
  auto* selftest = app.add_subcommand("selftest", "Run built-in invariant checks");
  selftest->add_flag("--grad", grad, "Also run the finite-difference gradient suite");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    set_thread_count(threads);
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (calibrate->parsed()) return cmd_calibrate(cal, out, err);
    if (align->parsed()) return cmd_align(al, out, err);
    if (depth->parsed()) return cmd_depth(dp, out);
    if (eval->parsed()) return cmd_eval(ev, out);
    if (scene->parsed()) return cmd_scene(sc, out);
    if (selftest->parsed()) return cmd_selftest(grad, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace dff
