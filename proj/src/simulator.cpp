#include "dff/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "dff/imageio.hpp"
#include "dff/parallel.hpp"
#include "dff/textio.hpp"

namespace dff {
namespace {

constexpr int kCoverageSubsamples = 8;

struct KernelTap {
  int dx;
  int dy;
  double w;
};

std::vector<KernelTap> taps_of(const BlurKernel& k) {
  std::vector<KernelTap> taps;
  for (int dy = -k.radius; dy <= k.radius; ++dy) {
    for (int dx = -k.radius; dx <= k.radius; ++dx) {
      const double w = k.at(dx, dy);
      if (w > 0.0) taps.push_back({dx, dy, w});
    }
  }
  return taps;
}

void check_inputs(const Image& rgb, const Image& depth_mm, const CameraConfig& config) {
  if (depth_mm.channels() != 1) throw DataError("depth map must have one channel");
  if (rgb.width() != depth_mm.width() || rgb.height() != depth_mm.height()) {
    throw DataError("rgb and depth sizes differ");
  }
  for (float v : rgb.data()) {
    if (!std::isfinite(v)) throw DataError("non-finite pixel in all-in-focus image");
  }
  for (float d : depth_mm.data()) {
    if (!std::isfinite(d)) throw DataError("non-finite depth");
    if (!(d > config.focal_length_mm())) throw DataError("depth at or inside the focal length");
  }
}

}  // namespace

void validate_stack(const FocalStack& stack) {
  if (stack.slices.empty()) throw DataError("empty focal stack");
  if (stack.target_index >= stack.slices.size()) throw DataError("target index out of range");
  const auto& first = stack.slices.front().pixels;
  for (const auto& s : stack.slices) {
    if (!s.pixels.same_shape(first)) throw DataError("focal slices differ in shape");
    if (s.valid.width() != first.width() || s.valid.height() != first.height()) {
      throw DataError("slice mask does not match slice size");
    }
  }
}

BlurKernel make_blur_kernel(double diameter_px, PsfShape shape) {
  if (!std::isfinite(diameter_px) || diameter_px < 0.0) throw DataError("invalid blur diameter");
  BlurKernel k;
  if (diameter_px < 1.0) {
    k.weights = {1.0};
    return k;
  }
  if (shape == PsfShape::kGaussian) {
    const double sigma = diameter_px / 4.0;
    k.radius = static_cast<int>(std::ceil(3.0 * sigma));
    const int n = 2 * k.radius + 1;
    k.weights.resize(static_cast<std::size_t>(n) * n);
    for (int dy = -k.radius; dy <= k.radius; ++dy) {
      for (int dx = -k.radius; dx <= k.radius; ++dx) {
        k.weights[static_cast<std::size_t>(dy + k.radius) * n + dx + k.radius] =
            std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      }
    }
  } else {
    // Pixel-area coverage of a disc, estimated on a regular subsample grid.
    const double r = diameter_px / 2.0;
    k.radius = static_cast<int>(std::ceil(r + 0.5));
    const int n = 2 * k.radius + 1;
    k.weights.assign(static_cast<std::size_t>(n) * n, 0.0);
    const double r2 = r * r;
    for (int dy = -k.radius; dy <= k.radius; ++dy) {
      for (int dx = -k.radius; dx <= k.radius; ++dx) {
        int inside = 0;
        for (int sy = 0; sy < kCoverageSubsamples; ++sy) {
          const double py = dy - 0.5 + (sy + 0.5) / kCoverageSubsamples;
          for (int sx = 0; sx < kCoverageSubsamples; ++sx) {
            const double px = dx - 0.5 + (sx + 0.5) / kCoverageSubsamples;
            if (px * px + py * py <= r2) ++inside;
          }
        }
        k.weights[static_cast<std::size_t>(dy + k.radius) * n + dx + k.radius] = inside;
      }
    }
  }
  double total = 0.0;
  for (double w : k.weights) total += w;
  for (double& w : k.weights) w /= total;
  return k;
}

Image blur(const Image& img, const BlurKernel& kernel) {
  const auto taps = taps_of(kernel);
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  Image out(w, h, ch);
  std::vector<double> acc(static_cast<std::size_t>(ch));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const auto& t : taps) {
        const int sx = x - t.dx;
        const int sy = y - t.dy;
        if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
        for (int c = 0; c < ch; ++c) acc[c] += t.w * img.at(sx, sy, c);
      }
      for (int c = 0; c < ch; ++c) out.at(x, y, c) = static_cast<float>(acc[c]);
    }
  }
  return out;
}

FocalSlice render_slice(const Image& rgb, const Image& depth_mm, const CameraConfig& config,
                        std::size_t slice_index, const RenderOptions& options) {
  if (slice_index >= config.slice_count()) throw DataError("slice index out of range");
  if (options.layers < 1) throw DataError("layer count must be positive");
  check_inputs(rgb, depth_mm, config);

  const int w = rgb.width();
  const int h = rgb.height();
  const int ch = rgb.channels();
  const std::size_t npix = rgb.pixel_count();

  double inv_min = std::numeric_limits<double>::infinity();
  double inv_max = 0.0;
  for (float d : depth_mm.data()) {
    inv_min = std::min(inv_min, 1.0 / d);
    inv_max = std::max(inv_max, 1.0 / d);
  }
  const int layers = options.layers;
  const double span = inv_max - inv_min;
  // Layer 0 is the farthest (smallest inverse depth).
  std::vector<int> layer_of(npix);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(layers));
  std::vector<double> inv_sum(static_cast<std::size_t>(layers), 0.0);
  for (std::size_t i = 0; i < npix; ++i) {
    const double inv = 1.0 / depth_mm.data()[i];
    int l = 0;
    if (span > 0.0) l = std::min(layers - 1, static_cast<int>((inv - inv_min) / span * layers));
    layer_of[i] = l;
    members[l].push_back(i);
    inv_sum[l] += inv;
  }

  std::vector<double> acc(npix * ch, 0.0);
  std::vector<double> coverage(npix, 0.0);
  std::vector<double> layer_color(npix * ch);
  std::vector<double> layer_alpha(npix);
  const double focus = config.focus_schedule_mm()[slice_index];

  for (int l = 0; l < layers; ++l) {
    if (members[l].empty()) continue;
    const double mean_depth = static_cast<double>(members[l].size()) / inv_sum[l];
    const double diameter = coc_diameter_px_at(config, focus, mean_depth);
    const auto taps = taps_of(make_blur_kernel(diameter, options.psf));

    std::fill(layer_color.begin(), layer_color.end(), 0.0);
    std::fill(layer_alpha.begin(), layer_alpha.end(), 0.0);
    for (std::size_t i : members[l]) {
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      for (const auto& t : taps) {
        const int qx = x + t.dx;
        const int qy = y + t.dy;
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
        layer_alpha[q] += t.w;
        for (int c = 0; c < ch; ++c) layer_color[q * ch + c] += t.w * rgb.data()[i * ch + c];
      }
    }
    for (std::size_t q = 0; q < npix; ++q) {
      const double a = std::min(1.0, layer_alpha[q]);
      if (a <= 0.0) continue;
      const double keep = 1.0 - a;
      coverage[q] = coverage[q] * keep + a;
      for (int c = 0; c < ch; ++c) acc[q * ch + c] = acc[q * ch + c] * keep + layer_color[q * ch + c];
    }
  }

  FocalSlice slice;
  slice.pixels = Image(w, h, ch);
  slice.valid = Mask(w, h, true);
  for (std::size_t q = 0; q < npix; ++q) {
    for (int c = 0; c < ch; ++c) {
      const double v = coverage[q] > 0.0 ? acc[q * ch + c] / coverage[q] : 0.0;
      slice.pixels.data()[q * ch + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  slice.focus_distance_mm = focus;
  slice.principal_point_px = image_center(w, h);
  slice.slice_index = static_cast<int>(slice_index);
  slice.relative_fov = lens_states(config)[slice_index].relative_fov;
  return slice;
}

BasisCoefficients sample_error(const ErrorModel& model, std::size_t slice_index) {
  auto check = [](const std::pair<double, double>& r) {
    if (!std::isfinite(r.first) || !std::isfinite(r.second) || r.first > r.second) {
      throw DataError("invalid error range");
    }
  };
  check(model.scale_err_range);
  check(model.translation_err_range_px);
  std::seed_seq seq{static_cast<std::uint32_t>(model.seed), static_cast<std::uint32_t>(model.seed >> 32),
                    static_cast<std::uint32_t>(slice_index)};
  std::mt19937_64 rng(seq);
  auto draw = [&](const std::pair<double, double>& r) {
    const double u = std::generate_canonical<double, 53>(rng);
    return r.first + (r.second - r.first) * u;
  };
  BasisCoefficients e;
  e.alpha = draw(model.scale_err_range);
  e.beta = draw(model.translation_err_range_px);
  e.gamma = draw(model.translation_err_range_px);
  return e;
}

SimulatedStack render_stack(const Image& rgb, const Image& depth_mm, const CameraConfig& config,
                            const std::optional<ErrorModel>& error_model,
                            const RenderOptions& options) {
  check_inputs(rgb, depth_mm, config);
  const std::size_t n = config.slice_count();
  const auto states = lens_states(config);
  SimulatedStack sim{FocalStack{std::vector<FocalSlice>(n), config, target_index(config)},
                     std::vector<BasisCoefficients>(n), std::vector<BasisCoefficients>(n)};
  const Point2 center = image_center(rgb.width(), rgb.height());

  parallel_for(n, [&](std::size_t i) {
    FocalSlice rendered = render_slice(rgb, depth_mm, config, i, options);
    BasisCoefficients residual{};
    if (error_model && i != sim.stack.target_index) residual = sample_error(*error_model, i);
    const BasisCoefficients total = compose(scale_only(states[i].relative_fov), residual);
    sim.residual_truth[i] = residual;
    sim.total_truth[i] = total;
    if (total != BasisCoefficients{}) {
      auto warped = warp_basis(rendered.pixels, inverse(total), center);
      rendered.pixels = std::move(warped.image);
      rendered.valid = std::move(warped.valid);
    }
    sim.stack.slices[i] = std::move(rendered);
  });
  return sim;
}

void save_stack(const FocalStack& stack, const std::filesystem::path& dir, SliceFormat format) {
  validate_stack(stack);
  std::filesystem::create_directories(dir);
  std::ostringstream meta;
  meta << "# index, focus_distance_mm, principal_point_x_px, principal_point_y_px[, relative_fov]\n";
  const auto states = lens_states(stack.config);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& s = stack.slices[i];
    char name[32];
    std::snprintf(name, sizeof name, format == SliceFormat::kPng ? "slice_%03zu.png" : "slice_%03zu.pfm", i);
    write_image(s.pixels, dir / name);
    if (s.valid.count() != s.valid.data().size()) {
      Image m(s.valid.width(), s.valid.height(), 1);
      for (std::size_t k = 0; k < m.data().size(); ++k) m.data()[k] = s.valid.data()[k] ? 1.0f : 0.0f;
      std::snprintf(name, sizeof name, "mask_%03zu.png", i);
      write_png(m, dir / name);
    }
    meta << i << ", " << format_real(s.focus_distance_mm) << ", " << format_real(s.principal_point_px.x)
         << ", " << format_real(s.principal_point_px.y);
    // Only FoV-aligned stacks deviate from the value implied by the focus distance.
    const double implied = sensor_distance(stack.config, stack.target_index) /
                           image_distance(stack.config.focal_length_mm(), s.focus_distance_mm);
    if (s.relative_fov != implied) meta << ", " << format_real(s.relative_fov);
    meta << '\n';
  }
  write_text_file(dir / "metadata.txt", meta.str());
  save_camera_config(stack.config, dir / "camera.txt");
}

FocalStack load_stack(const std::filesystem::path& dir) {
  const CameraConfig config = load_camera_config(dir / "camera.txt");
  std::istringstream meta(read_text_file(dir / "metadata.txt"));
  std::vector<FocalSlice> slices;
  std::string line;
  while (std::getline(meta, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields.size() != 4 && fields.size() != 5) throw DataError("metadata line needs 4 or 5 fields: " + line);
    FocalSlice s;
    s.slice_index = parse_int(fields[0]);
    if (s.slice_index != static_cast<int>(slices.size())) throw DataError("metadata indices must be 0..N-1 in order");
    s.focus_distance_mm = parse_real(fields[1]);
    s.principal_point_px = {parse_real(fields[2]), parse_real(fields[3])};
    s.relative_fov = fields.size() == 5 ? parse_real(fields[4]) : 0.0;
    slices.push_back(std::move(s));
  }
  if (slices.empty()) throw DataError("metadata lists no slices");

  FocalStack stack{std::move(slices), config, 0};
  double s_max = 0.0;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const double s = image_distance(config.focal_length_mm(), stack.slices[i].focus_distance_mm);
    if (s > s_max) {
      s_max = s;
      stack.target_index = i;
    }
  }
  for (std::size_t i = 0; i < stack.size(); ++i) {
    auto& s = stack.slices[i];
    char name[32];
    std::snprintf(name, sizeof name, "slice_%03zu.pfm", i);
    std::filesystem::path p = dir / name;
    if (!std::filesystem::exists(p)) {
      std::snprintf(name, sizeof name, "slice_%03zu.png", i);
      p = dir / name;
    }
    s.pixels = read_image(p);
    std::snprintf(name, sizeof name, "mask_%03zu.png", i);
    if (std::filesystem::exists(dir / name)) {
      const Image m = read_png(dir / name);
      s.valid = Mask(m.width(), m.height(), false);
      for (std::size_t k = 0; k < m.data().size(); ++k) s.valid.data()[k] = m.data()[k] > 0.5f ? 1 : 0;
    } else {
      s.valid = Mask(s.pixels.width(), s.pixels.height(), true);
    }
    if (s.relative_fov == 0.0) {
      s.relative_fov = s_max / image_distance(config.focal_length_mm(), s.focus_distance_mm);
    }
  }
  validate_stack(stack);
  return stack;
}

}  // namespace dff
