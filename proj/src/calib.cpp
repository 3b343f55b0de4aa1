#include "dff/calib.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "dff/textio.hpp"

namespace dff {
namespace {

struct Component {
  double wsum = 0.0;
  double wx = 0.0;
  double wy = 0.0;
  int area = 0;
  bool truncated = false;  // touches the image border or an invalid pixel
};

}  // namespace

double otsu_threshold(const Image& gray, const Mask* valid) {
  std::array<double, 256> hist{};
  for (std::size_t i = 0; i < gray.data().size(); ++i) {
    if (valid && !valid->data()[i]) continue;
    const float v = gray.data()[i];
    const int b = std::clamp(static_cast<int>(v * 255.0f + 0.5f), 0, 255);
    hist[b] += 1.0;
  }
  double total = 0.0;
  for (double c : hist) total += c;
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  // Class 0 is bins [0, best_t]; threshold sits between the bins.
  return (best_t + 0.5) / 255.0;
}

CirclePattern detect_circles(const Image& image, const Mask* valid, int min_area_px) {
  const Image gray = to_gray(image);
  const int w = gray.width();
  const int h = gray.height();
  if (valid && (valid->width() != w || valid->height() != h)) throw DataError("mask size mismatch");
  const double t = otsu_threshold(gray, valid);
  auto usable = [&](int x, int y) { return !valid || (*valid)(x, y); };

  std::vector<int> label(gray.pixel_count(), -1);
  std::vector<Component> comps;
  std::vector<int> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t i0 = static_cast<std::size_t>(y0) * w + x0;
      if (label[i0] >= 0 || !usable(x0, y0) || gray.at(x0, y0) >= t) continue;
      const int id = static_cast<int>(comps.size());
      comps.emplace_back();
      label[i0] = id;
      stack.assign(1, static_cast<int>(i0));
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int x = i % w;
        const int y = i / w;
        const double weight = t - gray.at(x, y);
        Component& c = comps[id];
        c.wsum += weight;
        c.wx += weight * x;
        c.wy += weight * y;
        ++c.area;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || !usable(nx, ny)) {
              c.truncated = true;
              continue;
            }
            const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
            if (label[j] >= 0 || gray.at(nx, ny) >= t) continue;
            label[j] = id;
            stack.push_back(static_cast<int>(j));
          }
        }
      }
    }
  }

  std::vector<Point2> centers;
  std::vector<int> areas;
  for (const auto& c : comps) {
    if (c.area < min_area_px || c.wsum <= 0.0 || c.truncated) continue;
    centers.push_back({c.wx / c.wsum, c.wy / c.wsum});
    areas.push_back(c.area);
  }
  if (centers.size() < 3) throw DataError("fewer than 3 components");

  // Group into rows: consecutive y gaps below one typical radius stay in a row.
  std::nth_element(areas.begin(), areas.begin() + areas.size() / 2, areas.end());
  const double row_tol = std::sqrt(areas[areas.size() / 2] / M_PI);
  std::sort(centers.begin(), centers.end(), [](const Point2& a, const Point2& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  CirclePattern out;
  std::size_t row_start = 0;
  for (std::size_t i = 1; i <= centers.size(); ++i) {
    if (i == centers.size() || centers[i].y - centers[i - 1].y > row_tol) {
      std::sort(centers.begin() + row_start, centers.begin() + i,
                [](const Point2& a, const Point2& b) { return a.x < b.x; });
      row_start = i;
    }
  }
  out.centers_px = std::move(centers);
  return out;
}

BasisFit fit_basis(const std::vector<Point2>& src, const std::vector<Point2>& dst, Point2 center) {
  if (src.size() != dst.size()) throw DataError("point sets differ in size");
  if (src.size() < 3) throw DataError("basis fit needs at least three points");
  // Normal equations of the stacked 2n x 3 system.
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double px = src[i].x - center.x;
    const double py = src[i].y - center.y;
    const double dx = dst[i].x - src[i].x;
    const double dy = dst[i].y - src[i].y;
    const Eigen::Vector3d rx(px, 1.0, 0.0);
    const Eigen::Vector3d ry(py, 0.0, 1.0);
    ata += rx * rx.transpose() + ry * ry.transpose();
    atb += rx * dx + ry * dy;
  }
  // ata = [[S_rr, S_x, S_y], [S_x, n, 0], [S_y, 0, n]]; singular iff all
  // points coincide (the radial column then equals a translation).
  const double n = static_cast<double>(src.size());
  const double spread = ata(0, 0) - (ata(0, 1) * ata(0, 1) + ata(0, 2) * ata(0, 2)) / n;
  if (!(spread > 1e-12 * std::max(1.0, ata(0, 0)))) {
    throw DataError("basis fit is rank deficient");
  }
  const Eigen::Vector3d sol = ata.ldlt().solve(atb);
  BasisFit fit;
  fit.coefficients = {sol[0], sol[1], sol[2]};
  double sse = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Point2 pred = apply_flow(fit.coefficients, center, src[i]);
    sse += (pred.x - dst[i].x) * (pred.x - dst[i].x) + (pred.y - dst[i].y) * (pred.y - dst[i].y);
  }
  fit.residual_rms = std::sqrt(sse / (2.0 * n));
  return fit;
}

ParamStats summarize(const std::vector<double>& values) {
  if (values.empty()) throw DataError("no samples to summarize");
  ParamStats s;
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  // Sorted summation keeps the result independent of input order.
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = std::clamp(sum / static_cast<double>(sorted.size()), s.min, s.max);
  std::vector<double> sq;
  sq.reserve(sorted.size());
  for (double v : sorted) sq.push_back((v - s.mean) * (v - s.mean));
  std::sort(sq.begin(), sq.end());
  double ss = 0.0;
  for (double v : sq) ss += v;
  s.std = std::sqrt(ss / static_cast<double>(sorted.size()));
  return s;
}

ErrorRanges estimate_ranges(const std::vector<FocalStack>& aligned_stacks,
                            std::vector<std::string>* warnings) {
  std::vector<double> alphas, betas, gammas;
  std::size_t skipped = 0;
  for (std::size_t k = 0; k < aligned_stacks.size(); ++k) {
    const FocalStack& st = aligned_stacks[k];
    try {
      validate_stack(st);
      const auto& tgt = st.slices[st.target_index];
      const CirclePattern ref = detect_circles(tgt.pixels, &tgt.valid);
      std::vector<BasisCoefficients> fits;
      for (std::size_t i = 0; i < st.size(); ++i) {
        if (i == st.target_index) continue;
        const CirclePattern cur = detect_circles(st.slices[i].pixels, &st.slices[i].valid);
        if (cur.centers_px.size() != ref.centers_px.size()) {
          throw DataError("circle count differs from the target slice");
        }
        Point2 center = tgt.principal_point_px;
        if (!std::isfinite(center.x) || !std::isfinite(center.y)) {
          center = image_center(tgt.pixels.width(), tgt.pixels.height());
        }
        fits.push_back(fit_basis(ref.centers_px, cur.centers_px, center).coefficients);
      }
      for (const auto& c : fits) {
        alphas.push_back(c.alpha);
        betas.push_back(c.beta);
        gammas.push_back(c.gamma);
      }
    } catch (const DataError& e) {
      ++skipped;
      if (warnings) warnings->push_back("stack " + std::to_string(k) + " skipped: " + e.what());
    }
  }
  if (alphas.empty()) throw DataError("no usable calibration stacks");
  ErrorRanges r;
  r.alpha = summarize(alphas);
  r.beta = summarize(betas);
  r.gamma = summarize(gammas);
  r.samples = alphas.size();
  r.skipped_stacks = skipped;
  return r;
}

ErrorModel to_error_model(const ErrorRanges& ranges, std::uint64_t seed) {
  ErrorModel m;
  m.scale_err_range = {ranges.alpha.min, ranges.alpha.max};
  m.translation_err_range_px = {std::min(ranges.beta.min, ranges.gamma.min),
                                std::max(ranges.beta.max, ranges.gamma.max)};
  m.seed = seed;
  return m;
}

std::string format_error_ranges(const ErrorRanges& r) {
  std::ostringstream os;
  auto put = [&](const char* name, const ParamStats& s) {
    os << name << "_min = " << format_real(s.min) << '\n'
       << name << "_max = " << format_real(s.max) << '\n'
       << name << "_mean = " << format_real(s.mean) << '\n'
       << name << "_std = " << format_real(s.std) << '\n';
  };
  put("alpha", r.alpha);
  put("beta", r.beta);
  put("gamma", r.gamma);
  os << "samples = " << r.samples << '\n' << "skipped_stacks = " << r.skipped_stacks << '\n';
  return os.str();
}

ErrorRanges parse_error_ranges(const std::string& text) {
  const auto kv = parse_key_values(text);
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("error ranges missing key: " + key);
    return parse_real(it->second);
  };
  auto stats = [&](const std::string& name) {
    ParamStats s;
    s.min = get(name + "_min");
    s.max = get(name + "_max");
    s.mean = kv.count(name + "_mean") ? get(name + "_mean") : 0.5 * (s.min + s.max);
    s.std = kv.count(name + "_std") ? get(name + "_std") : 0.0;
    if (s.min > s.max) throw DataError(name + "_min exceeds " + name + "_max");
    return s;
  };
  ErrorRanges r;
  r.alpha = stats("alpha");
  r.beta = stats("beta");
  r.gamma = stats("gamma");
  if (kv.count("samples")) r.samples = static_cast<std::size_t>(get("samples"));
  if (kv.count("skipped_stacks")) r.skipped_stacks = static_cast<std::size_t>(get("skipped_stacks"));
  return r;
}

}  // namespace dff
