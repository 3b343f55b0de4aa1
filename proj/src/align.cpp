#include "dff/align.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dff/parallel.hpp"
#include "dff/textio.hpp"

namespace dff {
namespace {

constexpr std::size_t kMinOverlap = 16;
constexpr double kResidualFloor = 1e-6;
constexpr double kInitialDamping = 1e-3;
constexpr double kMaxDamping = 1e10;
constexpr double kMaxExtension = 64.0;

Image blur5(const Image& img) {
  static const double k[5] = {0.05448868454964294, 0.24420134200323332, 0.40261994689424746,
                              0.24420134200323332, 0.05448868454964294};
  const int w = img.width();
  const int h = img.height();
  Image tmp(w, h, 1);
  Image out(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -2; d <= 2; ++d) s += k[d + 2] * img.clamped(x + d, y);
      tmp.at(x, y) = static_cast<float>(s);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -2; d <= 2; ++d) s += k[d + 2] * tmp.clamped(x, y + d);
      out.at(x, y) = static_cast<float>(s);
    }
  }
  return out;
}

struct Level {
  Image ref;
  Image ref_gx;
  Image ref_gy;
  Mask ref_quad;  // see quad_valid
  Image tgt;
  Mask tgt_valid;
  Point2 center;
  double norm = 1.0;  // alpha is optimized as alpha * norm (pixel units)
};

struct Evaluation {
  double loss = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
};

Evaluation evaluate(const Level& lv, const BasisCoefficients& c, const RobustLossParams& p,
                    bool normal_equations) {
  Evaluation ev;
  double loss_sum = 0.0;
  const int w = lv.tgt.width();
  const int h = lv.tgt.height();
  const int rw = lv.ref.width();
  const int rh = lv.ref.height();
  const float* ref = lv.ref.data().data();
  const float* rgx = lv.ref_gx.data().data();
  const float* rgy = lv.ref_gy.data().data();
  const float* tgt = lv.tgt.data().data();
  double h00 = 0, h01 = 0, h02 = 0, h11 = 0, h12 = 0, h22 = 0, g0 = 0, g1 = 0, g2 = 0;
  for (int y = 0; y < h; ++y) {
    const double dy = y - lv.center.y;
    for (int x = 0; x < w; ++x) {
      if (!lv.tgt_valid(x, y)) continue;
      const double dx = x - lv.center.x;
      const double qx = x + c.alpha * dx + c.beta;
      const double qy = y + c.alpha * dy + c.gamma;
      if (!(qx >= 0.0 && qy >= 0.0 && qx <= rw - 1 && qy <= rh - 1)) continue;
      const int x0 = std::min(static_cast<int>(qx), rw - 2);
      const int y0 = std::min(static_cast<int>(qy), rh - 2);
      if (!lv.ref_quad(x0, y0)) continue;
      const double fx = qx - x0;
      const double fy = qy - y0;
      const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
      const std::size_t i00 = static_cast<std::size_t>(y0) * rw + x0;
      const std::size_t i01 = i00 + rw;
      auto lerp = [&](const float* a) { return w00 * a[i00] + w10 * a[i00 + 1] + w01 * a[i01] + w11 * a[i01 + 1]; };
      const double r = lerp(ref) - tgt[static_cast<std::size_t>(y) * w + x];
      const double ar = std::abs(r);
      const double t = std::pow(ar + p.epsilon, p.q - 1.0);
      loss_sum += t * (ar + p.epsilon);
      ++ev.count;
      if (!normal_equations) continue;
      const double gx = lerp(rgx);
      const double gy = lerp(rgy);
      const double weight = p.q * t / std::max(ar, kResidualFloor);
      const double j0 = (gx * dx + gy * dy) / lv.norm;
      const double wj0 = weight * j0, wj1 = weight * gx, wj2 = weight * gy;
      h00 += wj0 * j0;
      h01 += wj0 * gx;
      h02 += wj0 * gy;
      h11 += wj1 * gx;
      h12 += wj1 * gy;
      h22 += wj2 * gy;
      g0 += wj0 * r;
      g1 += wj1 * r;
      g2 += wj2 * r;
    }
  }
  ev.hessian << h00, h01, h02, h01, h11, h12, h02, h12, h22;
  ev.gradient << g0, g1, g2;
  if (ev.count > 0) ev.loss = loss_sum / static_cast<double>(ev.count);
  return ev;
}

// valid(x,y) && valid(x+1,y) && valid(x,y+1) && valid(x+1,y+1), so a
// bilinear sample anchored at (x,y) only touches valid pixels.
Mask quad_valid(const Mask& m) {
  Mask out(m.width(), m.height(), false);
  for (int y = 0; y + 1 < m.height(); ++y) {
    for (int x = 0; x + 1 < m.width(); ++x) {
      out.set(x, y, m(x, y) && m(x + 1, y) && m(x, y + 1) && m(x + 1, y + 1));
    }
  }
  return out;
}

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

Image gradient_x(const Image& img) {
  Image g(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) g.at(x, y) = 0.5f * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
  }
  return g;
}

Image gradient_y(const Image& img) {
  Image g(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) g.at(x, y) = 0.5f * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
  }
  return g;
}

Point2 slice_center(const FocalSlice& s) {
  const Point2 pp = s.principal_point_px;
  if (std::isfinite(pp.x) && std::isfinite(pp.y)) return pp;
  return image_center(s.pixels.width(), s.pixels.height());
}

}  // namespace

void validate(const RobustLossParams& params) {
  if (!(params.q > 0.0 && params.q <= 1.0)) throw DataError("robust loss q must lie in (0, 1]");
  if (!(params.epsilon > 0.0) || !std::isfinite(params.epsilon)) {
    throw DataError("robust loss epsilon must be positive");
  }
}

double robust_loss(const Image& residuals, const Mask& valid, const RobustLossParams& params) {
  validate(params);
  if (residuals.channels() != 1) throw DataError("residual image must have one channel");
  if (valid.width() != residuals.width() || valid.height() != residuals.height()) {
    throw DataError("residual mask size mismatch");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < residuals.height(); ++y) {
    for (int x = 0; x < residuals.width(); ++x) {
      if (!valid(x, y)) continue;
      sum += robust_rho(residuals.at(x, y), params);
      ++n;
    }
  }
  if (n == 0) throw DataError("robust loss over an empty mask");
  return sum / static_cast<double>(n);
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIterations: return "max_iterations";
    case SolveStatus::kDegenerate: return "degenerate";
    case SolveStatus::kDiverged: return "diverged";
  }
  return "unknown";
}

std::vector<Image> gaussian_pyramid(const Image& gray, int levels) {
  if (gray.channels() != 1) throw DataError("pyramid expects a single-channel image");
  if (levels < 1) throw DataError("pyramid needs at least one level");
  std::vector<Image> pyr{gray};
  for (int l = 1; l < levels; ++l) {
    const Image& prev = pyr.back();
    if (prev.width() < 8 || prev.height() < 8) throw DataError("image too small for pyramid depth");
    const Image smooth = blur5(prev);
    Image next((prev.width() + 1) / 2, (prev.height() + 1) / 2, 1);
    for (int y = 0; y < next.height(); ++y) {
      for (int x = 0; x < next.width(); ++x) next.at(x, y) = smooth.at(2 * x, 2 * y);
    }
    pyr.push_back(std::move(next));
  }
  return pyr;
}

std::vector<Mask> mask_pyramid(const Mask& mask, int levels) {
  std::vector<Mask> pyr{mask};
  for (int l = 1; l < levels; ++l) {
    const Mask eroded = erode(pyr.back(), 2);
    Mask next((eroded.width() + 1) / 2, (eroded.height() + 1) / 2, false);
    for (int y = 0; y < next.height(); ++y) {
      for (int x = 0; x < next.width(); ++x) next.set(x, y, eroded(2 * x, 2 * y));
    }
    pyr.push_back(std::move(next));
  }
  return pyr;
}

SliceSolution solve_slice(const FocalSlice& reference, const FocalSlice& target,
                          const SolveOptions& options, const BasisCoefficients& initial) {
  validate(options.loss);
  if (!reference.pixels.same_shape(target.pixels)) throw DataError("slices differ in shape");
  if (!is_finite(initial)) throw NumericalError("non-finite initial coefficients");

  const int levels = options.levels;
  const auto ref_pyr = gaussian_pyramid(to_gray(reference.pixels), levels);
  const auto tgt_pyr = gaussian_pyramid(to_gray(target.pixels), levels);
  const auto ref_masks = mask_pyramid(reference.valid, levels);
  const auto tgt_masks = mask_pyramid(target.valid, levels);
  const Point2 center0 = slice_center(reference);

  SliceSolution sol;
  BasisCoefficients c = initial;
  const double top = std::ldexp(1.0, levels - 1);
  c.beta /= top;
  c.gamma /= top;

  for (int l = levels - 1; l >= 0; --l) {
    const double scale = std::ldexp(1.0, -l);
    Level lv{ref_pyr[l], gradient_x(ref_pyr[l]), gradient_y(ref_pyr[l]), quad_valid(ref_masks[l]),
             tgt_pyr[l], tgt_masks[l], {center0.x * scale, center0.y * scale},
             0.5 * std::max(ref_pyr[l].width(), ref_pyr[l].height())};

    Evaluation cur = evaluate(lv, c, options.loss, true);
    if (cur.count < kMinOverlap) throw DataError("valid regions of the slices do not overlap");
    sol.trace.push_back({l, 0, cur.loss});

    double damping = kInitialDamping;
    bool level_converged = false;
    for (int it = 1; it <= options.max_iterations && !level_converged; ++it) {
      // Degeneracy: drop alpha when the full system is ill-conditioned.
      const bool freeze_alpha = condition_number(cur.hessian) > options.max_condition;
      if (freeze_alpha) {
        sol.alpha_frozen = true;
        if (condition_number(cur.hessian.bottomRightCorner<2, 2>()) > options.max_condition) {
          sol.status = SolveStatus::kDegenerate;
          sol.coefficients = initial;
          sol.final_loss = cur.loss;
          return sol;
        }
      }

      bool accepted = false;
      while (!accepted) {
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        if (freeze_alpha) {
          Eigen::Matrix2d hh = cur.hessian.bottomRightCorner<2, 2>();
          hh.diagonal() *= 1.0 + damping;
          step.tail<2>() = -hh.ldlt().solve(cur.gradient.tail<2>());
        } else {
          Eigen::Matrix3d hh = cur.hessian;
          hh.diagonal() *= 1.0 + damping;
          step = -hh.ldlt().solve(cur.gradient);
        }
        const double step_norm = step.norm();
        if (!std::isfinite(step_norm) || step_norm < options.step_tolerance) {
          level_converged = true;
          break;
        }
        auto along = [&](double t) {
          return BasisCoefficients{c.alpha + t * step[0] / lv.norm, c.beta + t * step[1], c.gamma + t * step[2]};
        };
        Evaluation probe = evaluate(lv, along(1.0), options.loss, false);
        if (probe.count >= kMinOverlap && probe.loss < cur.loss) {
          // The IRLS majorizer under-steps near the kink of rho; extend the
          // step while the true loss keeps falling.
          double t = 1.0;
          while (t < kMaxExtension) {
            const Evaluation longer = evaluate(lv, along(2.0 * t), options.loss, false);
            if (longer.count < kMinOverlap || !(longer.loss < probe.loss)) break;
            probe = longer;
            t *= 2.0;
          }
          c = along(t);
          cur = evaluate(lv, c, options.loss, true);
          sol.trace.push_back({l, it, cur.loss});
          damping = std::max(damping * 0.1, 1e-9);
          accepted = true;
          if (std::abs(c.alpha) >= kAlphaBound) {
            sol.status = SolveStatus::kDiverged;
            sol.coefficients = {c.alpha, c.beta / scale, c.gamma / scale};
            sol.final_loss = cur.loss;
            return sol;
          }
        } else {
          damping *= 10.0;
          if (damping > kMaxDamping) {
            level_converged = true;
            break;
          }
        }
      }
    }
    sol.final_loss = cur.loss;
    sol.status = level_converged ? SolveStatus::kConverged : SolveStatus::kMaxIterations;
    if (l > 0) {
      c.beta *= 2.0;
      c.gamma *= 2.0;
    }
  }
  sol.coefficients = c;
  return sol;
}

FocalStack initial_fov_align(const FocalStack& stack) {
  validate_stack(stack);
  FocalStack out = stack;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& s = out.slices[i];
    if (!std::isfinite(s.relative_fov) || s.relative_fov <= 0.0) {
      throw DataError("slice " + std::to_string(i) + " lacks relative FoV metadata");
    }
    if (i == out.target_index || s.relative_fov == 1.0) continue;
    auto warped = warp_basis(s.pixels, scale_only(s.relative_fov), slice_center(s), &s.valid);
    s.pixels = std::move(warped.image);
    s.valid = std::move(warped.valid);
    s.relative_fov = 1.0;
  }
  return out;
}

AlignedStack align_stack(const FocalStack& stack, const SolveOptions& options) {
  validate_stack(stack);
  if (stack.size() < 2) throw DataError("alignment needs at least two slices");
  const std::size_t n = stack.size();
  AlignedStack out{stack, AlignResult{}};
  auto& res = out.result;
  res.coefficients.assign(n, {});
  res.total.assign(n, {});
  res.final_loss.assign(n, 0.0);
  res.converged.assign(n, true);
  res.status.assign(n, SolveStatus::kConverged);
  res.traces.assign(n, {});
  std::vector<std::uint8_t> converged(n, 1);

  const FocalSlice& target = stack.slices[stack.target_index];
  parallel_for(n, [&](std::size_t i) {
    const FocalSlice& raw = stack.slices[i];
    if (!std::isfinite(raw.relative_fov) || raw.relative_fov <= 0.0) {
      throw DataError("slice " + std::to_string(i) + " lacks relative FoV metadata");
    }
    if (i == stack.target_index) {
      res.final_loss[i] = robust_rho(0.0, options.loss);
      return;
    }
    const BasisCoefficients fov = scale_only(raw.relative_fov);
    SliceSolution sol = solve_slice(raw, target, options, fov);
    res.total[i] = sol.coefficients;
    res.coefficients[i] = compose(inverse(fov), sol.coefficients);
    res.final_loss[i] = sol.final_loss;
    res.status[i] = sol.status;
    converged[i] = sol.converged() ? 1 : 0;
    res.traces[i] = std::move(sol.trace);

    FocalSlice& dst = out.stack.slices[i];
    auto warped = warp_basis(raw.pixels, sol.coefficients, slice_center(raw), &raw.valid);
    dst.pixels = std::move(warped.image);
    dst.valid = std::move(warped.valid);
    dst.relative_fov = 1.0;
  });
  for (std::size_t i = 0; i < n; ++i) res.converged[i] = converged[i] != 0;
  return out;
}

std::string format_align_report(const AlignResult& result) {
  std::ostringstream os;
  os << "# index alpha beta gamma final_loss converged\n";
  for (std::size_t i = 0; i < result.coefficients.size(); ++i) {
    const auto& c = result.coefficients[i];
    os << i << ' ' << format_real(c.alpha) << ' ' << format_real(c.beta) << ' ' << format_real(c.gamma)
       << ' ' << format_real(result.final_loss[i]) << ' ' << (result.converged[i] ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace dff
