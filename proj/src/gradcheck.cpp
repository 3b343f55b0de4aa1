#include "dff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dff/nnops.hpp"

namespace dff::nn {
namespace {

constexpr double kStep = 1e-4;
constexpr double kTolerance = 1e-4;

using T4 = Tensor4<double>;

T4 random_tensor(int h, int w, int n, int c, std::uint64_t seed) {
  T4 t(h, w, n, c);
  randomize(t.data(), seed);
  return t;
}

double dot(const T4& a, const T4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

// Each check contracts the op output with a fixed random tensor r, so the
// scalar loss is <r, f(x)> and its gradient is backward(r).
GradCheckResult check(const std::string& name, std::vector<std::pair<std::vector<double>*, std::vector<double>>> params,
                      const std::function<double()>& loss, double tolerance = kTolerance) {
  GradCheckResult res{name, 0.0, tolerance, 0};
  for (auto& [p, g] : params) {
    res.max_rel_error = std::max(res.max_rel_error, max_relative_error(*p, g, loss, kStep));
    res.entries += p->size();
  }
  return res;
}

GradCheckResult conv2d_check(std::uint64_t seed, int stride) {
  T4 x = random_tensor(5, 6, 3, 2, seed);
  auto w = make_conv2d<double>(3, 2, 3);
  randomize(w.w, seed + 1);
  randomize(w.b, seed + 2);
  const T4 probe = conv2d(x, w, stride);
  T4 r = random_tensor(probe.h(), probe.w(), probe.n(), probe.c(), seed + 3);
  auto g = conv2d_backward(x, w, r, stride);
  auto loss = [&] { return dot(r, conv2d(x, w, stride)); };
  return check("conv2d stride " + std::to_string(stride),
               {{&x.data(), g.input.data()}, {&w.w, g.weights.w}, {&w.b, g.weights.b}}, loss);
}

GradCheckResult conv3d_check(std::uint64_t seed) {
  T4 x = random_tensor(5, 6, 3, 2, seed);
  auto w = make_conv3d<double>(3, 3, 2, 2);
  randomize(w.w, seed + 1);
  randomize(w.b, seed + 2);
  T4 r = random_tensor(5, 6, 3, 2, seed + 3);
  auto g = conv3d_backward(x, w, r);
  auto loss = [&] { return dot(r, conv3d(x, w)); };
  return check("conv3d", {{&x.data(), g.input.data()}, {&w.w, g.weights.w}, {&w.b, g.weights.b}}, loss);
}

GradCheckResult maxpool_check(std::uint64_t seed) {
  // Distinct values spaced well beyond the step keep every argmax unique.
  T4 x(4, 6, 3, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = 0.01 * static_cast<double>((i * 37) % x.size());
  (void)seed;
  auto pooled = maxpool2d(x, 2);
  T4 r = random_tensor(pooled.out.h(), pooled.out.w(), pooled.out.n(), pooled.out.c(), seed + 3);
  T4 gx = maxpool2d_backward(x, pooled, r);
  auto loss = [&] { return dot(r, maxpool2d(x, 2).out); };
  return check("maxpool2d", {{&x.data(), gx.data()}}, loss, 1e-6);
}

GradCheckResult relu_check(std::uint64_t seed) {
  T4 x = random_tensor(3, 3, 2, 2, seed);
  for (double& v : x.data()) {
    if (std::abs(v) < 1e-2) v += 0.05;
  }
  T4 r = random_tensor(3, 3, 2, 2, seed + 1);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = x.data()[i] > 0.0 ? r.data()[i] : 0.0;
  auto loss = [&] { return dot(r, relu(x)); };
  return check("relu", {{&x.data(), g}}, loss);
}

GradCheckResult srd_check(std::uint64_t seed) {
  FocalVolumeTensor<double> x{random_tensor(4, 4, 3, 2, seed), 0};
  auto w = make_srd<double>(2);
  randomize(w.conv_a.w, seed + 1);
  randomize(w.conv_a.b, seed + 2);
  randomize(w.conv_b.w, seed + 3);
  randomize(w.conv_b.b, seed + 4);
  randomize(w.attention.w, seed + 5);
  randomize(w.attention.b, seed + 6);
  SrdCache<double> cache;
  srd_block(x, w, &cache);
  T4 r = random_tensor(4, 4, 3, 2, seed + 7);
  auto g = srd_backward(cache, w, r);
  auto loss = [&] { return dot(r, srd_block(x, w).data); };
  return check("srd_block",
               {{&x.data.data(), g.input.data()},
                {&w.conv_a.w, g.weights.conv_a.w},
                {&w.conv_a.b, g.weights.conv_a.b},
                {&w.conv_b.w, g.weights.conv_b.w},
                {&w.conv_b.b, g.weights.conv_b.b},
                {&w.attention.w, g.weights.attention.w},
                {&w.attention.b, g.weights.attention.b}},
               loss);
}

GradCheckResult efd_check(std::uint64_t seed) {
  FocalVolumeTensor<double> x{random_tensor(4, 4, 3, 2, seed), 0};
  auto w = make_efd<double>(2);
  randomize(w.conv.w, seed + 1);
  randomize(w.conv.b, seed + 2);
  EfdCache<double> cache;
  const auto out = efd_block(x, w, &cache);
  T4 r = random_tensor(out.data.h(), out.data.w(), out.data.n(), out.data.c(), seed + 3);
  auto g = efd_backward(cache, w, r);
  auto loss = [&] { return dot(r, efd_block(x, w).data); };
  return check("efd_block", {{&x.data.data(), g.input.data()}, {&w.conv.w, g.weights.conv.w}, {&w.conv.b, g.weights.conv.b}},
               loss);
}

GradCheckResult pyramid_shape_check(std::uint64_t seed) {
  Tensor4<float> x(16, 16, 5, 4);
  randomize(x.data(), seed);
  auto w = make_pyramid<float>(4);
  randomize(w, seed + 1);
  const auto levels = feature_pyramid(x, w);
  GradCheckResult res{"pyramid shapes 16x16x5x4", 0.0, 0.5, 3};
  for (int l = 0; l < 3; ++l) {
    const auto& d = levels[l].data;
    if (levels[l].level != l || d.h() != 16 >> l || d.w() != 16 >> l || d.n() != 5 || d.c() != 4 << l) {
      res.max_rel_error = 1.0;
    }
  }
  return res;
}

GradCheckResult blocked_check(std::uint64_t seed) {
  Tensor4<float> x(9, 21, 4, 3);
  randomize(x.data(), seed);
  auto w2 = make_conv2d<float>(3, 3, 5);
  randomize(w2.w, seed + 1);
  randomize(w2.b, seed + 2);
  auto w3 = make_conv3d<float>(3, 3, 3, 4);
  randomize(w3.w, seed + 3);
  randomize(w3.b, seed + 4);
  double diff = 0.0;
  const auto a = conv2d(x, w2);
  const auto b = conv2d_blocked(x, w2);
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, double(std::abs(a.data()[i] - b.data()[i])));
  const auto c = conv3d(x, w3);
  const auto d = conv3d_blocked(x, w3);
  for (std::size_t i = 0; i < c.size(); ++i) diff = std::max(diff, double(std::abs(c.data()[i] - d.data()[i])));
  return {"naive vs blocked kernels (abs diff)", diff, 1e-6, a.size() + c.size()};
}

}  // namespace

double max_relative_error(std::vector<double>& param, const std::vector<double>& analytic,
                          const std::function<double()>& loss, double h, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double up = loss();
    param[i] = saved - h;
    const double down = loss();
    param[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
  }
  return worst;
}

std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed) {
  return {conv2d_check(seed, 1), conv2d_check(seed + 10, 2), conv3d_check(seed + 20),  maxpool_check(seed + 30),
          relu_check(seed + 40), srd_check(seed + 50),       efd_check(seed + 60),     pyramid_shape_check(seed + 70),
          blocked_check(seed + 80)};
}

}  // namespace dff::nn
