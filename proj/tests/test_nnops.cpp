#include <doctest.h>

#include <fstream>
#include <random>

#include "dff/gradcheck.hpp"
#include "dff/image.hpp"
#include "dff/nnops.hpp"
#include "support.hpp"

using namespace dff;
using namespace dff::nn;

namespace {

template <typename T>
Tensor4<T> random_tensor(int h, int w, int n, int c, std::uint64_t seed) {
  Tensor4<T> t(h, w, n, c);
  randomize(t.data(), seed);
  return t;
}

template <typename T>
Tensor4<T> reverse_slices(const Tensor4<T>& x) {
  Tensor4<T> r(x.h(), x.w(), x.n(), x.c());
  for (int y = 0; y < x.h(); ++y)
    for (int i = 0; i < x.w(); ++i)
      for (int k = 0; k < x.n(); ++k)
        for (int c = 0; c < x.c(); ++c) r(y, i, x.n() - 1 - k, c) = x(y, i, k, c);
  return r;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Worst relative mismatch between analytic gradient and a central difference
// of loss(param), perturbing every entry.
double fd_error(std::vector<double>& param, const std::vector<double>& analytic, const std::function<double()>& loss) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double keep = param[i];
    param[i] = keep + h;
    const double up = loss();
    param[i] = keep - h;
    const double down = loss();
    param[i] = keep;
    const double num = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(num - analytic[i]) / std::max({std::abs(num), std::abs(analytic[i]), 1e-3}));
  }
  return worst;
}

}  // namespace

TEST_CASE("identity kernel reproduces the input") {
  auto w = make_conv2d<double>(3, 2, 2);
  w.at(1, 1, 0, 0) = 1.0;
  w.at(1, 1, 1, 1) = 1.0;
  const auto x = random_tensor<double>(5, 6, 3, 2, 1);
  CHECK(conv2d(x, w).data() == x.data());
  auto w3 = make_conv3d<double>(3, 3, 2, 2);
  w3.at(1, 1, 1, 0, 0) = 1.0;
  w3.at(1, 1, 1, 1, 1) = 1.0;
  CHECK(conv3d(x, w3).data() == x.data());
}

TEST_CASE("all-ones kernel sums the neighbourhood with zero padding") {
  auto w = make_conv2d<double>(3, 1, 1);
  for (double& v : w.w) v = 1.0;
  const Tensor4<double> x(4, 4, 1, 1, 1.0);
  const auto y = conv2d(x, w);
  CHECK(y(1, 1, 0, 0) == 9.0);
  CHECK(y(0, 1, 0, 0) == 6.0);
  CHECK(y(0, 0, 0, 0) == 4.0);
  w.b[0] = 0.5;
  CHECK(conv2d(x, w)(2, 2, 0, 0) == 9.5);
  const auto s = conv2d(x, w, 2);
  CHECK(s.h() == 2);
  CHECK(s(0, 0, 0, 0) == 4.5);
  CHECK(conv2d(Tensor4<double>(5, 5, 1, 1), w, 2).h() == 3);
}

TEST_CASE("max pooling picks the window maximum and its position") {
  Tensor4<double> x(2, 4, 1, 1);
  const double vals[] = {1, 3, 2, 2, 4, 0, 2, 2};
  std::copy(std::begin(vals), std::end(vals), x.data().begin());
  const auto p = maxpool2d(x, 2);
  CHECK(p.out.h() == 1);
  CHECK(p.out(0, 0, 0, 0) == 4.0);
  CHECK(p.out(0, 1, 0, 0) == 2.0);
  CHECK(p.argmax[0] == x.index(1, 0, 0, 0));
  CHECK(p.argmax[1] == x.index(0, 2, 0, 0));  // tie keeps the first
  CHECK_THROWS_AS(maxpool2d(Tensor4<double>(3, 4, 1, 1), 2), DataError);
}

TEST_CASE("pooled values dominate the window mean") {
  const auto x = random_tensor<double>(8, 6, 2, 3, 4);
  const auto p = maxpool2d(x, 2);
  for (int y = 0; y < 4; ++y)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 2; ++k)
        for (int c = 0; c < 3; ++c) {
          const double mean = 0.25 * (x(2 * y, 2 * i, k, c) + x(2 * y + 1, 2 * i, k, c) + x(2 * y, 2 * i + 1, k, c) +
                                      x(2 * y + 1, 2 * i + 1, k, c));
          CHECK(p.out(y, i, k, c) >= mean);
        }
}

TEST_CASE("zero-weight SRD block is the identity and attention is non-negative") {
  const auto x = random_tensor<double>(4, 4, 3, 2, 5);
  const FocalVolumeTensor<double> in{x, 0};
  CHECK(srd_block(in, make_srd<double>(2)).data.data() == x.data());

  auto w = make_srd<double>(2);
  randomize(w.attention.w, 9);
  SrdCache<double> cache;
  const auto out = srd_block(in, w, &cache);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.data.data()[i] >= cache.y.data()[i]);
  CHECK_THROWS_AS(srd_block(in, make_srd<double>(3)), DataError);
}

TEST_CASE("EFD halves space and doubles channels") {
  const FocalVolumeTensor<double> in{random_tensor<double>(8, 6, 3, 2, 6), 0};
  auto w = make_efd<double>(2);
  // Route channel c to outputs c and c + 2 with weights 1 and 2.
  for (int c = 0; c < 2; ++c) {
    w.conv.at(1, 1, 1, c, c) = 1.0;
    w.conv.at(1, 1, 1, c, c + 2) = 2.0;
  }
  const auto out = efd_block(in, w);
  CHECK(out.level == 1);
  CHECK(out.data.h() == 4);
  CHECK(out.data.w() == 3);
  CHECK(out.data.c() == 4);
  const auto pooled = maxpool2d(in.data, 2).out;
  for (int y = 0; y < 4; ++y)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        for (int c = 0; c < 2; ++c) {
          CHECK(out.data(y, i, k, c) == pooled(y, i, k, c));
          CHECK(out.data(y, i, k, c + 2) == 2.0 * pooled(y, i, k, c));
        }
  CHECK_THROWS_AS(efd_block(FocalVolumeTensor<double>{in.data, 2}, w), DataError);
  CHECK_THROWS_AS(efd_block(FocalVolumeTensor<double>{random_tensor<double>(5, 6, 3, 2, 1), 0}, w), DataError);
}

TEST_CASE("pyramid levels follow the halving and doubling contract") {
  auto w = make_pyramid<double>(4);
  randomize(w, 3);
  const auto x = random_tensor<double>(16, 12, 5, 4, 7);
  const auto out = feature_pyramid(x, w);
  for (int l = 0; l < 3; ++l) {
    CHECK(out[l].level == l);
    CHECK(out[l].data.h() == 16 >> l);
    CHECK(out[l].data.w() == 12 >> l);
    CHECK(out[l].data.n() == 5);
    CHECK(out[l].data.c() == 4 << l);
    CHECK_NOTHROW(check_level_shape(out[l], 16, 12, 5, 4));
  }
  CHECK_THROWS_AS(check_level_shape(FocalVolumeTensor<double>{out[1].data, 2}, 16, 12, 5, 4), DataError);
  CHECK_THROWS_AS(feature_pyramid(random_tensor<double>(10, 12, 5, 4, 1), w), DataError);
  CHECK_THROWS_AS(feature_pyramid(random_tensor<double>(16, 12, 5, 3, 1), w), DataError);
}

TEST_CASE("zero input through bias-free blocks stays zero") {
  auto w = make_pyramid<double>(2);
  randomize(w, 11);
  for (auto& s : w.srd) {
    std::fill(s.conv_a.b.begin(), s.conv_a.b.end(), 0.0);
    std::fill(s.conv_b.b.begin(), s.conv_b.b.end(), 0.0);
    std::fill(s.attention.b.begin(), s.attention.b.end(), 0.0);
  }
  for (auto& e : w.efd) std::fill(e.conv.b.begin(), e.conv.b.end(), 0.0);
  const auto out = feature_pyramid(Tensor4<double>(8, 8, 3, 2), w);
  for (const auto& o : out)
    for (double v : o.data.data()) CHECK(v == 0.0);
}

TEST_CASE("reversing the stack commutes with a flipped focal kernel") {
  const auto x = random_tensor<double>(5, 4, 4, 2, 12);
  auto w = make_conv3d<double>(3, 3, 2, 3);
  randomize(w.w, 13);
  randomize(w.b, 14);
  auto flipped = w;
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx)
      for (int kk = 0; kk < 3; ++kk)
        for (int ci = 0; ci < 2; ++ci)
          for (int co = 0; co < 3; ++co) flipped.at(ky, kx, 2 - kk, ci, co) = w.at(ky, kx, kk, ci, co);
  const auto a = reverse_slices(conv3d(x, w));
  const auto b = conv3d(reverse_slices(x), flipped);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("blocked kernels agree with the naive loops") {
  const auto x = random_tensor<float>(13, 11, 3, 5, 21);
  auto w2 = make_conv2d<float>(3, 5, 7);
  randomize(w2.w, 22);
  randomize(w2.b, 23);
  const auto a = conv2d(x, w2), b = conv2d_blocked(x, w2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-5f);
  auto w3 = make_conv3d<float>(3, 3, 5, 4);
  randomize(w3.w, 24);
  const auto c = conv3d(x, w3), d = conv3d_blocked(x, w3);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c.data()[i] - d.data()[i]) < 1e-5f);
}

TEST_CASE("conv2d and SRD gradients match central differences") {
  const auto x0 = random_tensor<double>(5, 4, 2, 2, 31);
  auto w = make_conv2d<double>(3, 2, 3);
  randomize(w.w, 32);
  randomize(w.b, 33);
  for (int stride : {1, 2}) {
    Tensor4<double> x = x0;
    const auto y = conv2d(x, w, stride);
    const auto gout = random_tensor<double>(y.h(), y.w(), y.n(), y.c(), 34);
    const auto g = conv2d_backward(x, w, gout, stride);
    auto loss = [&] { return dot(conv2d(x, w, stride).data(), gout.data()); };
    CHECK(fd_error(x.data(), g.input.data(), loss) < 1e-6);
    CHECK(fd_error(w.w, g.weights.w, loss) < 1e-6);
    CHECK(fd_error(w.b, g.weights.b, loss) < 1e-6);
  }

  auto s = make_srd<double>(2);
  randomize(s.conv_a.w, 41);
  randomize(s.conv_b.w, 42);
  randomize(s.attention.w, 43);
  randomize(s.attention.b, 44);
  FocalVolumeTensor<double> in{x0, 0};
  SrdCache<double> cache;
  const auto out = srd_block(in, s, &cache);
  const auto gout = random_tensor<double>(out.data.h(), out.data.w(), out.data.n(), out.data.c(), 45);
  const auto g = srd_backward(cache, s, gout);
  auto loss = [&] { return dot(srd_block(in, s).data.data(), gout.data()); };
  CHECK(fd_error(in.data.data(), g.input.data(), loss) < 1e-4);
  CHECK(fd_error(s.attention.w, g.weights.attention.w, loss) < 1e-4);
  CHECK(fd_error(s.conv_a.w, g.weights.conv_a.w, loss) < 1e-4);
}

TEST_CASE("bundled gradient suite passes") {
  const auto results = run_gradient_checks();
  CHECK(results.size() >= 8);
  for (const auto& r : results) {
    INFO(r.name << " " << r.max_rel_error);
    CHECK(r.passed());
    CHECK(r.entries > 0);
  }
  std::vector<double> p{1.0, 2.0};
  CHECK(max_relative_error(p, {2.0, 4.0}, [&] { return p[0] * p[0] + p[1] * p[1]; }) < 1e-8);
  CHECK(max_relative_error(p, {2.0, 0.0}, [&] { return p[0] * p[0] + p[1] * p[1]; }) > 0.5);
  CHECK(p == std::vector<double>{1.0, 2.0});
}

TEST_CASE("weight files round trip and reject corruption") {
  const auto dir = test::scratch_dir("nn_weights");
  auto w = make_pyramid<float>(2);
  randomize(w, 77);
  save_weights(w, dir / "w.bin");
  const auto back = load_weights(dir / "w.bin", 2);
  for (int l = 0; l < 3; ++l) {
    CHECK(back.srd[l].conv_a.w == w.srd[l].conv_a.w);
    CHECK(back.srd[l].attention.b == w.srd[l].attention.b);
  }
  CHECK(back.efd[1].conv.w == w.efd[1].conv.w);
  CHECK_THROWS_AS(load_weights(dir / "w.bin", 3), DataError);

  std::ifstream in(dir / "w.bin", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto write = [&](const std::string& name, const std::string& data) {
    std::ofstream(dir / name, std::ios::binary) << data;
    return dir / name;
  };
  CHECK_THROWS_AS(load_weights(write("trunc.bin", bytes.substr(0, bytes.size() - 3)), 2), DataError);
  CHECK_THROWS_AS(load_weights(write("extra.bin", bytes + "x"), 2), DataError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(load_weights(write("magic.bin", bad), 2), DataError);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(load_weights(write("version.bin", bad), 2), DataError);
  CHECK_THROWS_AS(load_weights(dir / "missing.bin", 2), DataError);
}
