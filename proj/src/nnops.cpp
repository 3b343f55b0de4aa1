#include "dff/nnops.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "dff/image.hpp"

namespace dff::nn {

template <typename T>
Tensor4<T>::Tensor4(int h, int w, int n, int c, T fill) : h_(h), w_(w), n_(n), c_(c) {
  if (h < 0 || w < 0 || n < 0 || c < 0) throw DataError("negative tensor dimension");
  data_.assign(static_cast<std::size_t>(h) * w * n * c, fill);
}

template <typename T>
Conv2dWeights<T> make_conv2d(int k, int cin, int cout) {
  if (k < 1 || k % 2 == 0 || cin < 1 || cout < 1) throw DataError("invalid conv2d shape");
  Conv2dWeights<T> c;
  c.k = k;
  c.cin = cin;
  c.cout = cout;
  c.w.assign(static_cast<std::size_t>(k) * k * cin * cout, T(0));
  c.b.assign(cout, T(0));
  return c;
}

template <typename T>
Conv3dWeights<T> make_conv3d(int k, int kn, int cin, int cout) {
  if (k < 1 || k % 2 == 0 || kn < 1 || kn % 2 == 0 || cin < 1 || cout < 1) throw DataError("invalid conv3d shape");
  Conv3dWeights<T> c;
  c.k = k;
  c.kn = kn;
  c.cin = cin;
  c.cout = cout;
  c.w.assign(static_cast<std::size_t>(k) * k * kn * cin * cout, T(0));
  c.b.assign(cout, T(0));
  return c;
}

namespace {

template <typename W>
void check_weights(const W& w, std::size_t expected) {
  if (w.w.size() != expected || static_cast<int>(w.b.size()) != w.cout) {
    throw DataError("weight buffer does not match its declared shape");
  }
}

template <typename T>
void check_conv2d(const Tensor4<T>& x, const Conv2dWeights<T>& w, int stride) {
  check_weights(w, static_cast<std::size_t>(w.k) * w.k * w.cin * w.cout);
  if (x.c() != w.cin) throw DataError("conv2d channel mismatch");
  if (stride < 1) throw DataError("conv2d stride must be positive");
}

template <typename T>
void check_conv3d(const Tensor4<T>& x, const Conv3dWeights<T>& w) {
  check_weights(w, static_cast<std::size_t>(w.k) * w.k * w.kn * w.cin * w.cout);
  if (x.c() != w.cin) throw DataError("conv3d channel mismatch");
}

}  // namespace

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Conv2dWeights<T>& w, int stride) {
  check_conv2d(x, w, stride);
  const int oh = (x.h() + stride - 1) / stride;
  const int ow = (x.w() + stride - 1) / stride;
  const int pad = w.k / 2;
  Tensor4<T> y(oh, ow, x.n(), w.cout);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int n = 0; n < x.n(); ++n) {
        for (int co = 0; co < w.cout; ++co) {
          T acc = w.b[co];
          for (int ky = 0; ky < w.k; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < w.k; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= x.w()) continue;
              for (int ci = 0; ci < w.cin; ++ci) acc += x(iy, ix, n, ci) * w.at(ky, kx, ci, co);
            }
          }
          y(oy, ox, n, co) = acc;
        }
      }
    }
  }
  return y;
}

// Tiles the output columns so one strip of input rows stays resident while
// every tap is applied; the inner loop runs over contiguous cout.
template <typename T>
Tensor4<T> conv2d_blocked(const Tensor4<T>& x, const Conv2dWeights<T>& w) {
  check_conv2d(x, w, 1);
  constexpr int kTile = 16;
  const int pad = w.k / 2;
  const int N = x.n();
  Tensor4<T> y(x.h(), x.w(), N, w.cout);
  for (int oy = 0; oy < x.h(); ++oy) {
    for (int x0 = 0; x0 < x.w(); x0 += kTile) {
      const int x1 = std::min(x.w(), x0 + kTile);
      for (int ox = x0; ox < x1; ++ox) {
        for (int n = 0; n < N; ++n) std::copy(w.b.begin(), w.b.end(), &y(oy, ox, n, 0));
      }
      for (int ky = 0; ky < w.k; ++ky) {
        const int iy = oy + ky - pad;
        if (iy < 0 || iy >= x.h()) continue;
        for (int kx = 0; kx < w.k; ++kx) {
          const T* wt = &w.w[(static_cast<std::size_t>(ky) * w.k + kx) * w.cin * w.cout];
          for (int ox = x0; ox < x1; ++ox) {
            const int ix = ox + kx - pad;
            if (ix < 0 || ix >= x.w()) continue;
            for (int n = 0; n < N; ++n) {
              const T* in = x.data().data() + x.index(iy, ix, n, 0);
              T* out = &y(oy, ox, n, 0);
              for (int ci = 0; ci < w.cin; ++ci) {
                const T v = in[ci];
                const T* row = wt + static_cast<std::size_t>(ci) * w.cout;
                for (int co = 0; co < w.cout; ++co) out[co] += v * row[co];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& x, const Conv2dWeights<T>& w, const Tensor4<T>& grad_out,
                               int stride) {
  check_conv2d(x, w, stride);
  const int oh = (x.h() + stride - 1) / stride;
  const int ow = (x.w() + stride - 1) / stride;
  if (grad_out.h() != oh || grad_out.w() != ow || grad_out.n() != x.n() || grad_out.c() != w.cout) {
    throw DataError("conv2d gradient shape mismatch");
  }
  const int pad = w.k / 2;
  Conv2dGrads<T> g{Tensor4<T>(x.h(), x.w(), x.n(), x.c()), make_conv2d<T>(w.k, w.cin, w.cout)};
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int n = 0; n < x.n(); ++n) {
        for (int co = 0; co < w.cout; ++co) {
          const T go = grad_out(oy, ox, n, co);
          g.weights.b[co] += go;
          for (int ky = 0; ky < w.k; ++ky) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < w.k; ++kx) {
              const int ix = ox * stride + kx - pad;
              if (ix < 0 || ix >= x.w()) continue;
              for (int ci = 0; ci < w.cin; ++ci) {
                g.weights.at(ky, kx, ci, co) += go * x(iy, ix, n, ci);
                g.input(iy, ix, n, ci) += go * w.at(ky, kx, ci, co);
              }
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor4<T> conv3d(const Tensor4<T>& x, const Conv3dWeights<T>& w) {
  check_conv3d(x, w);
  const int pad = w.k / 2;
  const int padn = w.kn / 2;
  Tensor4<T> y(x.h(), x.w(), x.n(), w.cout);
  for (int oy = 0; oy < x.h(); ++oy) {
    for (int ox = 0; ox < x.w(); ++ox) {
      for (int on = 0; on < x.n(); ++on) {
        for (int co = 0; co < w.cout; ++co) {
          T acc = w.b[co];
          for (int ky = 0; ky < w.k; ++ky) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < w.k; ++kx) {
              const int ix = ox + kx - pad;
              if (ix < 0 || ix >= x.w()) continue;
              for (int kk = 0; kk < w.kn; ++kk) {
                const int in = on + kk - padn;
                if (in < 0 || in >= x.n()) continue;
                for (int ci = 0; ci < w.cin; ++ci) acc += x(iy, ix, in, ci) * w.at(ky, kx, kk, ci, co);
              }
            }
          }
          y(oy, ox, on, co) = acc;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> conv3d_blocked(const Tensor4<T>& x, const Conv3dWeights<T>& w) {
  check_conv3d(x, w);
  constexpr int kTile = 16;
  const int pad = w.k / 2;
  const int padn = w.kn / 2;
  const int N = x.n();
  Tensor4<T> y(x.h(), x.w(), N, w.cout);
  for (int oy = 0; oy < x.h(); ++oy) {
    for (int x0 = 0; x0 < x.w(); x0 += kTile) {
      const int x1 = std::min(x.w(), x0 + kTile);
      for (int ox = x0; ox < x1; ++ox) {
        for (int n = 0; n < N; ++n) std::copy(w.b.begin(), w.b.end(), &y(oy, ox, n, 0));
      }
      for (int ky = 0; ky < w.k; ++ky) {
        const int iy = oy + ky - pad;
        if (iy < 0 || iy >= x.h()) continue;
        for (int kx = 0; kx < w.k; ++kx) {
          for (int ox = x0; ox < x1; ++ox) {
            const int ix = ox + kx - pad;
            if (ix < 0 || ix >= x.w()) continue;
            for (int on = 0; on < N; ++on) {
              T* out = &y(oy, ox, on, 0);
              for (int kk = 0; kk < w.kn; ++kk) {
                const int in = on + kk - padn;
                if (in < 0 || in >= N) continue;
                const T* src = x.data().data() + x.index(iy, ix, in, 0);
                const T* wt = &w.w[w.offset(ky, kx, kk, 0, 0)];
                for (int ci = 0; ci < w.cin; ++ci) {
                  const T v = src[ci];
                  const T* row = wt + static_cast<std::size_t>(ci) * w.cout;
                  for (int co = 0; co < w.cout; ++co) out[co] += v * row[co];
                }
              }
            }
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Conv3dGrads<T> conv3d_backward(const Tensor4<T>& x, const Conv3dWeights<T>& w, const Tensor4<T>& grad_out) {
  check_conv3d(x, w);
  if (grad_out.h() != x.h() || grad_out.w() != x.w() || grad_out.n() != x.n() || grad_out.c() != w.cout) {
    throw DataError("conv3d gradient shape mismatch");
  }
  const int pad = w.k / 2;
  const int padn = w.kn / 2;
  Conv3dGrads<T> g{Tensor4<T>(x.h(), x.w(), x.n(), x.c()), make_conv3d<T>(w.k, w.kn, w.cin, w.cout)};
  for (int oy = 0; oy < x.h(); ++oy) {
    for (int ox = 0; ox < x.w(); ++ox) {
      for (int on = 0; on < x.n(); ++on) {
        for (int co = 0; co < w.cout; ++co) {
          const T go = grad_out(oy, ox, on, co);
          g.weights.b[co] += go;
          for (int ky = 0; ky < w.k; ++ky) {
            const int iy = oy + ky - pad;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < w.k; ++kx) {
              const int ix = ox + kx - pad;
              if (ix < 0 || ix >= x.w()) continue;
              for (int kk = 0; kk < w.kn; ++kk) {
                const int in = on + kk - padn;
                if (in < 0 || in >= x.n()) continue;
                for (int ci = 0; ci < w.cin; ++ci) {
                  g.weights.at(ky, kx, kk, ci, co) += go * x(iy, ix, in, ci);
                  g.input(iy, ix, in, ci) += go * w.at(ky, kx, kk, ci, co);
                }
              }
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
PoolResult<T> maxpool2d(const Tensor4<T>& x, int window) {
  if (window < 1) throw DataError("pool window must be positive");
  if (x.h() % window != 0 || x.w() % window != 0) {
    throw DataError("pool input " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
                    " is not divisible by the window");
  }
  PoolResult<T> r{Tensor4<T>(x.h() / window, x.w() / window, x.n(), x.c()), {}};
  r.argmax.resize(r.out.size());
  for (int oy = 0; oy < r.out.h(); ++oy) {
    for (int ox = 0; ox < r.out.w(); ++ox) {
      for (int n = 0; n < x.n(); ++n) {
        for (int c = 0; c < x.c(); ++c) {
          std::size_t best = x.index(oy * window, ox * window, n, c);
          for (int dy = 0; dy < window; ++dy) {
            for (int dx = 0; dx < window; ++dx) {
              const std::size_t i = x.index(oy * window + dy, ox * window + dx, n, c);
              if (x.data()[i] > x.data()[best]) best = i;
            }
          }
          const std::size_t o = r.out.index(oy, ox, n, c);
          r.out.data()[o] = x.data()[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor4<T> maxpool2d_backward(const Tensor4<T>& x, const PoolResult<T>& pooled, const Tensor4<T>& grad_out) {
  if (!grad_out.same_shape(pooled.out) || pooled.argmax.size() != grad_out.size()) {
    throw DataError("maxpool gradient shape mismatch");
  }
  Tensor4<T> g(x.h(), x.w(), x.n(), x.c());
  for (std::size_t o = 0; o < grad_out.size(); ++o) g.data()[pooled.argmax[o]] += grad_out.data()[o];
  return g;
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> y = x;
  for (T& v : y.data()) v = std::max(v, T(0));
  return y;
}

template <typename T>
void check_level_shape(const FocalVolumeTensor<T>& t, int base_h, int base_w, int n, int base_c) {
  const int L = t.level;
  if (L < 0 || L > 2) throw DataError("pyramid level out of range: " + std::to_string(L));
  const int div = 1 << L;
  const auto& d = t.data;
  if (d.h() * div != base_h || d.w() * div != base_w || d.n() != n || d.c() != base_c * div) {
    throw DataError("tensor shape " + std::to_string(d.h()) + "x" + std::to_string(d.w()) + "x" +
                    std::to_string(d.n()) + "x" + std::to_string(d.c()) + " violates the level-" +
                    std::to_string(L) + " contract");
  }
}

template <typename T>
SrdWeights<T> make_srd(int channels) {
  return {make_conv2d<T>(3, channels, channels), make_conv2d<T>(3, channels, channels),
          make_conv3d<T>(3, 3, channels, channels)};
}

namespace {

template <typename T>
void add_into(Tensor4<T>& a, const Tensor4<T>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

}  // namespace

template <typename T>
FocalVolumeTensor<T> srd_block(const FocalVolumeTensor<T>& x, const SrdWeights<T>& w, SrdCache<T>* cache) {
  const int c = x.data.c();
  if (w.conv_a.cin != c || w.conv_a.cout != c || w.conv_b.cin != c || w.conv_b.cout != c ||
      w.attention.cin != c || w.attention.cout != c) {
    throw DataError("SRD weights do not preserve the channel count");
  }
  Tensor4<T> a1 = conv2d_blocked(x.data, w.conv_a);
  Tensor4<T> r1 = relu(a1);
  Tensor4<T> y = conv2d_blocked(r1, w.conv_b);
  add_into(y, x.data);
  Tensor4<T> a3 = conv3d_blocked(y, w.attention);
  FocalVolumeTensor<T> out{y, x.level};
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data.data()[i] += std::max(a3.data()[i], T(0));
  if (cache) *cache = {x.data, std::move(a1), std::move(r1), std::move(y), std::move(a3)};
  return out;
}

template <typename T>
SrdGrads<T> srd_backward(const SrdCache<T>& cache, const SrdWeights<T>& w, const Tensor4<T>& grad_out) {
  if (!grad_out.same_shape(cache.y)) throw DataError("SRD gradient shape mismatch");
  Tensor4<T> g_a3 = grad_out;
  for (std::size_t i = 0; i < g_a3.size(); ++i) {
    if (!(cache.a3.data()[i] > T(0))) g_a3.data()[i] = T(0);
  }
  auto att = conv3d_backward(cache.y, w.attention, g_a3);
  Tensor4<T> g_y = grad_out;
  add_into(g_y, att.input);
  auto cb = conv2d_backward(cache.r1, w.conv_b, g_y);
  Tensor4<T> g_a1 = cb.input;
  for (std::size_t i = 0; i < g_a1.size(); ++i) {
    if (!(cache.a1.data()[i] > T(0))) g_a1.data()[i] = T(0);
  }
  auto ca = conv2d_backward(cache.x, w.conv_a, g_a1);
  SrdGrads<T> g{std::move(g_y), {std::move(ca.weights), std::move(cb.weights), std::move(att.weights)}};
  add_into(g.input, ca.input);
  return g;
}

template <typename T>
EfdWeights<T> make_efd(int in_channels) {
  return {make_conv3d<T>(3, 3, in_channels, 2 * in_channels)};
}

template <typename T>
FocalVolumeTensor<T> efd_block(const FocalVolumeTensor<T>& x, const EfdWeights<T>& w, EfdCache<T>* cache) {
  if (x.level >= 2) throw DataError("EFD input is already at the coarsest pyramid level");
  if (x.data.h() % 2 != 0 || x.data.w() % 2 != 0) throw DataError("EFD input must have even spatial dimensions");
  if (w.conv.cin != x.data.c() || w.conv.cout != 2 * x.data.c()) {
    throw DataError("EFD weights must double the channel count");
  }
  auto pooled = maxpool2d(x.data, 2);
  FocalVolumeTensor<T> out{conv3d_blocked(pooled.out, w.conv), x.level + 1};
  if (cache) *cache = {x.data, std::move(pooled)};
  return out;
}

template <typename T>
EfdGrads<T> efd_backward(const EfdCache<T>& cache, const EfdWeights<T>& w, const Tensor4<T>& grad_out) {
  auto conv = conv3d_backward(cache.pooled.out, w.conv, grad_out);
  return {maxpool2d_backward(cache.x, cache.pooled, conv.input), {std::move(conv.weights)}};
}

template <typename T>
PyramidWeights<T> make_pyramid(int base_channels) {
  if (base_channels < 1) throw DataError("pyramid needs at least one channel");
  PyramidWeights<T> p;
  for (int l = 0; l < 3; ++l) p.srd[l] = make_srd<T>(base_channels << l);
  for (int l = 0; l < 2; ++l) p.efd[l] = make_efd<T>(base_channels << l);
  return p;
}

template <typename T>
std::array<FocalVolumeTensor<T>, 3> feature_pyramid(const Tensor4<T>& x, const PyramidWeights<T>& w) {
  const int base_h = x.h();
  const int base_w = x.w();
  const int base_c = x.c();
  if (base_h % 4 != 0 || base_w % 4 != 0) throw DataError("pyramid input size must be divisible by 4");
  std::array<FocalVolumeTensor<T>, 3> out;
  FocalVolumeTensor<T> cur{x, 0};
  for (int l = 0; l < 3; ++l) {
    check_level_shape(cur, base_h, base_w, x.n(), base_c);
    out[l] = srd_block(cur, w.srd[l]);
    check_level_shape(out[l], base_h, base_w, x.n(), base_c);
    if (l < 2) cur = efd_block(out[l], w.efd[l]);
  }
  return out;
}

namespace {

template <typename T>
std::vector<std::vector<T>*> pyramid_buffers(PyramidWeights<T>& w) {
  std::vector<std::vector<T>*> out;
  for (auto& s : w.srd) {
    for (auto* v : {&s.conv_a.w, &s.conv_a.b, &s.conv_b.w, &s.conv_b.b, &s.attention.w, &s.attention.b}) {
      out.push_back(v);
    }
  }
  for (auto& e : w.efd) {
    out.push_back(&e.conv.w);
    out.push_back(&e.conv.b);
  }
  return out;
}

std::vector<std::uint32_t> conv2d_dims(const Conv2dWeights<float>& c) {
  return {std::uint32_t(c.k), std::uint32_t(c.k), std::uint32_t(c.cin), std::uint32_t(c.cout)};
}
std::vector<std::uint32_t> conv3d_dims(const Conv3dWeights<float>& c) {
  return {std::uint32_t(c.k), std::uint32_t(c.k), std::uint32_t(c.kn), std::uint32_t(c.cin),
          std::uint32_t(c.cout)};
}

std::vector<std::vector<std::uint32_t>> pyramid_dims(const PyramidWeights<float>& w) {
  std::vector<std::vector<std::uint32_t>> out;
  for (const auto& s : w.srd) {
    out.push_back(conv2d_dims(s.conv_a));
    out.push_back({std::uint32_t(s.conv_a.cout)});
    out.push_back(conv2d_dims(s.conv_b));
    out.push_back({std::uint32_t(s.conv_b.cout)});
    out.push_back(conv3d_dims(s.attention));
    out.push_back({std::uint32_t(s.attention.cout)});
  }
  for (const auto& e : w.efd) {
    out.push_back(conv3d_dims(e.conv));
    out.push_back({std::uint32_t(e.conv.cout)});
  }
  return out;
}

constexpr char kMagic[4] = {'D', 'F', 'F', 'W'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw DataError("truncated weight file");
  return v;
}

}  // namespace

template <typename T>
void randomize(std::vector<T>& values, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (T& v : values) v = static_cast<T>(dist(rng));
}

template <typename T>
void randomize(PyramidWeights<T>& w, std::uint64_t seed) {
  std::uint64_t i = 0;
  for (auto* buf : pyramid_buffers(w)) randomize(*buf, seed + 0x9E3779B97F4A7C15ULL * ++i);
}

void save_weights(const PyramidWeights<float>& w, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  auto& mut = const_cast<PyramidWeights<float>&>(w);
  const auto bufs = pyramid_buffers(mut);
  const auto dims = pyramid_dims(w);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(bufs.size()));
  for (std::size_t t = 0; t < bufs.size(); ++t) {
    put_u32(os, static_cast<std::uint32_t>(dims[t].size()));
    for (auto d : dims[t]) put_u32(os, d);
    os.write(reinterpret_cast<const char*>(bufs[t]->data()),
             static_cast<std::streamsize>(bufs[t]->size() * sizeof(float)));
  }
  if (!os) throw DataError("failed writing " + path.string());
}

PyramidWeights<float> load_weights(const std::filesystem::path& path, int base_channels) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a weight file: bad magic");
  if (get_u32(is) != kVersion) throw DataError("unsupported weight file version");
  PyramidWeights<float> w = make_pyramid<float>(base_channels);
  const auto bufs = pyramid_buffers(w);
  const auto dims = pyramid_dims(w);
  if (get_u32(is) != bufs.size()) throw DataError("weight file tensor count mismatch");
  for (std::size_t t = 0; t < bufs.size(); ++t) {
    const std::uint32_t rank = get_u32(is);
    if (rank != dims[t].size()) throw DataError("weight tensor " + std::to_string(t) + " has the wrong rank");
    for (std::size_t d = 0; d < rank; ++d) {
      if (get_u32(is) != dims[t][d]) throw DataError("weight tensor " + std::to_string(t) + " has the wrong shape");
    }
    if (!is.read(reinterpret_cast<char*>(bufs[t]->data()),
                 static_cast<std::streamsize>(bufs[t]->size() * sizeof(float)))) {
      throw DataError("truncated weight file");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in weight file");
  return w;
}

#define DFF_NN_INSTANTIATE(T)                                                                                     \
  template class Tensor4<T>;                                                                                      \
  template Conv2dWeights<T> make_conv2d<T>(int, int, int);                                                        \
  template Conv3dWeights<T> make_conv3d<T>(int, int, int, int);                                                   \
  template Tensor4<T> conv2d<T>(const Tensor4<T>&, const Conv2dWeights<T>&, int);                                 \
  template Tensor4<T> conv2d_blocked<T>(const Tensor4<T>&, const Conv2dWeights<T>&);                              \
  template Conv2dGrads<T> conv2d_backward<T>(const Tensor4<T>&, const Conv2dWeights<T>&, const Tensor4<T>&, int); \
  template Tensor4<T> conv3d<T>(const Tensor4<T>&, const Conv3dWeights<T>&);                                      \
  template Tensor4<T> conv3d_blocked<T>(const Tensor4<T>&, const Conv3dWeights<T>&);                              \
  template Conv3dGrads<T> conv3d_backward<T>(const Tensor4<T>&, const Conv3dWeights<T>&, const Tensor4<T>&);      \
  template PoolResult<T> maxpool2d<T>(const Tensor4<T>&, int);                                                    \
  template Tensor4<T> maxpool2d_backward<T>(const Tensor4<T>&, const PoolResult<T>&, const Tensor4<T>&);          \
  template Tensor4<T> relu<T>(const Tensor4<T>&);                                                                 \
  template void check_level_shape<T>(const FocalVolumeTensor<T>&, int, int, int, int);                            \
  template SrdWeights<T> make_srd<T>(int);                                                                        \
  template FocalVolumeTensor<T> srd_block<T>(const FocalVolumeTensor<T>&, const SrdWeights<T>&, SrdCache<T>*);    \
  template SrdGrads<T> srd_backward<T>(const SrdCache<T>&, const SrdWeights<T>&, const Tensor4<T>&);              \
  template EfdWeights<T> make_efd<T>(int);                                                                        \
  template FocalVolumeTensor<T> efd_block<T>(const FocalVolumeTensor<T>&, const EfdWeights<T>&, EfdCache<T>*);    \
  template EfdGrads<T> efd_backward<T>(const EfdCache<T>&, const EfdWeights<T>&, const Tensor4<T>&);              \
  template PyramidWeights<T> make_pyramid<T>(int);                                                                \
  template std::array<FocalVolumeTensor<T>, 3> feature_pyramid<T>(const Tensor4<T>&, const PyramidWeights<T>&);   \
  template void randomize<T>(PyramidWeights<T>&, std::uint64_t);                                                  \
  template void randomize<T>(std::vector<T>&, std::uint64_t);

DFF_NN_INSTANTIATE(float)
DFF_NN_INSTANTIATE(double)

#undef DFF_NN_INSTANTIATE

}  // namespace dff::nn
