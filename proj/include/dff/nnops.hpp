#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace dff::nn {

/// Dense H x W x N x C volume (N = focal slices, C = channels), C fastest.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int h, int w, int n, int c, T fill = T(0));

  int h() const { return h_; }
  int w() const { return w_; }
  int n() const { return n_; }
  int c() const { return c_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor4& o) const { return h_ == o.h_ && w_ == o.w_ && n_ == o.n_ && c_ == o.c_; }

  std::size_t index(int y, int x, int k, int ch) const {
    return ((static_cast<std::size_t>(y) * w_ + x) * n_ + k) * c_ + ch;
  }
  T& operator()(int y, int x, int k, int ch) { return data_[index(y, x, k, ch)]; }
  T operator()(int y, int x, int k, int ch) const { return data_[index(y, x, k, ch)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  int h_ = 0;
  int w_ = 0;
  int n_ = 0;
  int c_ = 0;
  std::vector<T> data_;
};

/// Spatial kernel applied to every focal slice independently.
/// Weight layout: [ky][kx][cin][cout].
template <typename T>
struct Conv2dWeights {
  int k = 3;
  int cin = 0;
  int cout = 0;
  std::vector<T> w;
  std::vector<T> b;

  T& at(int ky, int kx, int ci, int co) { return w[((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + co]; }
  T at(int ky, int kx, int ci, int co) const {
    return w[((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + co];
  }
};

/// Kernel over (H, W, N). Weight layout: [ky][kx][kn][cin][cout].
template <typename T>
struct Conv3dWeights {
  int k = 3;
  int kn = 3;
  int cin = 0;
  int cout = 0;
  std::vector<T> w;
  std::vector<T> b;

  std::size_t offset(int ky, int kx, int kk, int ci, int co) const {
    return (((static_cast<std::size_t>(ky) * k + kx) * kn + kk) * cin + ci) * cout + co;
  }
  T& at(int ky, int kx, int kk, int ci, int co) { return w[offset(ky, kx, kk, ci, co)]; }
  T at(int ky, int kx, int kk, int ci, int co) const { return w[offset(ky, kx, kk, ci, co)]; }
};

template <typename T>
Conv2dWeights<T> make_conv2d(int k, int cin, int cout);
template <typename T>
Conv3dWeights<T> make_conv3d(int k, int kn, int cin, int cout);

/// Same-padded cross-correlation; output spatial size is ceil(H / stride).
template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Conv2dWeights<T>& w, int stride = 1);

/// Cache-tiled equivalent of conv2d (stride 1), for the bulk path.
template <typename T>
Tensor4<T> conv2d_blocked(const Tensor4<T>& x, const Conv2dWeights<T>& w);

template <typename T>
struct Conv2dGrads {
  Tensor4<T> input;
  Conv2dWeights<T> weights;  // gradient, same layout as the weights
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& x, const Conv2dWeights<T>& w, const Tensor4<T>& grad_out,
                               int stride = 1);

/// Same-padded cross-correlation over (H, W, N).
template <typename T>
Tensor4<T> conv3d(const Tensor4<T>& x, const Conv3dWeights<T>& w);

template <typename T>
Tensor4<T> conv3d_blocked(const Tensor4<T>& x, const Conv3dWeights<T>& w);

template <typename T>
struct Conv3dGrads {
  Tensor4<T> input;
  Conv3dWeights<T> weights;
};

template <typename T>
Conv3dGrads<T> conv3d_backward(const Tensor4<T>& x, const Conv3dWeights<T>& w, const Tensor4<T>& grad_out);

template <typename T>
struct PoolResult {
  Tensor4<T> out;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Spatial max pooling with a square window and equal stride; N and C are
/// untouched. Dimensions must divide evenly. Ties keep the first element in
/// row-major window order.
template <typename T>
PoolResult<T> maxpool2d(const Tensor4<T>& x, int window = 2);

template <typename T>
Tensor4<T> maxpool2d_backward(const Tensor4<T>& x, const PoolResult<T>& pooled, const Tensor4<T>& grad_out);

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x);

/// Feature volume tagged with its pyramid level.
template <typename T>
struct FocalVolumeTensor {
  Tensor4<T> data;
  int level = 0;
};

/// Throws unless `t` has the level-L shape H0/2^L x W0/2^L x N x C0*2^L.
template <typename T>
void check_level_shape(const FocalVolumeTensor<T>& t, int base_h, int base_w, int n, int base_c);

/// Sharp-region block: y = x + conv_b(relu(conv_a(x))); out = y + relu(attention(y)).
template <typename T>
struct SrdWeights {
  Conv2dWeights<T> conv_a;
  Conv2dWeights<T> conv_b;
  Conv3dWeights<T> attention;
};

template <typename T>
SrdWeights<T> make_srd(int channels);

template <typename T>
struct SrdCache {
  Tensor4<T> x, a1, r1, y, a3;
};

template <typename T>
FocalVolumeTensor<T> srd_block(const FocalVolumeTensor<T>& x, const SrdWeights<T>& w, SrdCache<T>* cache = nullptr);

template <typename T>
struct SrdGrads {
  Tensor4<T> input;
  SrdWeights<T> weights;
};

template <typename T>
SrdGrads<T> srd_backward(const SrdCache<T>& cache, const SrdWeights<T>& w, const Tensor4<T>& grad_out);

/// Downsampling block: out = conv3d(maxpool2d(x)) with twice the channels.
template <typename T>
struct EfdWeights {
  Conv3dWeights<T> conv;
};

template <typename T>
EfdWeights<T> make_efd(int in_channels);

template <typename T>
struct EfdCache {
  Tensor4<T> x;
  PoolResult<T> pooled;
};

template <typename T>
FocalVolumeTensor<T> efd_block(const FocalVolumeTensor<T>& x, const EfdWeights<T>& w, EfdCache<T>* cache = nullptr);

template <typename T>
struct EfdGrads {
  Tensor4<T> input;
  EfdWeights<T> weights;
};

template <typename T>
EfdGrads<T> efd_backward(const EfdCache<T>& cache, const EfdWeights<T>& w, const Tensor4<T>& grad_out);

/// SRD -> EFD -> SRD -> EFD -> SRD, emitting the three SRD outputs.
template <typename T>
struct PyramidWeights {
  std::array<SrdWeights<T>, 3> srd;
  std::array<EfdWeights<T>, 2> efd;
};

template <typename T>
PyramidWeights<T> make_pyramid(int base_channels);

template <typename T>
std::array<FocalVolumeTensor<T>, 3> feature_pyramid(const Tensor4<T>& x, const PyramidWeights<T>& w);

/// Fills every weight and bias with uniform values in [-0.5, 0.5).
template <typename T>
void randomize(PyramidWeights<T>& w, std::uint64_t seed);
template <typename T>
void randomize(std::vector<T>& values, std::uint64_t seed);

/// Binary weight file: "DFFW", uint32 version (1), uint32 tensor count, then
/// per tensor uint32 rank, rank uint32 dims and the little-endian float32
/// values. Pyramid tensors are stored SRD0..2 (conv_a w/b, conv_b w/b,
/// attention w/b) then EFD0..1 (w/b).
void save_weights(const PyramidWeights<float>& w, const std::filesystem::path& path);
PyramidWeights<float> load_weights(const std::filesystem::path& path, int base_channels);

}  // namespace dff::nn
