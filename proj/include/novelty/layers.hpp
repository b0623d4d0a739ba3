// Copyright 2026 The Novelty Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable building blocks: convolution, transposed convolution,
// batch normalization, dense layers and pointwise activations.
//
// Parameters are plain value types. Forward functions take them by const
// reference and optionally record what the backward pass needs into a
// caller-owned cache, so a forward pass never mutates shared state.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "novelty/tensor.hpp"

namespace novelty {

enum class Mode { train, eval };

/// Non-owning handle to one named parameter or buffer tensor.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T>* tensor;
  bool trainable;
};

template <typename T>
using TensorList = std::vector<NamedTensor<T>>;

/// Same layout as `p`, every tensor zeroed; used for gradients and optimizer moments.
template <typename Params>
Params zeros_like(const Params& p) {
  Params z = p;
  for (auto& nt : z.tensors()) nt.tensor->fill(0);
  return z;
}


namespace detail {

// col[(c*k + ki)*k + kj][(n*gh + y)*gw + x] = src[n][c][y*s - p + ki][x*s - p + kj]
// with zero padding. (gh, gw) is the grid the kernel is slid over.
template <typename T>
void im2col(const Tensor<T>& src, std::size_t k, std::size_t s, std::size_t p, std::size_t gh,
            std::size_t gw, T* col) {
  const std::size_t N = src.n(), C = src.c(), H = src.h(), W = src.w();
  const std::size_t cols = N * gh * gw;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t n = 0; n < N; ++n) {
          const T* plane = src.data() + (n * C + c) * H * W;
          for (std::size_t y = 0; y < gh; ++y) {
            const long iy = static_cast<long>(y * s + ki) - static_cast<long>(p);
            T* out = row + (n * gh + y) * gw;
            if (iy < 0 || iy >= static_cast<long>(H)) {
              std::fill_n(out, gw, T(0));
              continue;
            }
            const T* line = plane + static_cast<std::size_t>(iy) * W;
            for (std::size_t x = 0; x < gw; ++x) {
              const long ix = static_cast<long>(x * s + kj) - static_cast<long>(p);
              out[x] = (ix < 0 || ix >= static_cast<long>(W)) ? T(0) : line[ix];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col entries back into dst.
template <typename T>
void col2im(const T* col, std::size_t k, std::size_t s, std::size_t p, std::size_t gh,
            std::size_t gw, Tensor<T>& dst) {
  const std::size_t N = dst.n(), C = dst.c(), H = dst.h(), W = dst.w();
  const std::size_t cols = N * gh * gw;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t n = 0; n < N; ++n) {
          T* plane = dst.data() + (n * C + c) * H * W;
          for (std::size_t y = 0; y < gh; ++y) {
            const long iy = static_cast<long>(y * s + ki) - static_cast<long>(p);
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            const T* in = row + (n * gh + y) * gw;
            T* line = plane + static_cast<std::size_t>(iy) * W;
            for (std::size_t x = 0; x < gw; ++x) {
              const long ix = static_cast<long>(x * s + kj) - static_cast<long>(p);
              if (ix >= 0 && ix < static_cast<long>(W)) line[ix] += in[x];
            }
          }
        }
      }
    }
  }
}

// [N, C, H, W] -> matrix [C, N*H*W]
template <typename T>
RowMatrix<T> channels_major(const Tensor<T>& x) {
  const std::size_t N = x.n(), C = x.c(), P = x.h() * x.w();
  RowMatrix<T> m(C, N * P);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      std::copy_n(x.data() + (n * C + c) * P, P, m.data() + c * N * P + n * P);
    }
  }
  return m;
}

// matrix [C, N*P] -> [N, C, H, W] with P = H*W
template <typename T>
void from_channels_major(const RowMatrix<T>& m, Tensor<T>& x) {
  const std::size_t N = x.n(), C = x.c(), P = x.h() * x.w();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      std::copy_n(m.data() + c * N * P + n * P, P, x.data() + (n * C + c) * P);
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution

/// 2-D convolution with square kernels. weight is [out, in, k, k].
template <typename T>
struct ConvParams {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_channels() const { return weight.n(); }
  std::size_t in_channels() const { return weight.c(); }
  std::size_t kernel() const { return weight.h(); }

  std::size_t out_size(std::size_t in) const { return (in + 2 * pad - kernel()) / stride + 1; }

  void collect(const std::string& prefix, TensorList<T>& out) {
    out.push_back({prefix + ".weight", &weight, true});
    out.push_back({prefix + ".bias", &bias, true});
  }
};

template <typename T>
ConvParams<T> make_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                        std::size_t pad) {
  return {Tensor<T>(out, in, k, k), Tensor<T>(out, 1), stride, pad};
}

template <typename T>
struct ConvCache {
  Shape input;
  RowMatrix<T> col;
};

template <typename T>
Tensor<T> conv_forward(const ConvParams<T>& p, const Tensor<T>& x, ConvCache<T>* cache = nullptr) {
  if (x.c() != p.in_channels()) {
    throw ShapeError("conv: input has " + std::to_string(x.c()) + " channels, expected " +
                     std::to_string(p.in_channels()));
  }
  const std::size_t k = p.kernel();
  if (x.h() + 2 * p.pad < k || x.w() + 2 * p.pad < k) {
    throw ShapeError("conv: input " + to_string(x.shape()) + " smaller than kernel");
  }
  const std::size_t oh = p.out_size(x.h()), ow = p.out_size(x.w());
  RowMatrix<T> col(x.c() * k * k, x.n() * oh * ow);
  detail::im2col(x, k, p.stride, p.pad, oh, ow, col.data());

  ConstMatrixMap<T> wm(p.weight.data(), p.out_channels(), x.c() * k * k);
  RowMatrix<T> ym = wm * col;
  for (std::size_t co = 0; co < p.out_channels(); ++co) ym.row(co).array() += p.bias[co];

  Tensor<T> y(x.n(), p.out_channels(), oh, ow);
  detail::from_channels_major(ym, y);
  if (cache) {
    cache->input = x.shape();
    cache->col = std::move(col);
  }
  return y;
}

/// Returns dL/dx (empty when `want_input_grad` is false) and accumulates
/// parameter gradients into `grads` when it is non-null.
template <typename T>
Tensor<T> conv_backward(const ConvParams<T>& p, const ConvCache<T>& cache, const Tensor<T>& dy,
                        ConvParams<T>* grads, bool want_input_grad = true) {
  const std::size_t k = p.kernel();
  const RowMatrix<T> dym = detail::channels_major(dy);
  if (grads) {
    MatrixMap<T> gw(grads->weight.data(), p.out_channels(), p.in_channels() * k * k);
    gw.noalias() += dym * cache.col.transpose();
    for (std::size_t co = 0; co < p.out_channels(); ++co) grads->bias[co] += dym.row(co).sum();
  }
  if (!want_input_grad) return {};
  ConstMatrixMap<T> wm(p.weight.data(), p.out_channels(), p.in_channels() * k * k);
  RowMatrix<T> dcol = wm.transpose() * dym;
  Tensor<T> dx(cache.input);
  detail::col2im(dcol.data(), k, p.stride, p.pad, dy.h(), dy.w(), dx);
  return dx;
}

// ---------------------------------------------------------------------------
// Transposed convolution

/// Transposed 2-D convolution. weight is [in, out, k, k].
template <typename T>
struct DeconvParams {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t in_channels() const { return weight.n(); }
  std::size_t out_channels() const { return weight.c(); }
  std::size_t kernel() const { return weight.h(); }

  std::size_t out_size(std::size_t in) const { return (in - 1) * stride + kernel() - 2 * pad; }

  void collect(const std::string& prefix, TensorList<T>& out) {
    out.push_back({prefix + ".weight", &weight, true});
    out.push_back({prefix + ".bias", &bias, true});
  }
};

template <typename T>
DeconvParams<T> make_deconv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                            std::size_t pad) {
  return {Tensor<T>(in, out, k, k), Tensor<T>(out, 1), stride, pad};
}

template <typename T>
struct DeconvCache {
  Shape input;
  RowMatrix<T> input_cm;  // [in, N*H*W]
};

template <typename T>
Tensor<T> deconv_forward(const DeconvParams<T>& p, const Tensor<T>& x,
                         DeconvCache<T>* cache = nullptr) {
  if (x.c() != p.in_channels()) {
    throw ShapeError("deconv: input has " + std::to_string(x.c()) + " channels, expected " +
                     std::to_string(p.in_channels()));
  }
  const std::size_t k = p.kernel();
  const std::size_t oh = p.out_size(x.h()), ow = p.out_size(x.w());
  RowMatrix<T> xm = detail::channels_major(x);
  ConstMatrixMap<T> wm(p.weight.data(), p.in_channels(), p.out_channels() * k * k);
  RowMatrix<T> col = wm.transpose() * xm;

  Tensor<T> y(x.n(), p.out_channels(), oh, ow);
  detail::col2im(col.data(), k, p.stride, p.pad, x.h(), x.w(), y);
  const std::size_t plane = oh * ow;
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t co = 0; co < p.out_channels(); ++co) {
      T* dst = y.data() + (n * p.out_channels() + co) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += p.bias[co];
    }
  }
  if (cache) {
    cache->input = x.shape();
    cache->input_cm = std::move(xm);
  }
  return y;
}

template <typename T>
Tensor<T> deconv_backward(const DeconvParams<T>& p, const DeconvCache<T>& cache,
                          const Tensor<T>& dy, DeconvParams<T>* grads,
                          bool want_input_grad = true) {
  const std::size_t k = p.kernel();
  const std::size_t gh = cache.input.h, gw = cache.input.w;
  RowMatrix<T> dcol(p.out_channels() * k * k, cache.input.n * gh * gw);
  detail::im2col(dy, k, p.stride, p.pad, gh, gw, dcol.data());
  if (grads) {
    MatrixMap<T> gwm(grads->weight.data(), p.in_channels(), p.out_channels() * k * k);
    gwm.noalias() += cache.input_cm * dcol.transpose();
    const std::size_t plane = dy.h() * dy.w();
    for (std::size_t n = 0; n < dy.n(); ++n) {
      for (std::size_t co = 0; co < p.out_channels(); ++co) {
        const T* src = dy.data() + (n * dy.c() + co) * plane;
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += src[i];
        grads->bias[co] += acc;
      }
    }
  }
  if (!want_input_grad) return {};
  ConstMatrixMap<T> wm(p.weight.data(), p.in_channels(), p.out_channels() * k * k);
  RowMatrix<T> dxm = wm * dcol;
  Tensor<T> dx(cache.input);
  detail::from_channels_major(dxm, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T eps = T(1e-5);
  T momentum = T(0.1);

  std::size_t channels() const { return gamma.size(); }

  void collect(const std::string& prefix, TensorList<T>& out) {
    out.push_back({prefix + ".gamma", &gamma, true});
    out.push_back({prefix + ".beta", &beta, true});
    out.push_back({prefix + ".running_mean", &running_mean, false});
    out.push_back({prefix + ".running_var", &running_var, false});
  }
};

template <typename T>
BatchNormParams<T> make_batchnorm(std::size_t channels, T eps = T(1e-5), T momentum = T(0.1)) {
  return {Tensor<T>(channels, 1, 1, 1, T(1)), Tensor<T>(channels, 1), Tensor<T>(channels, 1),
          Tensor<T>(channels, 1, 1, 1, T(1)), eps, momentum};
}

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::eval;
  Tensor<T> xhat;
  std::vector<T> inv_std;
  std::vector<T> batch_mean;
  std::vector<T> batch_var;  // biased
  std::size_t count = 0;     // elements per channel
};

template <typename T>
Tensor<T> batchnorm_forward(const BatchNormParams<T>& p, const Tensor<T>& x, Mode mode,
                            BatchNormCache<T>* cache = nullptr) {
  const std::size_t N = x.n(), C = x.c(), P = x.h() * x.w();
  if (C != p.channels()) {
    throw ShapeError("batchnorm: input has " + std::to_string(C) + " channels, expected " +
                     std::to_string(p.channels()));
  }
  const std::size_t M = N * P;
  std::vector<T> mean(C), var(C), inv_std(C);
  if (mode == Mode::train) {
    for (std::size_t c = 0; c < C; ++c) {
      // two-pass for numerical stability
      T s = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* src = x.data() + (n * C + c) * P;
        for (std::size_t i = 0; i < P; ++i) s += src[i];
      }
      mean[c] = s / T(M);
      T v = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* src = x.data() + (n * C + c) * P;
        for (std::size_t i = 0; i < P; ++i) v += (src[i] - mean[c]) * (src[i] - mean[c]);
      }
      var[c] = v / T(M);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = p.running_mean[c];
      var[c] = p.running_var[c];
    }
  }
  for (std::size_t c = 0; c < C; ++c) inv_std[c] = T(1) / std::sqrt(var[c] + p.eps);

  Tensor<T> y(x.shape());
  Tensor<T> xhat(cache ? x.shape() : Shape{});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = x.data() + (n * C + c) * P;
      T* dst = y.data() + (n * C + c) * P;
      T* xh = cache ? xhat.data() + (n * C + c) * P : nullptr;
      for (std::size_t i = 0; i < P; ++i) {
        const T v = (src[i] - mean[c]) * inv_std[c];
        if (xh) xh[i] = v;
        dst[i] = p.gamma[c] * v + p.beta[c];
      }
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
    cache->count = M;
  }
  return y;
}

/// Folds the batch statistics recorded by a train-mode forward into the
/// running estimates (unbiased variance, exponential moving average).
template <typename T>
void batchnorm_update_running(BatchNormParams<T>& p, const BatchNormCache<T>& cache) {
  if (cache.mode != Mode::train) return;
  const T unbias = cache.count > 1 ? T(cache.count) / T(cache.count - 1) : T(1);
  for (std::size_t c = 0; c < p.channels(); ++c) {
    p.running_mean[c] = (T(1) - p.momentum) * p.running_mean[c] + p.momentum * cache.batch_mean[c];
    p.running_var[c] =
        (T(1) - p.momentum) * p.running_var[c] + p.momentum * cache.batch_var[c] * unbias;
  }
}

template <typename T>
Tensor<T> batchnorm_backward(const BatchNormParams<T>& p, const BatchNormCache<T>& cache,
                             const Tensor<T>& dy, BatchNormParams<T>* grads) {
  const std::size_t N = dy.n(), C = dy.c(), P = dy.h() * dy.w();
  Tensor<T> dx(dy.shape());
  for (std::size_t c = 0; c < C; ++c) {
    T sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t n = 0; n < N; ++n) {
      const T* g = dy.data() + (n * C + c) * P;
      const T* xh = cache.xhat.data() + (n * C + c) * P;
      for (std::size_t i = 0; i < P; ++i) {
        sum_dy += g[i];
        sum_dy_xhat += g[i] * xh[i];
      }
    }
    if (grads) {
      grads->gamma[c] += sum_dy_xhat;
      grads->beta[c] += sum_dy;
    }
    const T scale = p.gamma[c] * cache.inv_std[c];
    const T m = T(cache.count);
    for (std::size_t n = 0; n < N; ++n) {
      const T* g = dy.data() + (n * C + c) * P;
      const T* xh = cache.xhat.data() + (n * C + c) * P;
      T* d = dx.data() + (n * C + c) * P;
      if (cache.mode == Mode::train) {
        for (std::size_t i = 0; i < P; ++i) {
          d[i] = scale * (g[i] - sum_dy / m - xh[i] * sum_dy_xhat / m);
        }
      } else {
        for (std::size_t i = 0; i < P; ++i) d[i] = scale * g[i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Dense layer on [B, in] rows

template <typename T>
struct DenseParams {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]

  std::size_t in_features() const { return weight.c(); }
  std::size_t out_features() const { return weight.n(); }

  void collect(const std::string& prefix, TensorList<T>& out) {
    out.push_back({prefix + ".weight", &weight, true});
    out.push_back({prefix + ".bias", &bias, true});
  }
};

template <typename T>
DenseParams<T> make_dense(std::size_t in, std::size_t out) {
  return {Tensor<T>(out, in), Tensor<T>(out, 1)};
}

/// x is [B, in]; returns [B, out].
template <typename T>
RowMatrix<T> dense_forward(const DenseParams<T>& p, const RowMatrix<T>& x) {
  if (static_cast<std::size_t>(x.cols()) != p.in_features()) {
    throw ShapeError("dense: input width " + std::to_string(x.cols()) + ", expected " +
                     std::to_string(p.in_features()));
  }
  ConstMatrixMap<T> wm(p.weight.data(), p.out_features(), p.in_features());
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(p.bias.data(), p.out_features());
  RowMatrix<T> y = x * wm.transpose();
  y.rowwise() += b;
  return y;
}

template <typename T>
RowMatrix<T> dense_backward(const DenseParams<T>& p, const RowMatrix<T>& x, const RowMatrix<T>& dy,
                            DenseParams<T>* grads) {
  ConstMatrixMap<T> wm(p.weight.data(), p.out_features(), p.in_features());
  if (grads) {
    MatrixMap<T> gw(grads->weight.data(), p.out_features(), p.in_features());
    gw.noalias() += dy.transpose() * x;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grads->bias.data(), p.out_features());
    gb += dy.colwise().sum();
  }
  return dy * wm;
}

// ---------------------------------------------------------------------------
// Pointwise activations

enum class Activation { identity, relu, leaky_relu, tanh, sigmoid };

inline constexpr double kLeakySlope = 0.2;

template <typename T>
T sigmoid(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

template <typename T>
void activate_inplace(Activation a, std::span<T> x) {
  switch (a) {
    case Activation::identity:
      return;
    case Activation::relu:
      for (T& v : x) v = v > T(0) ? v : T(0);
      return;
    case Activation::leaky_relu:
      for (T& v : x) v = v > T(0) ? v : T(kLeakySlope) * v;
      return;
    case Activation::tanh:
      for (T& v : x) v = std::tanh(v);
      return;
    case Activation::sigmoid:
      for (T& v : x) v = sigmoid(v);
      return;
  }
}

/// Gradient through an activation given its output y; works in place on dy.
template <typename T>
void activate_backward_inplace(Activation a, std::span<const T> y, std::span<T> dy) {
  switch (a) {
    case Activation::identity:
      return;
    case Activation::relu:
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = y[i] > T(0) ? dy[i] : T(0);
      return;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] = y[i] > T(0) ? dy[i] : T(kLeakySlope) * dy[i];
      return;
    case Activation::tanh:
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= T(1) - y[i] * y[i];
      return;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= y[i] * (T(1) - y[i]);
      return;
  }
}

}  // namespace novelty
