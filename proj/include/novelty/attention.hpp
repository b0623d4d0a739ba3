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

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "novelty/layers.hpp"

namespace novelty {

/// Channel attention: the global average- and max-pooled channel
/// descriptors go through one shared MLP (C -> C/R -> C/R -> C, ReLU between
/// layers), the two outputs are summed and squashed by a sigmoid into one
/// gate per channel, and the feature map is scaled channel-wise by the gates.
template <typename T>
struct AttentionParams {
  DenseParams<T> fc1;  // C -> C/R
  DenseParams<T> fc2;  // C/R -> C/R
  DenseParams<T> fc3;  // C/R -> C
  std::size_t reduction = 16;

  std::size_t channels() const { return fc1.in_features(); }
  std::size_t hidden() const { return fc1.out_features(); }

  void collect(const std::string& prefix, TensorList<T>& out) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
    fc3.collect(prefix + ".fc3", out);
  }
};

/// Zero-initialized attention parameters; throws ConfigError when R does not divide C.
template <typename T>
AttentionParams<T> make_attention(std::size_t channels, std::size_t reduction) {
  if (reduction == 0 || channels % reduction != 0) {
    throw ConfigError("attention reduction ratio " + std::to_string(reduction) +
                      " does not divide channel count " + std::to_string(channels));
  }
  const std::size_t hidden = channels / reduction;
  return {make_dense<T>(channels, hidden), make_dense<T>(hidden, hidden),
          make_dense<T>(hidden, channels), reduction};
}

template <typename T>
struct AttentionBranchCache {
  RowMatrix<T> in;  // pooled descriptor [N, C]
  RowMatrix<T> a1;  // relu(fc1(in))
  RowMatrix<T> a2;  // relu(fc2(a1))
};

template <typename T>
struct AttentionCache {
  Tensor<T> input;
  RowMatrix<T> gates;  // [N, C], each in (0, 1)
  std::vector<std::size_t> argmax;
  AttentionBranchCache<T> avg;
  AttentionBranchCache<T> max;
};

namespace detail {

template <typename T>
RowMatrix<T> attention_mlp(const AttentionParams<T>& p, const RowMatrix<T>& in,
                           AttentionBranchCache<T>* cache) {
  RowMatrix<T> a1 = dense_forward(p.fc1, in).cwiseMax(T(0));
  RowMatrix<T> a2 = dense_forward(p.fc2, a1).cwiseMax(T(0));
  RowMatrix<T> out = dense_forward(p.fc3, a2);
  if (cache) {
    cache->in = in;
    cache->a1 = std::move(a1);
    cache->a2 = std::move(a2);
  }
  return out;
}

template <typename T>
RowMatrix<T> attention_mlp_backward(const AttentionParams<T>& p, const AttentionBranchCache<T>& c,
                                    const RowMatrix<T>& dout, AttentionParams<T>* grads) {
  RowMatrix<T> da2 = dense_backward(p.fc3, c.a2, dout, grads ? &grads->fc3 : nullptr);
  da2 = (c.a2.array() > T(0)).select(da2, T(0));
  RowMatrix<T> da1 = dense_backward(p.fc2, c.a1, da2, grads ? &grads->fc2 : nullptr);
  da1 = (c.a1.array() > T(0)).select(da1, T(0));
  return dense_backward(p.fc1, c.in, da1, grads ? &grads->fc1 : nullptr);
}

}  // namespace detail

/// Per-sample, per-channel gates M_C = sigmoid(MLP(avg) + MLP(max)), shape [N, C].
template <typename T>
RowMatrix<T> attention_gates(const AttentionParams<T>& p, const Tensor<T>& f,
                             AttentionCache<T>* cache = nullptr) {
  const std::size_t N = f.n(), C = f.c(), P = f.h() * f.w();
  if (C != p.channels()) {
    throw ShapeError("channel attention: feature map has " + std::to_string(C) +
                     " channels, MLP expects " + std::to_string(p.channels()));
  }
  RowMatrix<T> avg(N, C), mx(N, C);
  std::vector<std::size_t> argmax(N * C);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = f.data() + (n * C + c) * P;
      T s = 0;
      std::size_t best = 0;
      for (std::size_t i = 0; i < P; ++i) {
        s += src[i];
        if (src[i] > src[best]) best = i;
      }
      avg(n, c) = s / T(P);
      mx(n, c) = src[best];
      argmax[n * C + c] = best;
    }
  }
  RowMatrix<T> z = detail::attention_mlp(p, avg, cache ? &cache->avg : nullptr) +
                   detail::attention_mlp(p, mx, cache ? &cache->max : nullptr);
  // kept strictly inside (0, 1) even where the sigmoid rounds to 0 or 1
  constexpr T lo = std::numeric_limits<T>::epsilon();
  RowMatrix<T> gates = z.unaryExpr([lo](T v) { return std::clamp(sigmoid(v), lo, T(1) - lo); });
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->gates = gates;
  }
  return gates;
}

/// Refined feature map F' = M_C (broadcast over H, W) * F.
template <typename T>
Tensor<T> channel_attention(const AttentionParams<T>& p, const Tensor<T>& f,
                            AttentionCache<T>* cache = nullptr) {
  RowMatrix<T> gates = attention_gates(p, f, cache);
  const std::size_t N = f.n(), C = f.c(), P = f.h() * f.w();
  Tensor<T> out(f.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T g = gates(n, c);
      const T* src = f.data() + (n * C + c) * P;
      T* dst = out.data() + (n * C + c) * P;
      for (std::size_t i = 0; i < P; ++i) dst[i] = g * src[i];
    }
  }
  if (cache) cache->input = f;
  return out;
}

template <typename T>
Tensor<T> channel_attention_backward(const AttentionParams<T>& p, const AttentionCache<T>& cache,
                                     const Tensor<T>& dy, AttentionParams<T>* grads) {
  const Tensor<T>& f = cache.input;
  const std::size_t N = f.n(), C = f.c(), P = f.h() * f.w();
  Tensor<T> df(f.shape());
  RowMatrix<T> dz(N, C);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T g = cache.gates(n, c);
      const T* src = f.data() + (n * C + c) * P;
      const T* gy = dy.data() + (n * C + c) * P;
      T* d = df.data() + (n * C + c) * P;
      T dgate = 0;
      for (std::size_t i = 0; i < P; ++i) {
        d[i] = g * gy[i];
        dgate += gy[i] * src[i];
      }
      dz(n, c) = dgate * g * (T(1) - g);
    }
  }
  const RowMatrix<T> davg = detail::attention_mlp_backward(p, cache.avg, dz, grads);
  const RowMatrix<T> dmax = detail::attention_mlp_backward(p, cache.max, dz, grads);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      T* d = df.data() + (n * C + c) * P;
      const T share = davg(n, c) / T(P);
      for (std::size_t i = 0; i < P; ++i) d[i] += share;
      d[cache.argmax[n * C + c]] += dmax(n, c);
    }
  }
  return df;
}

}  // namespace novelty
