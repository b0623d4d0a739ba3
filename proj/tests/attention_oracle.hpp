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

// Straight-line reference for channel attention written with plain loops,
// shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <vector>

#include "novelty/attention.hpp"

namespace novelty::testing {

inline std::vector<double> oracle_dense(const DenseParams<double>& d, const std::vector<double>& x,
                                        bool relu) {
  std::vector<double> y(d.out_features());
  for (std::size_t o = 0; o < y.size(); ++o) {
    double s = d.bias[o];
    for (std::size_t i = 0; i < x.size(); ++i) s += d.weight[o * x.size() + i] * x[i];
    y[o] = relu && s < 0 ? 0.0 : s;
  }
  return y;
}

inline Tensor<double> attention_oracle(const AttentionParams<double>& p, const Tensor<double>& f) {
  Tensor<double> out(f.shape());
  const std::size_t C = f.c(), P = f.h() * f.w();
  for (std::size_t n = 0; n < f.n(); ++n) {
    // 1. global pooling
    std::vector<double> avg(C, 0.0), mx(C, -INFINITY);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < P; ++i) {
        const double v = f.sample(n)[c * P + i];
        avg[c] += v / double(P);
        if (v > mx[c]) mx[c] = v;
      }
    }
    // 2. shared MLP on both descriptors
    auto mlp = [&](const std::vector<double>& v) {
      return oracle_dense(p.fc3, oracle_dense(p.fc2, oracle_dense(p.fc1, v, true), true), false);
    };
    const auto a = mlp(avg);
    const auto b = mlp(mx);
    // 3. add, sigmoid, broadcast multiply
    for (std::size_t c = 0; c < C; ++c) {
      const double gate = 1.0 / (1.0 + std::exp(-(a[c] + b[c])));
      for (std::size_t i = 0; i < P; ++i) out.sample(n)[c * P + i] = gate * f.sample(n)[c * P + i];
    }
  }
  return out;
}

}  // namespace novelty::testing
