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

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "novelty/layers.hpp"

namespace novelty {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. `Params` is any type exposing `tensors()`;
/// the moments share its layout. Non-trainable tensors (BN running
/// statistics) are skipped.
template <typename Params>
struct Adam {
  AdamConfig config;
  Params m;
  Params v;
  std::uint64_t step_count = 0;

  Adam() = default;
  Adam(const Params& like, AdamConfig cfg) : config(cfg), m(zeros_like(like)), v(zeros_like(like)) {}

  void step(Params& params, Params& grads) {
    ++step_count;
    auto p = params.tensors();
    auto g = grads.tensors();
    auto mm = m.tensors();
    auto vv = v.tensors();
    const double b1 = config.beta1, b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!p[k].trainable) continue;
      auto& pt = *p[k].tensor;
      auto& gt = *g[k].tensor;
      auto& mt = *mm[k].tensor;
      auto& vt = *vv[k].tensor;
      using T = typename std::remove_reference_t<decltype(pt)>::value_type;
      for (std::size_t i = 0; i < pt.size(); ++i) {
        const double gi = gt[i];
        const double mi = b1 * mt[i] + (1.0 - b1) * gi;
        const double vi = b2 * vt[i] + (1.0 - b2) * gi * gi;
        mt[i] = static_cast<T>(mi);
        vt[i] = static_cast<T>(vi);
        const double mhat = mi / c1, vhat = vi / c2;
        pt[i] = static_cast<T>(pt[i] - config.learning_rate * mhat / (std::sqrt(vhat) + config.eps));
      }
    }
  }
};

/// Rescales all trainable gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename Params>
double clip_grad_norm(Params& grads, double max_norm) {
  double sq = 0;
  for (auto& nt : grads.tensors()) {
    if (!nt.trainable) continue;
    for (auto v : nt.tensor->vec()) sq += static_cast<double>(v) * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& nt : grads.tensors()) {
      if (!nt.trainable) continue;
      for (auto& v : nt.tensor->vec()) v = static_cast<std::remove_reference_t<decltype(v)>>(v * s);
    }
  }
  return norm;
}

template <typename Params>
void zero_grads(Params& grads) {
  for (auto& nt : grads.tensors()) nt.tensor->fill(0);
}

}  // namespace novelty
