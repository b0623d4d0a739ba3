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

// Training losses. Every loss comes with an analytic gradient; natural
// logarithms throughout.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "novelty/tensor.hpp"

namespace novelty {

inline constexpr double kProbEpsilon = 1e-7;

/// Weights of the combined generator objective.
struct LossWeights {
  double adv = 1.0;
  double con = 40.0;
  double fea = 1.0;
  double inf = 1.0;

  void validate() const {
    for (double w : {adv, con, fea, inf}) {
      if (!std::isfinite(w) || w < 0) throw ConfigError("loss weights must be finite and non-negative");
    }
    if (adv + con + fea + inf <= 0) throw ConfigError("at least one loss weight must be positive");
  }
};

/// Component losses of one batch.
struct LossReport {
  double adv = 0;  // generator-side adversarial term, -log D(G(x))
  double con = 0;
  double fea = 0;
  double inf = 0;
  double total = 0;
  double d_loss = 0;
};

template <typename T>
T clamp_prob(T p) {
  return std::clamp(p, T(kProbEpsilon), T(1) - T(kProbEpsilon));
}

template <typename T>
struct AdversarialLosses {
  T d_loss = 0;  // -mean[log D(x) + log(1 - D(G(x)))]
  T g_loss = 0;  // -mean[log D(G(x))]
  T minimax = 0;  // mean[log D(x)] + mean[log(1 - D(G(x)))], the value the discriminator maximizes
  std::vector<T> d_grad_real;  // dd_loss / dprob_real
  std::vector<T> d_grad_fake;  // dd_loss / dprob_fake
  std::vector<T> g_grad_fake;  // dg_loss / dprob_fake
};

/// Discriminator and (non-saturating) generator adversarial losses.
/// Probabilities are clamped to [eps, 1 - eps]; gradients are evaluated at the clamped value.
template <typename T>
AdversarialLosses<T> adversarial_losses(std::span<const T> prob_real, std::span<const T> prob_fake) {
  AdversarialLosses<T> out;
  const std::size_t nr = prob_real.size(), nf = prob_fake.size();
  out.d_grad_real.resize(nr);
  out.d_grad_fake.resize(nf);
  out.g_grad_fake.resize(nf);
  T real_term = 0, fake_term = 0, g_term = 0;
  for (std::size_t i = 0; i < nr; ++i) {
    const T p = clamp_prob(prob_real[i]);
    real_term += std::log(p);
    out.d_grad_real[i] = -T(1) / (p * T(nr));
  }
  for (std::size_t i = 0; i < nf; ++i) {
    const T p = clamp_prob(prob_fake[i]);
    fake_term += std::log(T(1) - p);
    g_term += std::log(p);
    out.d_grad_fake[i] = T(1) / ((T(1) - p) * T(nf));
    out.g_grad_fake[i] = -T(1) / (p * T(nf));
  }
  const T mean_real = nr ? real_term / T(nr) : T(0);
  const T mean_fake = nf ? fake_term / T(nf) : T(0);
  out.minimax = mean_real + mean_fake;
  out.d_loss = -out.minimax;
  out.g_loss = nf ? -g_term / T(nf) : T(0);
  return out;
}

/// Mean absolute error over all elements.
template <typename T>
T context_loss(const Tensor<T>& x, const Tensor<T>& x_hat) {
  require_same_shape(x.shape(), x_hat.shape(), "context loss");
  T s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - x_hat[i]);
  return x.empty() ? T(0) : s / T(x.size());
}

/// d context_loss / d x_hat (subgradient 0 where x == x_hat).
template <typename T>
Tensor<T> context_loss_grad(const Tensor<T>& x, const Tensor<T>& x_hat) {
  require_same_shape(x.shape(), x_hat.shape(), "context loss");
  Tensor<T> g(x.shape());
  const T inv = T(1) / T(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T d = x_hat[i] - x[i];
    g[i] = d > 0 ? inv : (d < 0 ? -inv : T(0));
  }
  return g;
}

/// Per-sample mean absolute error.
template <typename T>
std::vector<T> context_loss_per_sample(const Tensor<T>& x, const Tensor<T>& x_hat) {
  require_same_shape(x.shape(), x_hat.shape(), "context loss");
  const std::size_t per = x.shape().per_sample();
  std::vector<T> out(x.n());
  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* a = x.sample(n);
    const T* b = x_hat.sample(n);
    T s = 0;
    for (std::size_t i = 0; i < per; ++i) s += std::abs(a[i] - b[i]);
    out[n] = s / T(per);
  }
  return out;
}

/// Mean over samples of ||f_x - f_xhat||^2 / F_dim.
template <typename T>
T feature_loss(const Tensor<T>& f_x, const Tensor<T>& f_xhat) {
  require_same_shape(f_x.shape(), f_xhat.shape(), "feature loss");
  T s = 0;
  for (std::size_t i = 0; i < f_x.size(); ++i) {
    const T d = f_x[i] - f_xhat[i];
    s += d * d;
  }
  return f_x.empty() ? T(0) : s / T(f_x.size());
}

/// d feature_loss / d f_xhat.
template <typename T>
Tensor<T> feature_loss_grad(const Tensor<T>& f_x, const Tensor<T>& f_xhat) {
  require_same_shape(f_x.shape(), f_xhat.shape(), "feature loss");
  Tensor<T> g(f_x.shape());
  const T scale = T(2) / T(f_x.size());
  for (std::size_t i = 0; i < f_x.size(); ++i) g[i] = scale * (f_xhat[i] - f_x[i]);
  return g;
}

template <typename T>
std::vector<T> feature_loss_per_sample(const Tensor<T>& f_x, const Tensor<T>& f_xhat) {
  require_same_shape(f_x.shape(), f_xhat.shape(), "feature loss");
  const std::size_t per = f_x.shape().per_sample();
  std::vector<T> out(f_x.n());
  for (std::size_t n = 0; n < f_x.n(); ++n) {
    const T* a = f_x.sample(n);
    const T* b = f_xhat.sample(n);
    T s = 0;
    for (std::size_t i = 0; i < per; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    out[n] = s / T(per);
  }
  return out;
}

namespace detail {

// Softmax of one row, shifted by its max.
template <typename T>
void softmax_row(const T* z, std::size_t t, T* p) {
  T mx = z[0];
  for (std::size_t i = 1; i < t; ++i) mx = std::max(mx, z[i]);
  T s = 0;
  for (std::size_t i = 0; i < t; ++i) {
    p[i] = std::exp(z[i] - mx);
    s += p[i];
  }
  for (std::size_t i = 0; i < t; ++i) p[i] /= s;
}

template <typename T>
T entropy_row(const T* p, std::size_t t) {
  T e = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (p[i] > T(0)) e -= p[i] * std::log(p[i]);
  }
  return e;
}

}  // namespace detail

/// Per-sample Shannon entropy of softmax(h); h is [B, t, ...].
template <typename T>
std::vector<T> entropy_per_sample(const Tensor<T>& h) {
  const std::size_t t = h.shape().per_sample();
  std::vector<T> p(t), out(h.n());
  for (std::size_t n = 0; n < h.n(); ++n) {
    detail::softmax_row(h.sample(n), t, p.data());
    out[n] = detail::entropy_row(p.data(), t);
  }
  return out;
}

/// Batch mean of the latent entropy, in [0, ln t].
template <typename T>
T entropy_loss(const Tensor<T>& h) {
  if (h.shape().per_sample() < 2) throw ShapeError("entropy loss needs a latent width of at least 2");
  const auto e = entropy_per_sample(h);
  T s = 0;
  for (T v : e) s += v;
  return h.n() ? s / T(h.n()) : T(0);
}

/// d entropy_loss / d h. For one sample dH/dz_j = -p_j (log p_j + H).
template <typename T>
Tensor<T> entropy_loss_grad(const Tensor<T>& h) {
  const std::size_t t = h.shape().per_sample();
  Tensor<T> g(h.shape());
  std::vector<T> p(t);
  const T inv_b = T(1) / T(h.n());
  for (std::size_t n = 0; n < h.n(); ++n) {
    detail::softmax_row(h.sample(n), t, p.data());
    const T ent = detail::entropy_row(p.data(), t);
    T* gs = g.sample(n);
    for (std::size_t j = 0; j < t; ++j) {
      gs[j] = p[j] > T(0) ? -p[j] * (std::log(p[j]) + ent) * inv_b : T(0);
    }
  }
  return g;
}

/// Weighted sum adv*L_adv + con*L_con + fea*L_fea + inf*L_inf.
inline double total_generator_loss(double adv, double con, double fea, double inf,
                                   const LossWeights& w) {
  return w.adv * adv + w.con * con + w.fea * fea + w.inf * inf;
}

inline double total_generator_loss(const LossReport& parts, const LossWeights& w) {
  return total_generator_loss(parts.adv, parts.con, parts.fea, parts.inf, w);
}

}  // namespace novelty
