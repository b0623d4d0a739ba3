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

// Finite-difference checks of whole-network and loss gradients on the toy
// architecture. Each check returns (tensor name, relative error) pairs.

#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "novelty/losses.hpp"
#include "novelty/model.hpp"
#include "test_util.hpp"

namespace novelty::testing {

using GradReport = std::vector<std::pair<std::string, double>>;

// Moves weights away from the tiny DCGAN init so every path carries signal.
template <typename Params>
void perturb(Params& p, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.4);
  for (auto& nt : p.tensors()) {
    if (!nt.trainable) {
      if (nt.name.ends_with("running_mean")) for (auto& v : nt.tensor->vec()) v = 0.1 * n(rng);
      if (nt.name.ends_with("running_var")) for (auto& v : nt.tensor->vec()) v = 1.0 + std::abs(n(rng));
      continue;
    }
    for (auto& v : nt.tensor->vec()) v += n(rng);
  }
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// L = <r1, x_hat> + <r2, h> through the toy generator.
inline GradReport check_generator_gradients(std::uint64_t seed, Mode mode, bool attention) {
  std::mt19937_64 rng(seed);
  auto g = init_params<double>(toy_arch(), seed).generator;
  perturb(g, rng);
  auto x = random_tensor<double>({3, 1, 8, 8}, rng);
  auto probe = generator_forward(g, x, mode, attention);
  auto r1 = random_tensor<double>(probe.x_hat.shape(), rng);
  auto r2 = random_tensor<double>(probe.h.shape(), rng);
  auto loss = [&] {
    auto out = generator_forward(g, x, mode, attention);
    return dot(out.x_hat, r1) + dot(out.h, r2);
  };

  GeneratorTape<double> tape;
  generator_forward(g, x, mode, attention, &tape);
  auto grads = zeros_like(g);
  generator_backward(g, tape, r1, r2, grads);

  GradReport report;
  auto params = g.tensors();
  auto analytic = grads.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    if (!attention && params[i].name.find(".attention.") != std::string::npos) continue;
    report.emplace_back(params[i].name,
                        relative_error(analytic[i].tensor->vec(), numeric_gradient(*params[i].tensor, loss)));
  }
  return report;
}

/// L = <a, prob> + <b, features> through the toy discriminator, including dL/dx.
inline GradReport check_discriminator_gradients(std::uint64_t seed, Mode mode) {
  std::mt19937_64 rng(seed);
  auto d = init_params<double>(toy_arch(), seed).discriminator;
  perturb(d, rng);
  auto x = random_tensor<double>({3, 1, 8, 8}, rng);
  auto probe = discriminator_forward(d, x, mode);
  auto a = random_tensor<double>({probe.prob.size(), 1}, rng);
  auto b = random_tensor<double>(probe.features.shape(), rng);
  auto loss = [&] {
    auto out = discriminator_forward(d, x, mode);
    double s = dot(out.features, b);
    for (std::size_t i = 0; i < out.prob.size(); ++i) s += a[i] * out.prob[i];
    return s;
  };

  DiscriminatorTape<double> tape;
  discriminator_forward(d, x, mode, &tape);
  auto grads = zeros_like(d);
  auto dx = discriminator_backward(d, tape, std::span<const double>(a.vec()), b, &grads, true);

  GradReport report;
  report.emplace_back("input", relative_error(dx.vec(), numeric_gradient(x, loss)));
  auto params = d.tensors();
  auto analytic = grads.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable) continue;
    report.emplace_back(params[i].name,
                        relative_error(analytic[i].tensor->vec(), numeric_gradient(*params[i].tensor, loss)));
  }
  return report;
}

/// Each training loss against finite differences of its own inputs.
inline GradReport check_loss_gradients(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GradReport report;

  auto x = random_tensor<double>({2, 2, 3, 3}, rng);
  auto xh = random_tensor<double>({2, 2, 3, 3}, rng);
  report.emplace_back("context", relative_error(context_loss_grad(x, xh).vec(),
                                                numeric_gradient(xh, [&] { return context_loss(x, xh); })));

  auto fx = random_tensor<double>({3, 5}, rng);
  auto fxh = random_tensor<double>({3, 5}, rng);
  report.emplace_back("feature", relative_error(feature_loss_grad(fx, fxh).vec(),
                                                numeric_gradient(fxh, [&] { return feature_loss(fx, fxh); })));

  auto h = random_tensor<double>({3, 7}, rng, -3, 3);
  report.emplace_back("entropy", relative_error(entropy_loss_grad(h).vec(),
                                                numeric_gradient(h, [&] { return entropy_loss(h); })));

  auto pr = random_tensor<double>({4, 1}, rng, 0.05, 0.95);
  auto pf = random_tensor<double>({4, 1}, rng, 0.05, 0.95);
  auto adv = [&] { return adversarial_losses<double>(pr.vec(), pf.vec()); };
  const auto a = adv();
  report.emplace_back("adversarial_d_real",
                      relative_error(a.d_grad_real, numeric_gradient(pr, [&] { return adv().d_loss; })));
  report.emplace_back("adversarial_d_fake",
                      relative_error(a.d_grad_fake, numeric_gradient(pf, [&] { return adv().d_loss; })));
  report.emplace_back("adversarial_g_fake",
                      relative_error(a.g_grad_fake, numeric_gradient(pf, [&] { return adv().g_loss; })));
  return report;
}

}  // namespace novelty::testing
