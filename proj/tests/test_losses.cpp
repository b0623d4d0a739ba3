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

#include "novelty/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "test_util.hpp"

namespace novelty {
namespace {

using testing::random_tensor;

// Scalar-loop references, written independently of the library code.
double oracle_d_loss(const std::vector<double>& r, const std::vector<double>& f) {
  double a = 0, b = 0;
  for (double p : r) a += std::log(p);
  for (double p : f) b += std::log(1 - p);
  return -(a / r.size() + b / f.size());
}

double oracle_entropy(const std::vector<double>& z) {
  double denom = 0;
  for (double v : z) denom += std::exp(v);
  double h = 0;
  for (double v : z) {
    const double p = std::exp(v) / denom;
    h -= p * std::log(p);
  }
  return h;
}

TEST(Adversarial, HalfProbabilities) {
  const std::vector<double> half{0.5, 0.5};
  auto a = adversarial_losses<double>(half, half);
  EXPECT_NEAR(a.d_loss, 2 * std::log(2.0), 1e-9);
  EXPECT_NEAR(a.g_loss, std::log(2.0), 1e-9);
  EXPECT_NEAR(a.minimax, -2 * std::log(2.0), 1e-9);
}

TEST(Adversarial, PerfectDiscriminatorAndClamping) {
  const std::vector<double> one{1.0, 1.0}, zero{0.0, 0.0};
  auto a = adversarial_losses<double>(one, zero);
  EXPECT_NEAR(a.d_loss, 0.0, 1e-6);
  EXPECT_TRUE(std::isfinite(a.g_loss));
  EXPECT_NEAR(a.g_loss, -std::log(kProbEpsilon), 1e-9);
  for (double g : a.g_grad_fake) EXPECT_TRUE(std::isfinite(g));
}

TEST(Adversarial, MatchesScalarOracle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> r(7), f(5);
    for (auto& v : r) v = u(rng);
    for (auto& v : f) v = u(rng);
    auto a = adversarial_losses<double>(r, f);
    EXPECT_NEAR(a.d_loss, oracle_d_loss(r, f), 1e-9);
    double g = 0;
    for (double p : f) g -= std::log(p);
    EXPECT_NEAR(a.g_loss, g / f.size(), 1e-9);
  }
}

TEST(Context, Examples) {
  Tensor<double> a(2, 1, 3, 3), b(2, 1, 3, 3);
  a.fill(-1);
  b.fill(1);
  EXPECT_DOUBLE_EQ(context_loss(a, a), 0.0);
  EXPECT_DOUBLE_EQ(context_loss(a, b), 2.0);
  EXPECT_THROW(context_loss(a, Tensor<double>(2, 1, 3, 2)), ShapeError);
}

TEST(Context, OracleAndSymmetry) {
  std::mt19937_64 rng(2);
  auto x = random_tensor<double>({3, 2, 4, 4}, rng);
  auto y = random_tensor<double>({3, 2, 4, 4}, rng);
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  EXPECT_NEAR(context_loss(x, y), s / x.size(), 1e-9);
  EXPECT_NEAR(context_loss(x, y), context_loss(y, x), 1e-9);
  const auto per = context_loss_per_sample(x, y);
  EXPECT_NEAR((per[0] + per[1] + per[2]) / 3, context_loss(x, y), 1e-9);
}

TEST(Feature, Examples) {
  Tensor<double> fx(1, 2), fxh(1, 2);
  fx[0] = 1;
  EXPECT_DOUBLE_EQ(feature_loss(fx, fxh), 0.5);
  EXPECT_DOUBLE_EQ(feature_loss(fx, fx), 0.0);
  EXPECT_THROW(feature_loss(fx, Tensor<double>(1, 3)), ShapeError);
}

TEST(Feature, OracleAndSymmetry) {
  std::mt19937_64 rng(3);
  auto a = random_tensor<double>({4, 9}, rng);
  auto b = random_tensor<double>({4, 9}, rng);
  double total = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    double d2 = 0;
    for (std::size_t j = 0; j < 9; ++j) d2 += std::pow(a(n, j, 0, 0) - b(n, j, 0, 0), 2);
    total += d2 / 9;
  }
  EXPECT_NEAR(feature_loss(a, b), total / 4, 1e-9);
  EXPECT_NEAR(feature_loss(a, b), feature_loss(b, a), 1e-9);
}

TEST(Entropy, UniformIsLogT) {
  Tensor<double> h(3, 4);
  h.fill(0.7);
  EXPECT_NEAR(entropy_loss(h), std::log(4.0), 1e-9);
}

TEST(Entropy, PeakedExample) {
  Tensor<double> h(1, 4);
  h[0] = 10;
  // softmax = (0.999864, 4.54e-5, 4.54e-5, 4.54e-5)
  EXPECT_NEAR(entropy_loss(h), 0.0015, 5e-5);
  EXPECT_NEAR(entropy_loss(h), oracle_entropy({10, 0, 0, 0}), 1e-12);
}

TEST(Entropy, ExtremeLogitsStayFinite) {
  Tensor<double> h(1, 3);
  h[0] = 1000;
  h[1] = -1000;
  EXPECT_NEAR(entropy_loss(h), 0.0, 1e-12);
  for (double g : entropy_loss_grad(h).vec()) EXPECT_TRUE(std::isfinite(g));
}

TEST(Entropy, NeedsTwoLogits) { EXPECT_THROW(entropy_loss(Tensor<double>(2, 1)), ShapeError); }

TEST(Entropy, ShiftInvarianceBoundsAndUniformMaximum) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 2 + trial % 30;
    auto h = random_tensor<double>({2, t}, rng, -4, 4);
    const double e = entropy_loss(h);
    EXPECT_GE(e, -1e-9);
    EXPECT_LT(e, std::log(double(t)));  // random logits are never exactly uniform

    Tensor<double> shifted = h;
    for (std::size_t n = 0; n < 2; ++n) {
      const double s = shift(rng);
      for (std::size_t j = 0; j < t; ++j) shifted(n, j, 0, 0) += s;
    }
    EXPECT_NEAR(entropy_loss(shifted), e, 1e-6);

    std::vector<double> row(h.sample(0), h.sample(0) + t);
    EXPECT_NEAR(entropy_per_sample(h)[0], oracle_entropy(row), 1e-9);
  }
}

TEST(Total, WeightedSum) {
  const LossWeights w;
  EXPECT_NEAR(total_generator_loss(0.6931, 0.1, 0.2, 1.0, w), 5.8931, 1e-12);

  LossWeights con_only{0, 1, 0, 0};
  EXPECT_DOUBLE_EQ(total_generator_loss(0.7, 0.25, 0.3, 1.1, con_only), 0.25);

  LossWeights no_inf{1, 40, 1, 0};
  EXPECT_NEAR(total_generator_loss(0.7, 0.25, 0.3, 1.1, w) - total_generator_loss(0.7, 0.25, 0.3, 1.1, no_inf),
              1.1, 1e-12);
}

TEST(Total, LinearInEachWeight) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    LossReport parts{u(rng), u(rng), u(rng), u(rng)};
    LossWeights a{u(rng), u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng), u(rng)};
    const double s = u(rng);
    LossWeights mix{a.adv + s * b.adv, a.con + s * b.con, a.fea + s * b.fea, a.inf + s * b.inf};
    EXPECT_NEAR(total_generator_loss(parts, mix),
                total_generator_loss(parts, a) + s * total_generator_loss(parts, b), 1e-9);
  }
}

TEST(Weights, Validation) {
  EXPECT_NO_THROW(LossWeights{}.validate());
  EXPECT_THROW((LossWeights{-1, 40, 1, 1}.validate()), ConfigError);
  EXPECT_THROW((LossWeights{0, 0, 0, 0}.validate()), ConfigError);
}

TEST(Gradients, MatchFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& [name, err] : testing::check_loss_gradients(seed)) EXPECT_LE(err, 1e-3) << name;
  }
}

}  // namespace
}  // namespace novelty
