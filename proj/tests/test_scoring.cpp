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

#include "novelty/scoring.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "auc_oracle.hpp"
#include "test_util.hpp"

namespace novelty {
namespace {

using testing::random_tensor;

TEST(Normalize, Examples) {
  const std::vector<double> a{2, 4, 6};
  const auto n = normalize_scores(a);
  EXPECT_EQ(n.values, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_FALSE(n.degenerate);

  const auto one = normalize_scores(std::vector<double>{5});
  EXPECT_EQ(one.values, std::vector<double>{0.0});
  EXPECT_TRUE(one.degenerate);
  const auto flat = normalize_scores(std::vector<double>{3, 3, 3});
  EXPECT_EQ(flat.values, (std::vector<double>{0, 0, 0}));
  EXPECT_TRUE(flat.degenerate);
}

TEST(Normalize, PreservesOrderAndRange) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(3, 10);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> raw(40);
    for (auto& v : raw) v = g(rng);
    const auto n = normalize_scores(raw).values;
    EXPECT_EQ(*std::min_element(n.begin(), n.end()), 0.0);
    EXPECT_EQ(*std::max_element(n.begin(), n.end()), 1.0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      for (std::size_t j = 0; j < raw.size(); ++j) {
        if (raw[i] < raw[j]) EXPECT_LE(n[i], n[j]);
      }
    }
  }
}

TEST(Auc, Examples) {
  EXPECT_EQ(compute_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(compute_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{1, 1, 0, 0}), 0.0);
  EXPECT_EQ(compute_auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{0, 1, 0, 1}), 0.5);
}

TEST(Auc, SingleClassIsUndefined) {
  EXPECT_THROW(compute_auc(std::vector<double>{1, 2}, std::vector<int>{0, 0}), UndefinedMetricError);
  EXPECT_THROW(compute_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), UndefinedMetricError);
  EXPECT_THROW(compute_auc(std::vector<double>{1, 2}, std::vector<int>{0, 2}), UndefinedMetricError);
  EXPECT_THROW(compute_auc(std::vector<double>{1, 2}, std::vector<int>{0}), ShapeError);
}

TEST(Auc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = testing::random_auc_instance(rng, 200);
    EXPECT_NEAR(compute_auc(inst.scores, inst.labels), testing::pairwise_auc(inst.scores, inst.labels), 1e-9);
  }
}

TEST(Auc, InvariantUnderMonotoneMapsAndNormalization) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = testing::random_auc_instance(rng, 120);
    const double base = compute_auc(inst.scores, inst.labels);
    std::vector<double> mapped(inst.scores.size());
    std::transform(inst.scores.begin(), inst.scores.end(), mapped.begin(),
                   [](double v) { return std::exp(3 * v) - 7 + std::atan(v); });
    EXPECT_NEAR(compute_auc(mapped, inst.labels), base, 1e-12);
    EXPECT_NEAR(compute_auc(normalize_scores(inst.scores).values, inst.labels), base, 1e-12);
  }
}

TEST(Auc, FlippingLabelsComplementsTieFreeAuc) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(60);
    std::vector<int> y(60), flipped(60);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = u(rng);
      y[i] = i % 3 == 0;
      flipped[i] = 1 - y[i];
    }
    EXPECT_NEAR(compute_auc(s, y) + compute_auc(s, flipped), 1.0, 1e-12);
  }
}

TEST(Roc, EndpointsAndMonotone) {
  const std::vector<double> s{0.9, 0.8, 0.8, 0.3, 0.1};
  const std::vector<int> y{1, 0, 1, 0, 1};
  const auto pts = roc_curve(s, y);
  EXPECT_EQ(pts.front(), (std::pair<double, double>{0, 0}));
  EXPECT_EQ(pts.back(), (std::pair<double, double>{1, 1}));
  EXPECT_EQ(pts.size(), 5u);  // four distinct thresholds
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_GE(pts[i].first, pts[i - 1].first);
    EXPECT_GE(pts[i].second, pts[i - 1].second);
  }
}

TEST(NoveltyScore, ConvexCombinationOfPerSampleErrors) {
  auto m = init_params<double>(testing::toy_arch(), 1);
  std::mt19937_64 rng(5);
  const auto x = random_tensor<double>({5, 1, 8, 8}, rng);
  const auto g = generator_forward(m.generator, x, Mode::eval);
  const auto con = context_loss_per_sample(x, g.x_hat);
  const auto fea = feature_loss_per_sample(discriminator_forward(m.discriminator, x, Mode::eval).features,
                                           discriminator_forward(m.discriminator, g.x_hat, Mode::eval).features);
  const auto only_con = novelty_scores(m, x, 1.0);
  const auto mixed = novelty_scores(m, x, 0.9);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(only_con[i], con[i]);
    EXPECT_NEAR(mixed[i], 0.9 * con[i] + 0.1 * fea[i], 1e-15);
  }
  EXPECT_THROW(novelty_scores(m, x, 1.5), ConfigError);
}

TEST(NoveltyScore, IndependentOfBatchComposition) {
  auto m = init_params<float>(testing::small_arch(), 2);
  std::mt19937_64 rng(6);
  const auto x = random_tensor<float>({9, 1, 32, 32}, rng);
  const auto all = novelty_scores(m, x, 0.9, true, 9);
  const auto ones = novelty_scores(m, x, 0.9, true, 1);
  const auto fours = novelty_scores(m, x, 0.9, true, 4);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_NEAR(all[i], ones[i], 1e-6 * std::max(1.0, std::abs(all[i])));
    EXPECT_NEAR(all[i], fours[i], 1e-6 * std::max(1.0, std::abs(all[i])));
  }
  EXPECT_EQ(all, novelty_scores(m, x, 0.9, true, 9));
}

TEST(NoveltyScore, UntrainedModelIsNearChance) {
  auto m = init_params<float>(testing::small_arch(), 3);
  std::mt19937_64 rng(7);
  const auto x = random_tensor<float>({200, 1, 32, 32}, rng);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = i % 2;
  EXPECT_NEAR(compute_auc(novelty_scores(m, x, 0.9), y), 0.5, 0.1);
}

}  // namespace
}  // namespace novelty
