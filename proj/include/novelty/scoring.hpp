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

// Novelty scores, min-max normalization and ROC-AUC.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "novelty/losses.hpp"
#include "novelty/model.hpp"

namespace novelty {

inline constexpr double kDefaultScoreLambda = 0.9;

/// Per-sample A(x) = lambda * context error + (1 - lambda) * feature error,
/// computed in eval mode on clean inputs. Batching does not change the result.
template <typename T>
std::vector<double> novelty_scores(const ModelParams<T>& m, const Tensor<T>& x, double lambda,
                                   bool use_attention = true, std::size_t batch_size = 64) {
  if (!(lambda >= 0 && lambda <= 1)) throw ConfigError("score lambda must lie in [0, 1]");
  std::vector<double> out;
  out.reserve(x.n());
  // TODO: shard batches across threads; results are keyed by sample index.
  for (std::size_t i = 0; i < x.n(); i += batch_size) {
    const std::size_t n = std::min(batch_size, x.n() - i);
    const Tensor<T> xb = x.slice(i, n);
    const auto g = generator_forward(m.generator, xb, Mode::eval, use_attention);
    const auto f_x = discriminator_forward(m.discriminator, xb, Mode::eval).features;
    const auto f_xh = discriminator_forward(m.discriminator, g.x_hat, Mode::eval).features;
    const auto con = context_loss_per_sample(xb, g.x_hat);
    const auto fea = feature_loss_per_sample(f_x, f_xh);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = lambda * double(con[k]) + (1 - lambda) * double(fea[k]);
      if (!std::isfinite(a)) throw NumericError("non-finite novelty score for sample " + std::to_string(i + k));
      out.push_back(a);
    }
  }
  return out;
}

struct NormalizedScores {
  std::vector<double> values;
  bool degenerate = false;  // all inputs equal: values are all zero
};

/// (a - min) / (max - min); all zeros plus the degeneracy flag when max == min.
inline NormalizedScores normalize_scores(std::span<const double> raw) {
  NormalizedScores out;
  out.values.assign(raw.size(), 0.0);
  if (raw.empty()) {
    out.degenerate = true;
    return out;
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double mn = *lo, range = *hi - *lo;
  if (!(range > 0)) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) out.values[i] = (raw[i] - mn) / range;
  out.values[lo - raw.begin()] = 0.0;
  out.values[hi - raw.begin()] = 1.0;
  return out;
}

namespace detail {

inline void check_labels(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw UndefinedMetricError("labels must be 0 (inlier) or 1 (outlier)");
    pos += y;
  }
  if (pos == 0 || pos == labels.size()) {
    throw UndefinedMetricError("AUC needs both inlier and outlier labels");
  }
}

}  // namespace detail

/// ROC points (fpr, tpr) from the highest threshold down, starting at (0, 0)
/// and ending at (1, 1). Tied scores form a single step.
inline std::vector<std::pair<double, double>> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  detail::check_labels(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double P = double(std::count(labels.begin(), labels.end(), 1));
  const double N = double(labels.size()) - P;
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] ? tp : fp) += 1;
    pts.emplace_back(fp / N, tp / P);
  }
  return pts;
}

/// Trapezoidal area under the ROC curve; outliers (label 1) are the positive
/// class, so this is P(score(outlier) > score(inlier)) with ties counting 1/2.
inline double compute_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto pts = roc_curve(scores, labels);
  double area = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2;
  }
  return area;
}

}  // namespace novelty
