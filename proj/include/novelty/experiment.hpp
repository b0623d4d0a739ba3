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

// End-to-end experiments: train on one class, score the test split, and the
// repeated (COIL-100) and ablation protocols built on top of that.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelty/config.hpp"
#include "novelty/data.hpp"
#include "novelty/scoring.hpp"
#include "novelty/train.hpp"

namespace novelty {

struct EvalReport {
  std::string dataset;
  int inlier_class = 0;
  double auc = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> repeat_aucs;  // one per repeat (COIL-100)
  std::string fingerprint;
  bool protocol = true;  // false when shortcuts were taken (e.g. no retraining per repeat)
  std::size_t n_test = 0;
  std::size_t n_outliers = 0;
  bool scores_degenerate = false;
  std::string variant;  // ablation configuration, empty otherwise
};

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"dataset", r.dataset},     {"inlier_class", r.inlier_class}, {"auc", r.auc},
          {"seeds", r.seeds},         {"repeat_aucs", r.repeat_aucs},   {"fingerprint", r.fingerprint},
          {"protocol", r.protocol},   {"n_test", r.n_test},             {"n_outliers", r.n_outliers},
          {"scores_degenerate", r.scores_degenerate}, {"variant", r.variant}};
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.dataset = j.at("dataset");
  r.inlier_class = j.at("inlier_class");
  r.auc = j.at("auc");
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  r.repeat_aucs = j.at("repeat_aucs").get<std::vector<double>>();
  r.fingerprint = j.at("fingerprint");
  r.protocol = j.at("protocol");
  r.n_test = j.at("n_test");
  r.n_outliers = j.at("n_outliers");
  r.scores_degenerate = j.value("scores_degenerate", false);
  r.variant = j.value("variant", "");
  return r;
}

/// Scores of one test split together with their labels.
struct ScoredSplit {
  std::vector<double> scores;
  std::vector<double> normalized;
  std::vector<int> labels;
  double auc = 0;
  bool degenerate = false;
};

template <typename T>
ScoredSplit score_split(const TrainState<T>& st, const Tensor<T>& test, const std::vector<int>& labels,
                        double lambda, std::size_t batch_size = 64) {
  ScoredSplit s;
  s.scores = novelty_scores(st.model, test, lambda, st.cfg.use_attention, batch_size);
  const auto norm = normalize_scores(s.scores);
  s.normalized = norm.values;
  s.degenerate = norm.degenerate;
  s.labels = labels;
  // AUC on the raw scores; normalization is monotone and cannot change it
  s.auc = compute_auc(s.scores, labels);
  return s;
}

/// Progress hook: (stage description, epoch record or null).
using ProgressFn = std::function<void(const std::string&, const EpochRecord*)>;

struct RunOutcome {
  FitResult<float> fit;
  ScoredSplit scored;
  EvalReport report;
};

/// Train on one split and score its test set with the retained model.
inline RunOutcome train_and_evaluate(const DatasetBundle& data, int inlier_class, const ArchConfig& arch,
                                     const TrainConfig& cfg, double lambda, std::size_t max_train,
                                     std::size_t eval_batch, const ProgressFn& progress = {}) {
  const OneClassSplit split = make_split(data, inlier_class, cfg.seed, max_train);
  const SplitData d = materialize(data, split, arch.image_size);
  const std::string tag = to_string(data.kind) + " class " + std::to_string(inlier_class) + " seed " +
                          std::to_string(cfg.seed);
  auto fitted = fit(d.train, d.val, arch, cfg, [&](const EpochRecord& r) {
    if (progress) progress(tag, &r);
  });
  ScoredSplit scored = score_split(fitted.best, d.test, d.test_labels, lambda, eval_batch);
  EvalReport rep;
  rep.dataset = to_string(data.kind);
  rep.inlier_class = inlier_class;
  rep.auc = scored.auc;
  rep.seeds = {cfg.seed};
  rep.fingerprint = config_fingerprint(arch, cfg);
  rep.n_test = scored.labels.size();
  rep.n_outliers = std::count(scored.labels.begin(), scored.labels.end(), 1);
  rep.scores_degenerate = scored.degenerate;
  return {std::move(fitted), std::move(scored), std::move(rep)};
}

/// Scores an existing model on the split drawn with cfg.seed.
inline std::pair<EvalReport, ScoredSplit> evaluate_checkpoint(const TrainState<float>& st, const DatasetBundle& data,
                                                              int inlier_class, std::uint64_t seed, double lambda,
                                                              std::size_t max_train, std::size_t eval_batch) {
  if (dataset_channels(data.kind) != st.arch.image_channels) {
    throw ConfigError("checkpoint expects " + std::to_string(st.arch.image_channels) + "-channel images, " +
                      to_string(data.kind) + " has " + std::to_string(dataset_channels(data.kind)));
  }
  const OneClassSplit split = make_split(data, inlier_class, seed, max_train);
  const Tensor<float> test = preprocess(test_pool(data, split), split.test, st.arch.image_size);
  ScoredSplit scored = score_split(st, test, split.test_labels, lambda, eval_batch);
  EvalReport rep;
  rep.dataset = to_string(data.kind);
  rep.inlier_class = inlier_class;
  rep.auc = scored.auc;
  rep.seeds = {seed};
  rep.fingerprint = config_fingerprint(st.arch, st.cfg);
  rep.n_test = scored.labels.size();
  rep.n_outliers = std::count(scored.labels.begin(), scored.labels.end(), 1);
  rep.scores_degenerate = scored.degenerate;
  return {rep, std::move(scored)};
}

/// COIL-100 protocol: `repeats` fresh splits (seeds seed+0, seed+1, ...), each
/// with fresh training, mean AUC reported. With `reuse` set, that model is
/// scored on every split instead and the report is marked non-protocol.
inline EvalReport coil_protocol(const DatasetBundle& data, int inlier_class, const ArchConfig& arch,
                                const TrainConfig& cfg, double lambda, std::size_t repeats, std::size_t max_train,
                                std::size_t eval_batch, const TrainState<float>* reuse = nullptr,
                                const ProgressFn& progress = {}) {
  if (data.kind != DatasetKind::coil100) throw ConfigError("the repeated protocol is defined for COIL-100");
  EvalReport rep;
  rep.dataset = to_string(data.kind);
  rep.inlier_class = inlier_class;
  rep.protocol = reuse == nullptr;
  rep.fingerprint = reuse ? config_fingerprint(reuse->arch, reuse->cfg) : config_fingerprint(arch, cfg);
  double sum = 0;
  for (std::size_t k = 0; k < repeats; ++k) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + k;
    double auc = 0;
    if (reuse) {
      auto [r, scored] = evaluate_checkpoint(*reuse, data, inlier_class, c.seed, lambda, max_train, eval_batch);
      auc = r.auc;
      rep.n_test = r.n_test;
      rep.n_outliers = r.n_outliers;
    } else {
      auto out = train_and_evaluate(data, inlier_class, arch, c, lambda, max_train, eval_batch, progress);
      auc = out.report.auc;
      rep.n_test = out.report.n_test;
      rep.n_outliers = out.report.n_outliers;
    }
    rep.seeds.push_back(c.seed);
    rep.repeat_aucs.push_back(auc);
    sum += auc;
    if (progress) progress("repeat " + std::to_string(k + 1) + "/" + std::to_string(repeats) + " auc " +
                               std::to_string(auc), nullptr);
  }
  rep.auc = sum / double(repeats);
  return rep;
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationVariant {
  std::string name;
  bool use_attention;
  bool use_entropy;
};

/// The three configurations, in table order: plain adversarial auto-encoder,
/// plus the latent entropy loss, plus channel attention.
inline const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> v = {
      {"Generator and discriminator", false, false},
      {"With latent entropy loss", false, true},
      {"With channel attention", true, true},
  };
  return v;
}

inline TrainConfig apply_variant(TrainConfig cfg, const AblationVariant& v) {
  cfg.use_attention = v.use_attention;
  cfg.use_entropy = v.use_entropy;
  return cfg;
}

/// One report per (variant, class, seed), in that nesting order.
inline std::vector<EvalReport> ablation_suite(const DatasetBundle& data, const std::vector<int>& classes,
                                              const std::vector<std::uint64_t>& seeds, const ArchConfig& arch,
                                              const TrainConfig& base, double lambda, std::size_t max_train,
                                              std::size_t eval_batch, const ProgressFn& progress = {},
                                              const std::function<void(const EvalReport&)>& on_result = {}) {
  std::vector<EvalReport> out;
  for (const auto& v : ablation_variants()) {
    for (int cls : classes) {
      for (std::uint64_t seed : seeds) {
        TrainConfig c = apply_variant(base, v);
        c.seed = seed;
        EvalReport r = data.kind == DatasetKind::coil100
                           ? coil_protocol(data, cls, arch, c, lambda, 1, max_train, eval_batch, nullptr, progress)
                           : train_and_evaluate(data, cls, arch, c, lambda, max_train, eval_batch, progress).report;
        r.variant = v.name;
        if (on_result) on_result(r);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

/// Mean AUC per variant, in ablation_variants() order (NaN when absent).
inline std::vector<double> variant_means(const std::vector<EvalReport>& rows) {
  std::vector<double> means;
  for (const auto& v : ablation_variants()) {
    double s = 0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.variant == v.name) {
        s += r.auc;
        ++n;
      }
    }
    means.push_back(n ? s / double(n) : std::numeric_limits<double>::quiet_NaN());
  }
  return means;
}

namespace detail {

inline std::string fixed3(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }
inline std::string lpad(const std::string& s, std::size_t w) { return s.size() >= w ? s : std::string(w - s.size(), ' ') + s; }

}  // namespace detail

/// Aligned table: one row per variant, one column per inlier class (mean over
/// seeds), plus the overall mean.
inline std::string format_ablation_table(const std::vector<EvalReport>& rows) {
  std::vector<int> classes;
  for (const auto& r : rows) {
    if (std::find(classes.begin(), classes.end(), r.inlier_class) == classes.end()) classes.push_back(r.inlier_class);
  }
  std::ostringstream os;
  const std::size_t w0 = 30, w = 8;
  os << detail::pad("Method", w0);
  for (int c : classes) os << detail::lpad(std::to_string(c), w);
  os << detail::lpad("Mean", w) << "\n";
  const auto means = variant_means(rows);
  for (std::size_t vi = 0; vi < ablation_variants().size(); ++vi) {
    const auto& v = ablation_variants()[vi];
    os << detail::pad(v.name, w0);
    for (int c : classes) {
      double s = 0;
      std::size_t n = 0;
      for (const auto& r : rows) {
        if (r.variant == v.name && r.inlier_class == c) {
          s += r.auc;
          ++n;
        }
      }
      os << detail::lpad(detail::fixed3(n ? s / double(n) : NAN), w);
    }
    os << detail::lpad(detail::fixed3(means[vi]), w) << "\n";
  }
  return os.str();
}

/// Aligned per-class AUC table of evaluation reports, grouped by dataset.
inline std::string format_eval_table(const std::vector<EvalReport>& rows) {
  std::ostringstream os;
  std::map<std::string, std::vector<const EvalReport*>> by_dataset;
  for (const auto& r : rows) by_dataset[r.dataset].push_back(&r);
  for (const auto& [ds, list] : by_dataset) {
    os << detail::pad("Dataset", 10);
    for (const auto* r : list) os << detail::lpad(std::to_string(r->inlier_class), 8);
    os << detail::lpad("Mean", 8) << "\n" << detail::pad(ds, 10);
    double s = 0;
    for (const auto* r : list) {
      os << detail::lpad(detail::fixed3(r->auc) + (r->protocol ? "" : "*"), 8);
      s += r->auc;
    }
    os << detail::lpad(detail::fixed3(s / double(list.size())), 8) << "\n";
  }
  bool any_shortcut = false;
  for (const auto& r : rows) any_shortcut |= !r.protocol;
  if (any_shortcut) os << "* non-protocol run (one model reused across repeats)\n";
  return os.str();
}

}  // namespace novelty
