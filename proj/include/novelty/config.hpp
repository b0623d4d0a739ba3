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

// Experiment configuration: a flat JSON object whose keys all have defaults.
// Values come from the defaults, then the config file, then command-line
// overrides; unknown keys and ill-typed values are rejected.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelty/data.hpp"
#include "novelty/model.hpp"
#include "novelty/scoring.hpp"
#include "novelty/train.hpp"

namespace novelty {

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::mnist;
  int inlier_class = 1;
  std::string data_root;    // empty: data/<dataset>
  std::string output_dir = "runs/default";
  std::string checkpoint;   // empty: <output_dir>/checkpoints/best.ckpt
  ArchConfig arch;
  TrainConfig train;
  double score_lambda = kDefaultScoreLambda;
  std::size_t eval_batch_size = 64;
  std::size_t max_train = 0;  // 0: no cap on the training split
  bool coil_retrain = true;   // retrain per COIL-100 repeat (protocol) vs. reuse one checkpoint
  std::size_t coil_repeats = 20;
  std::vector<std::uint64_t> seeds;  // ablation seeds; empty: {train.seed}
  std::vector<int> classes;          // ablation inlier classes; empty: {inlier_class}

  std::filesystem::path data_path() const {
    return data_root.empty() ? std::filesystem::path("data") / to_string(dataset) : std::filesystem::path(data_root);
  }
  std::filesystem::path out_path() const { return output_dir; }
  std::filesystem::path checkpoint_path() const {
    return checkpoint.empty() ? out_path() / "checkpoints" / "best.ckpt" : std::filesystem::path(checkpoint);
  }
  std::vector<std::uint64_t> seed_list() const { return seeds.empty() ? std::vector{train.seed} : seeds; }
  std::vector<int> class_list() const { return classes.empty() ? std::vector{inlier_class} : classes; }
};

struct ConfigKey {
  const char* name;
  nlohmann::json default_value;
  const char* help;
};

/// Every accepted key with its default. `null` defaults are resolved per dataset.
inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"dataset", "mnist", "mnist | cifar10 | coil100"},
      {"inlier_class", 1, "normal class (0-9, or 0-99 for COIL-100)"},
      {"data_root", "", "dataset directory; empty means data/<dataset>"},
      {"output_dir", "runs/default", "run directory (config echo, checkpoints/, logs/, reports/)"},
      {"checkpoint", "", "checkpoint to evaluate; empty means <output_dir>/checkpoints/best.ckpt"},
      {"seed", 0, "RNG seed for initialization, splits, shuffling and noise"},
      {"seeds", nlohmann::json::array(), "ablation seeds; empty means [seed]"},
      {"classes", nlohmann::json::array(), "ablation inlier classes; empty means [inlier_class]"},
      {"learning_rate", 1e-3, "Adam learning rate"},
      {"batch_size", nullptr, "mini-batch size; null means 64 (15 for COIL-100)"},
      {"epochs", nullptr, "epoch budget; null means 15 (25 for CIFAR-10)"},
      {"adam_beta1", 0.5, "Adam beta1"},
      {"adam_beta2", 0.999, "Adam beta2"},
      {"adam_eps", 1e-8, "Adam epsilon"},
      {"lambda_adv", 1.0, "adversarial loss weight"},
      {"lambda_con", 40.0, "context (reconstruction) loss weight"},
      {"lambda_fea", 1.0, "feature-matching loss weight"},
      {"lambda_inf", 1.0, "latent entropy loss weight"},
      {"noise_sigma", 0.1, "std of the Gaussian training noise, in [-1, 1] pixel units"},
      {"use_attention", true, "channel attention in the generator"},
      {"use_entropy", true, "latent entropy loss"},
      {"grad_clip", 0.0, "global gradient-norm clip; 0 disables"},
      {"select_best", true, "keep the epoch with the lowest validation loss"},
      {"max_train", 0, "cap on the training split size; 0 disables"},
      {"score_lambda", kDefaultScoreLambda, "context vs. feature weight of the novelty score"},
      {"eval_batch_size", 64, "batch size for scoring"},
      {"coil_retrain", true, "COIL-100: retrain for every repeat (false reuses one checkpoint; non-protocol)"},
      {"coil_repeats", 20, "COIL-100 repeats"},
      {"image_size", 32, "network input size"},
      {"latent_width", 128, "latent code width"},
      {"encoder_channels", {64, 128, 256, 256}, "generator encoder widths"},
      {"discriminator_channels", {64, 128, 256, 256}, "discriminator widths"},
      {"reduction", 16, "channel attention reduction ratio"},
  };
  return keys;
}

inline nlohmann::json default_config_json() {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : config_keys()) j[k.name] = k.default_value;
  return j;
}

namespace detail {

template <typename V>
V config_get(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + std::string(key) + "' has the wrong type: " + j.at(key).dump());
  }
}

inline std::size_t config_count(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config key '" + std::string(key) + "' must be a non-negative integer, got " + v.dump());
  }
  return v.get<std::size_t>();
}

}  // namespace detail

/// Merges `overrides` into the defaults, rejecting unknown keys.
inline nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overrides, const std::string& source) {
  if (!overrides.is_object()) throw ConfigError(source + ": config must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (!base.contains(key)) throw ConfigError(source + ": unknown config key '" + key + "'");
    base[key] = value;
  }
  return base;
}

/// Builds a validated configuration from a full key set.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::config_count;
  using detail::config_get;
  ExperimentConfig c;
  c.dataset = parse_dataset_kind(config_get<std::string>(j, "dataset"));
  c.inlier_class = config_get<int>(j, "inlier_class");
  c.data_root = config_get<std::string>(j, "data_root");
  c.output_dir = config_get<std::string>(j, "output_dir");
  c.checkpoint = config_get<std::string>(j, "checkpoint");
  c.seeds = config_get<std::vector<std::uint64_t>>(j, "seeds");
  c.classes = config_get<std::vector<int>>(j, "classes");

  TrainConfig& t = c.train;
  t.seed = config_get<std::uint64_t>(j, "seed");
  t.learning_rate = config_get<double>(j, "learning_rate");
  t.batch_size = j.at("batch_size").is_null() ? (c.dataset == DatasetKind::coil100 ? 15 : 64)
                                              : config_count(j, "batch_size");
  t.epochs = j.at("epochs").is_null() ? (c.dataset == DatasetKind::cifar10 ? 25 : 15) : config_count(j, "epochs");
  t.adam_beta1 = config_get<double>(j, "adam_beta1");
  t.adam_beta2 = config_get<double>(j, "adam_beta2");
  t.adam_eps = config_get<double>(j, "adam_eps");
  t.weights = {config_get<double>(j, "lambda_adv"), config_get<double>(j, "lambda_con"),
               config_get<double>(j, "lambda_fea"), config_get<double>(j, "lambda_inf")};
  t.noise.sigma = config_get<double>(j, "noise_sigma");
  t.use_attention = config_get<bool>(j, "use_attention");
  t.use_entropy = config_get<bool>(j, "use_entropy");
  t.grad_clip = config_get<double>(j, "grad_clip");
  t.select_best = config_get<bool>(j, "select_best");
  t.validate();

  c.max_train = config_count(j, "max_train");
  c.score_lambda = config_get<double>(j, "score_lambda");
  if (!(c.score_lambda >= 0 && c.score_lambda <= 1)) throw ConfigError("score_lambda must lie in [0, 1]");
  c.eval_batch_size = config_count(j, "eval_batch_size");
  if (c.eval_batch_size == 0) throw ConfigError("eval_batch_size must be >= 1");
  c.coil_retrain = config_get<bool>(j, "coil_retrain");
  c.coil_repeats = config_count(j, "coil_repeats");
  if (c.coil_repeats == 0) throw ConfigError("coil_repeats must be >= 1");

  ArchConfig& a = c.arch;
  a.image_channels = dataset_channels(c.dataset);
  a.image_size = config_count(j, "image_size");
  a.latent_width = config_count(j, "latent_width");
  a.encoder_channels = config_get<std::vector<std::size_t>>(j, "encoder_channels");
  a.discriminator_channels = config_get<std::vector<std::size_t>>(j, "discriminator_channels");
  a.reduction = config_count(j, "reduction");
  a.validate();

  const int classes = c.dataset == DatasetKind::coil100 ? 100 : 10;
  for (int k : c.class_list()) {
    if (k < 0 || k >= classes) {
      throw ConfigError("inlier class " + std::to_string(k) + " out of range for " + to_string(c.dataset));
    }
  }
  return c;
}

/// The fully resolved configuration, dataset-dependent defaults filled in.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"dataset", to_string(c.dataset)},
          {"inlier_class", c.inlier_class},
          {"data_root", c.data_path().string()},
          {"output_dir", c.output_dir},
          {"checkpoint", c.checkpoint_path().string()},
          {"seed", c.train.seed},
          {"seeds", c.seeds},
          {"classes", c.classes},
          {"learning_rate", c.train.learning_rate},
          {"batch_size", c.train.batch_size},
          {"epochs", c.train.epochs},
          {"adam_beta1", c.train.adam_beta1},
          {"adam_beta2", c.train.adam_beta2},
          {"adam_eps", c.train.adam_eps},
          {"lambda_adv", c.train.weights.adv},
          {"lambda_con", c.train.weights.con},
          {"lambda_fea", c.train.weights.fea},
          {"lambda_inf", c.train.weights.inf},
          {"noise_sigma", c.train.noise.sigma},
          {"use_attention", c.train.use_attention},
          {"use_entropy", c.train.use_entropy},
          {"grad_clip", c.train.grad_clip},
          {"select_best", c.train.select_best},
          {"max_train", c.max_train},
          {"score_lambda", c.score_lambda},
          {"eval_batch_size", c.eval_batch_size},
          {"coil_retrain", c.coil_retrain},
          {"coil_repeats", c.coil_repeats},
          {"image_size", c.arch.image_size},
          {"latent_width", c.arch.latent_width},
          {"encoder_channels", c.arch.encoder_channels},
          {"discriminator_channels", c.arch.discriminator_channels},
          {"reduction", c.arch.reduction}};
}

/// Parses a command-line override value: JSON literals (numbers, booleans,
/// arrays, null) are taken as such, anything else as a string.
inline nlohmann::json parse_override_value(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return text;
  }
}

/// Defaults <- file (if any) <- overrides (key -> raw text).
inline ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                                    const std::map<std::string, std::string>& overrides = {}) {
  nlohmann::json j = default_config_json();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file " + file->string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(text);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file->string() + ": " + e.what());
      }
      j = merge_config(std::move(j), parsed, file->string());
    }
  }
  nlohmann::json flags = nlohmann::json::object();
  for (const auto& [k, v] : overrides) flags[k] = parse_override_value(v);
  j = merge_config(std::move(j), flags, "command line");
  return config_from_json(j);
}

}  // namespace novelty
