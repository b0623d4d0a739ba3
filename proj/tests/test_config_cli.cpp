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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "novelty/cli.hpp"
#include "test_util.hpp"

namespace novelty {
namespace {

namespace fs = std::filesystem;
using namespace novelty::testing;

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "novelty");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Tiny model so CLI round trips take well under a second.
std::vector<std::string> tiny_flags() {
  return {"--image-size=16",         "--latent-width=8",  "--encoder-channels=[4,8]", "--discriminator-channels=[4,8]",
          "--reduction=2",           "--epochs=1",        "--batch-size=16"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

fs::path real_data_root() {
  if (const char* env = std::getenv("NOVELTY_DATA_ROOT")) return env;
  return NOVELTY_DEFAULT_DATA_ROOT;
}

TEST(Config, EmptyFileGivesDefaults) {
  TempDir tmp("cfg");
  write_text(tmp.path() / "empty.json", "");
  const auto cfg = load_config(tmp.path() / "empty.json");
  EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 1e-3);
  EXPECT_EQ(cfg.train.batch_size, 64u);
  EXPECT_EQ(cfg.train.epochs, 15u);
  EXPECT_DOUBLE_EQ(cfg.train.weights.con, 40.0);
  EXPECT_DOUBLE_EQ(cfg.score_lambda, 0.9);
  EXPECT_EQ(cfg.dataset, DatasetKind::mnist);
  EXPECT_EQ(cfg.arch.image_channels, 1u);
}

TEST(Config, DatasetDependentDefaults) {
  EXPECT_EQ(load_config(std::nullopt, {{"dataset", "coil100"}}).train.batch_size, 15u);
  EXPECT_EQ(load_config(std::nullopt, {{"dataset", "cifar10"}}).train.epochs, 25u);
  EXPECT_EQ(load_config(std::nullopt, {{"dataset", "cifar10"}}).arch.image_channels, 3u);
  EXPECT_EQ(load_config(std::nullopt, {{"dataset", "coil100"}, {"batch_size", "32"}}).train.batch_size, 32u);
}

TEST(Config, CommandLineOverridesFile) {
  TempDir tmp("cfg");
  write_text(tmp.path() / "c.json", R"({"batch_size": 64, "learning_rate": 0.002})");
  const auto cfg = load_config(tmp.path() / "c.json", {{"batch_size", "15"}});
  EXPECT_EQ(cfg.train.batch_size, 15u);
  EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 0.002);
}

TEST(Config, UnknownAndMistypedKeysAreRejected) {
  TempDir tmp("cfg");
  write_text(tmp.path() / "c.json", R"({"lerning_rate": 0.01})");
  try {
    load_config(tmp.path() / "c.json");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("lerning_rate"), std::string::npos);
  }
  try {
    load_config(std::nullopt, {{"batch_size", "\"many\""}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
  EXPECT_THROW(load_config(std::nullopt, {{"dataset", "svhn"}}), ConfigError);
  EXPECT_THROW(load_config(std::nullopt, {{"learning_rate", "-1"}}), ConfigError);
  write_text(tmp.path() / "broken.json", "{ not json");
  EXPECT_THROW(load_config(tmp.path() / "broken.json"), ConfigError);
}

TEST(Config, ResolvedConfigRoundTrips) {
  const auto a = load_config(std::nullopt, {{"epochs", "3"}, {"lambda_con", "10"}, {"use_attention", "false"}});
  const auto j = config_to_json(a);
  std::map<std::string, std::string> flat;
  for (auto it = j.begin(); it != j.end(); ++it) flat[it.key()] = it.value().dump();
  const auto b = load_config(std::nullopt, flat);
  EXPECT_EQ(config_to_json(b), j);
  EXPECT_EQ(config_fingerprint(a.arch, a.train), config_fingerprint(b.arch, b.train));
}

TEST(Config, ShippedConfigsParse) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(fs::path(NOVELTY_SOURCE_DIR) / "configs")) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 1u);
}

TEST(Cli, UsageErrorsExitWithTwo) {
  TempDir tmp("cli");
  write_text(tmp.path() / "bad.json", R"({"lerning_rate": 1})");
  auto r = run({"train", "--config=" + (tmp.path() / "bad.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("lerning_rate"), std::string::npos) << r.err;

  EXPECT_EQ(run({"train", "--lerning-rate=1"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);

  r = run({"eval", "--output-dir=" + tmp.path().string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos) << r.err;

  r = run({"train", "--data-root=" + (tmp.path() / "nowhere").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, TrainEvalReportRoundTrip) {
  TempDir tmp("cli");
  write_mnist_fixture(tmp.path() / "mnist", 30, 10);
  const auto common = concat({"--data-root=" + (tmp.path() / "mnist").string(),
                              "--output-dir=" + (tmp.path() / "run").string()},
                             tiny_flags());
  auto r = run(concat({"train"}, common));
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path run_dir = tmp.path() / "run";
  EXPECT_TRUE(fs::exists(run_dir / "checkpoints" / "best.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir / "checkpoints" / "last.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir / "config.train.json"));
  std::ifstream log(run_dir / "logs" / "train.ndjson");
  std::string line;
  ASSERT_TRUE(std::getline(log, line));
  const auto rec = nlohmann::json::parse(line);
  for (const char* k : {"epoch", "adv", "con", "fea", "inf", "total", "d_loss", "val", "seconds"}) {
    EXPECT_TRUE(rec.contains(k)) << k;
  }

  r = run(concat({"eval"}, common));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.err.find("fingerprint"), std::string::npos) << r.err;
  std::ifstream scores(run_dir / "reports" / "scores_mnist_1.csv");
  std::size_t rows = 0;
  while (std::getline(scores, line)) ++rows;
  EXPECT_EQ(rows, 1u + 100u);  // header + every test image

  // a different configuration against the same checkpoint only warns
  r = run(concat(concat({"eval"}, common), {"--learning-rate=0.5"}));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);

  r = run({"report", "--output-dir=" + run_dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream roc(run_dir / "reports" / "roc_mnist_1.csv");
  ASSERT_TRUE(std::getline(roc, line));
  EXPECT_EQ(line, "fpr,tpr");
}

TEST(Cli, SameConfigAndSeedReproduceExactly) {
  TempDir tmp("cli");
  write_mnist_fixture(tmp.path() / "mnist", 30, 10);
  std::vector<std::string> auc_lines;
  std::vector<std::vector<std::uint8_t>> ckpts;
  std::vector<std::vector<char>> churn;  // perturb heap layout between the runs
  for (const char* name : {"a", "b"}) {
    const auto common = concat({"--data-root=" + (tmp.path() / "mnist").string(),
                                "--output-dir=" + (tmp.path() / name).string()},
                               tiny_flags());
    ASSERT_EQ(run(concat({"train"}, common)).code, 0);
    ASSERT_EQ(run(concat({"eval"}, common)).code, 0);
    std::ifstream in(tmp.path() / name / "reports" / "eval.ndjson");
    std::string line;
    std::getline(in, line);
    auc_lines.push_back(line);
    ckpts.push_back(detail::read_file(tmp.path() / name / "checkpoints" / "best.ckpt"));
    for (std::size_t i = 1; i < 50; ++i) churn.emplace_back(i * 37 + 5);
  }
  EXPECT_EQ(auc_lines[0], auc_lines[1]);
  EXPECT_EQ(ckpts[0], ckpts[1]);
}

TEST(Cli, ReportWithoutResultsFails) {
  TempDir tmp("cli");
  EXPECT_EQ(run({"report", "--output-dir=" + tmp.path().string()}).code, 1);
}

TEST(Cli, TrainSmokeOnRealMnistSubset) {
  const fs::path root = real_data_root() / "mnist";
  if (!fs::exists(root / "train-images-idx3-ubyte")) GTEST_SKIP() << "no MNIST under " << root;
  TempDir tmp("cli");
  const auto r = run({"train", "--data-root=" + root.string(), "--output-dir=" + tmp.path().string(),
                      "--inlier-class=1", "--max-train=256", "--epochs=1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(tmp.path() / "checkpoints" / "best.ckpt"));
}

TEST(Cli, AblationGridAndReportRows) {
  TempDir tmp("cli");
  write_mnist_fixture(tmp.path() / "mnist", 20, 6);
  const fs::path run_dir = tmp.path() / "abl";
  const auto r = run(concat({"ablate", "--data-root=" + (tmp.path() / "mnist").string(),
                             "--output-dir=" + run_dir.string(), "--classes=[0,1]", "--seeds=[0,1]"},
                            tiny_flags()));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = cli_detail::read_reports(run_dir / "reports" / "ablation.ndjson");
  EXPECT_EQ(rows.size(), 3u * 2u * 2u);  // configurations x classes x seeds
  for (const auto& v : ablation_variants()) {
    EXPECT_NE(r.out.find(v.name), std::string::npos) << v.name;
    EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [&](const EvalReport& e) { return e.variant == v.name; }), 4);
  }
  // header + three configurations
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
}

TEST(Ablation, BaselineIsPlainNoAttentionNoEntropy) {
  const ArchConfig arch = toy_arch();
  TrainConfig base;
  base.batch_size = 4;
  const TrainConfig a = apply_variant(base, ablation_variants().front());
  TrainConfig b = base;
  b.use_attention = false;
  b.weights.inf = 0;
  EXPECT_EQ(a.effective_weights().inf, 0.0);
  auto sa = make_train_state<double>(arch, a);
  auto sb = make_train_state<double>(arch, b);
  std::mt19937_64 rng(5);
  const auto x = random_tensor<double>({4, 1, 8, 8}, rng);
  for (int i = 0; i < 3; ++i) {
    const auto la = train_step(sa, x);
    const auto lb = train_step(sb, x);
    EXPECT_EQ(la.total, lb.total);
  }
  auto ta = sa.model.generator.tensors();
  auto tb = sb.model.generator.tensors();
  ASSERT_EQ(ta.size(), tb.size());
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(ta[i].tensor->vec(), tb[i].tensor->vec()) << ta[i].name;
}

}  // namespace
}  // namespace novelty
