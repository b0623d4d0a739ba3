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

// Command-line front end: `novelty <train|eval|ablate|report> [--config=FILE]
// [--some-key=VALUE ...]`. Exit status 0 on success, 1 on runtime failure,
// 2 on usage errors (bad flags, unknown or ill-typed config keys, missing
// dataset directory or checkpoint).

#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "novelty/config.hpp"
#include "novelty/experiment.hpp"

namespace novelty {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace cli_detail {

namespace fs = std::filesystem;

inline std::string kebab(std::string s) {
  for (auto& ch : s) {
    if (ch == '_') ch = '-';
  }
  return s;
}

struct Dirs {
  fs::path root, checkpoints, logs, reports;
};

// Creates the run directory layout and echoes the resolved configuration.
inline Dirs prepare_run(const ExperimentConfig& cfg, const std::string& verb) {
  Dirs d{cfg.out_path(), cfg.out_path() / "checkpoints", cfg.out_path() / "logs", cfg.out_path() / "reports"};
  for (const auto& p : {d.root, d.checkpoints, d.logs, d.reports}) fs::create_directories(p);
  std::ofstream(d.root / ("config." + verb + ".json")) << config_to_json(cfg).dump(2) << "\n";
  return d;
}

inline DatasetBundle load_data(const ExperimentConfig& cfg) {
  const fs::path root = cfg.data_path();
  if (!fs::is_directory(root)) throw ConfigError("dataset directory not found: " + root.string());
  return load_dataset(cfg.dataset, root);
}

inline ProgressFn progress_printer(std::ostream& err) {
  return [&err](const std::string& tag, const EpochRecord* r) {
    if (!r) {
      err << "[" << tag << "]\n";
      return;
    }
    char buf[256];
    std::snprintf(buf, sizeof buf, "[%s] epoch %zu: total %.4f (adv %.3f con %.4f fea %.4f inf %.3f) d %.3f val %.4f %.1fs",
                  tag.c_str(), r->epoch, r->total, r->adv, r->con, r->fea, r->inf, r->d_loss, r->val, r->seconds);
    err << buf << "\n";
  };
}

inline std::string scores_file_name(const EvalReport& r) {
  return "scores_" + r.dataset + "_" + std::to_string(r.inlier_class) + ".csv";
}

inline void write_scores(const fs::path& path, const ScoredSplit& s) {
  std::ofstream out(path);
  out << "index,score,normalized,label\n";
  out.precision(10);
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    out << i << "," << s.scores[i] << "," << s.normalized[i] << "," << s.labels[i] << "\n";
  }
}

inline std::vector<EvalReport> read_reports(const fs::path& ndjson) {
  std::vector<EvalReport> out;
  std::ifstream in(ndjson);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(eval_report_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

inline void append_report(const fs::path& ndjson, const EvalReport& r) {
  std::ofstream(ndjson, std::ios::app) << to_json(r).dump() << "\n";
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const DatasetBundle data = load_data(cfg);
  const Dirs dirs = prepare_run(cfg, "train");
  const OneClassSplit split = make_split(data, cfg.inlier_class, cfg.train.seed, cfg.max_train);
  const SplitData d = materialize(data, split, cfg.arch.image_size);
  err << "training on " << d.train.n() << " samples (" << d.val.n() << " validation) of " << to_string(cfg.dataset)
      << " class " << cfg.inlier_class << "\n";
  std::ofstream log(dirs.logs / "train.ndjson", std::ios::trunc);
  const auto print = progress_printer(err);
  const std::string tag = "train " + to_string(cfg.dataset) + " class " + std::to_string(cfg.inlier_class);
  auto res = fit(d.train, d.val, cfg.arch, cfg.train, [&](const EpochRecord& r) {
    log << epoch_record_json(r).dump() << "\n" << std::flush;
    print(tag, &r);
  });
  save_checkpoint(res.best, dirs.checkpoints / "best.ckpt");
  save_checkpoint(res.last, dirs.checkpoints / "last.ckpt");
  out << "best epoch " << res.best_epoch << " (validation loss " << res.best.best_val << "), checkpoint "
      << (dirs.checkpoints / "best.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const fs::path ckpt = cfg.checkpoint_path();
  if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
  const TrainState<float> st = load_checkpoint<float>(ckpt);
  if (auto w = fingerprint_warning(st, cfg.arch, cfg.train)) err << "warning: " << *w << "\n";
  const DatasetBundle data = load_data(cfg);
  const Dirs dirs = prepare_run(cfg, "eval");

  EvalReport rep;
  if (cfg.dataset == DatasetKind::coil100) {
    if (cfg.coil_retrain) {
      // the protocol retrains per repeat using the checkpoint's own configuration
      rep = coil_protocol(data, cfg.inlier_class, st.arch, st.cfg, cfg.score_lambda, cfg.coil_repeats, cfg.max_train,
                          cfg.eval_batch_size, nullptr, progress_printer(err));
    } else {
      err << "warning: coil_retrain=false reuses one model across repeats; the result is not the full protocol\n";
      rep = coil_protocol(data, cfg.inlier_class, st.arch, st.cfg, cfg.score_lambda, cfg.coil_repeats, cfg.max_train,
                          cfg.eval_batch_size, &st, progress_printer(err));
    }
  } else {
    auto [r, scored] = evaluate_checkpoint(st, data, cfg.inlier_class, cfg.train.seed, cfg.score_lambda,
                                           cfg.max_train, cfg.eval_batch_size);
    rep = r;
    write_scores(dirs.reports / scores_file_name(rep), scored);
    if (scored.degenerate) err << "warning: all novelty scores are equal; normalized scores are all zero\n";
  }
  append_report(dirs.reports / "eval.ndjson", rep);
  const std::string table = format_eval_table(read_reports(dirs.reports / "eval.ndjson"));
  std::ofstream(dirs.reports / "eval.txt") << table;
  out << "AUC " << detail::fixed3(rep.auc) << " (" << rep.dataset << " class " << rep.inlier_class << ")\n";
  return kExitOk;
}

int cmd_ablate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const DatasetBundle data = load_data(cfg);
  const Dirs dirs = prepare_run(cfg, "ablate");
  const fs::path ndjson = dirs.reports / "ablation.ndjson";
  std::ofstream(ndjson, std::ios::trunc);
  const auto rows = ablation_suite(data, cfg.class_list(), cfg.seed_list(), cfg.arch, cfg.train, cfg.score_lambda,
                                   cfg.max_train, cfg.eval_batch_size, progress_printer(err),
                                   [&](const EvalReport& r) {
                                     append_report(ndjson, r);
                                     err << "[" << r.variant << "] class " << r.inlier_class << " seed "
                                         << r.seeds.front() << ": AUC " << detail::fixed3(r.auc) << "\n";
                                   });
  const std::string table = format_ablation_table(rows);
  std::ofstream(dirs.reports / "ablation.txt") << table;
  out << table;
  return kExitOk;
}

int cmd_report(const ExperimentConfig& cfg, std::ostream& out, std::ostream&) {
  const fs::path reports = cfg.out_path() / "reports";
  bool found = false;
  if (fs::exists(reports / "eval.ndjson")) {
    out << format_eval_table(read_reports(reports / "eval.ndjson")) << "\n";
    found = true;
  }
  if (fs::exists(reports / "ablation.ndjson")) {
    out << format_ablation_table(read_reports(reports / "ablation.ndjson")) << "\n";
    found = true;
  }
  if (fs::is_directory(reports)) {
    static const std::regex scores_re(R"(scores_(.+)\.csv)");
    for (const auto& e : fs::directory_iterator(reports)) {
      std::smatch m;
      const std::string name = e.path().filename().string();
      if (!std::regex_match(name, m, scores_re)) continue;
      std::ifstream in(e.path());
      std::string line;
      std::getline(in, line);  // header
      std::vector<double> scores;
      std::vector<int> labels;
      while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string idx, score, norm, label;
        std::getline(ls, idx, ',');
        std::getline(ls, score, ',');
        std::getline(ls, norm, ',');
        std::getline(ls, label, ',');
        scores.push_back(std::stod(score));
        labels.push_back(std::stoi(label));
      }
      const fs::path roc = reports / ("roc_" + std::string(m[1]) + ".csv");
      std::ofstream r(roc);
      r << "fpr,tpr\n";
      r.precision(10);
      for (const auto& [fpr, tpr] : roc_curve(scores, labels)) r << fpr << "," << tpr << "\n";
      out << "ROC data: " << roc.string() << "\n";
      found = true;
    }
  }
  if (!found) throw Error("no reports under " + reports.string() + "; run eval or ablate first");
  return kExitOk;
}

}  // namespace cli_detail

/// Entry point of the `novelty` executable; returns the process exit status.
inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"One-class novelty detection: adversarial denoising auto-encoder with channel attention"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all commands");

  std::optional<std::string> config_file;
  std::map<std::string, std::string> raw;
  std::map<std::string, std::optional<std::string>> flags;
  for (const auto& k : config_keys()) flags[k.name];

  struct Verb {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&, std::ostream&, std::ostream&);
  };
  const Verb verbs[] = {
      {"train", "train on one inlier class and write checkpoints + epoch log", cli_detail::cmd_train},
      {"eval", "score the test split with a checkpoint and report ROC-AUC", cli_detail::cmd_eval},
      {"ablate", "train and evaluate the three ablation configurations", cli_detail::cmd_ablate},
      {"report", "print stored report tables and write ROC curve data", cli_detail::cmd_report},
  };
  std::vector<std::pair<CLI::App*, const Verb*>> subs;
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    sub->add_option("-c,--config", config_file, "flat JSON config file")->type_name("FILE");
    for (const auto& k : config_keys()) {
      sub->add_option("--" + cli_detail::kebab(k.name), flags[k.name],
                      std::string(k.help) + " (default " + k.default_value.dump() + ")")
          ->type_name("VALUE");
    }
    subs.emplace_back(sub, &v);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (const auto& [k, v] : flags) {
      if (v) raw[k] = *v;
    }
    const ExperimentConfig cfg =
        load_config(config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt, raw);
    for (const auto& [sub, verb] : subs) {
      if (sub->parsed()) return verb->run(cfg, out, err);
    }
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace novelty
