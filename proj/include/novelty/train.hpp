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

// Alternating adversarial training: one discriminator update followed by one
// generator update per batch, Adam for both, per-epoch validation with
// best-checkpoint selection, and a versioned binary checkpoint format.

#pragma once

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelty/data.hpp"
#include "novelty/losses.hpp"
#include "novelty/model.hpp"
#include "novelty/optimizer.hpp"

namespace novelty {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 15;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossWeights weights;
  NoiseConfig noise;
  bool use_attention = true;
  bool use_entropy = true;
  double grad_clip = 0;      // global-norm clipping, 0 = off
  bool select_best = true;   // keep the epoch with the lowest validation loss

  void validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0)) throw ConfigError("adam_eps must be > 0");
    if (!(grad_clip >= 0)) throw ConfigError("grad_clip must be >= 0");
    weights.validate();
    noise.validate();
  }

  /// Loss weights actually optimized: the entropy term is dropped when disabled.
  LossWeights effective_weights() const {
    LossWeights w = weights;
    if (!use_entropy) w.inf = 0;
    return w;
  }

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},   {"epochs", c.epochs},
       {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},   {"adam_eps", c.adam_eps},
       {"seed", c.seed},                   {"lambda_adv", c.weights.adv},  {"lambda_con", c.weights.con},
       {"lambda_fea", c.weights.fea},      {"lambda_inf", c.weights.inf},  {"noise_sigma", c.noise.sigma},
       {"use_attention", c.use_attention}, {"use_entropy", c.use_entropy}, {"grad_clip", c.grad_clip},
       {"select_best", c.select_best}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.learning_rate = j.at("learning_rate");
  c.batch_size = j.at("batch_size");
  c.epochs = j.at("epochs");
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.adam_eps = j.at("adam_eps");
  c.seed = j.at("seed");
  c.weights = {j.at("lambda_adv"), j.at("lambda_con"), j.at("lambda_fea"), j.at("lambda_inf")};
  c.noise.sigma = j.at("noise_sigma");
  c.use_attention = j.at("use_attention");
  c.use_entropy = j.at("use_entropy");
  c.grad_clip = j.at("grad_clip");
  c.select_best = j.at("select_best");
}

/// Short stable hash of the architecture and training configuration.
inline std::string config_fingerprint(const ArchConfig& arch, const TrainConfig& cfg) {
  const std::string s = nlohmann::json{{"arch", arch}, {"train", cfg}}.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Everything needed to continue or reproduce a run.
template <typename T>
struct TrainState {
  ArchConfig arch;
  TrainConfig cfg;
  ModelParams<T> model;
  Adam<GeneratorParams<T>> opt_g;
  Adam<DiscriminatorParams<T>> opt_d;
  std::mt19937_64 rng;
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
};

/// Fresh parameters (seeded by cfg.seed), zero optimizer moments.
template <typename T>
TrainState<T> make_train_state(const ArchConfig& arch, const TrainConfig& cfg) {
  cfg.validate();
  TrainState<T> s;
  s.arch = arch;
  s.cfg = cfg;
  s.model = init_params<T>(arch, cfg.seed);
  s.opt_g = Adam<GeneratorParams<T>>(s.model.generator, cfg.adam());
  s.opt_d = Adam<DiscriminatorParams<T>>(s.model.discriminator, cfg.adam());
  s.rng.seed(cfg.seed ^ 0x9e3779b97f4a7c15ull);  // separate stream from the initializer
  return s;
}

namespace detail {

inline void require_finite_loss(double v, std::uint64_t step, const char* component) {
  if (!std::isfinite(v)) {
    throw NumericError("step " + std::to_string(step) + ": non-finite " + component + " loss");
  }
}

}  // namespace detail

/// Generator objective for a batch whose reconstruction `out` was already
/// computed from (possibly noisy) inputs; `clean` is the reconstruction target.
/// When `grads` is given, gradients of the weighted total w.r.t. the generator
/// are accumulated into it (needs the tape of the forward pass). The
/// discriminator runs in train mode, its running statistics are left alone.
template <typename T>
LossReport generator_objective(const GeneratorParams<T>& g, const DiscriminatorParams<T>& d,
                               const Tensor<T>& clean, const GeneratorOutput<T>& out,
                               const GeneratorTape<T>* tape, const LossWeights& w,
                               GeneratorParams<T>* grads, Mode d_mode = Mode::train) {
  const Tensor<T> f_x = discriminator_forward(d, clean, d_mode).features;
  DiscriminatorTape<T> dtape;
  const auto fake = discriminator_forward(d, out.x_hat, d_mode, grads ? &dtape : nullptr);

  LossReport r;
  const auto adv = adversarial_losses<T>(std::span<const T>{}, fake.prob);
  r.adv = adv.g_loss;
  r.con = context_loss(clean, out.x_hat);
  r.fea = feature_loss(f_x, fake.features);
  r.inf = entropy_loss(out.h);
  r.total = total_generator_loss(r, w);
  if (!grads) return r;

  std::vector<T> d_prob(adv.g_grad_fake.size());
  for (std::size_t i = 0; i < d_prob.size(); ++i) d_prob[i] = T(w.adv) * adv.g_grad_fake[i];
  Tensor<T> d_feat = feature_loss_grad(f_x, fake.features);
  for (auto& v : d_feat.vec()) v *= T(w.fea);
  Tensor<T> d_xhat = discriminator_backward<T>(d, dtape, d_prob, d_feat, nullptr, true);
  const Tensor<T> d_con = context_loss_grad(clean, out.x_hat);
  for (std::size_t i = 0; i < d_xhat.size(); ++i) d_xhat[i] += T(w.con) * d_con[i];
  Tensor<T> d_h;
  if (w.inf != 0) {
    d_h = entropy_loss_grad(out.h);
    for (auto& v : d_h.vec()) v *= T(w.inf);
  }
  generator_backward(g, *tape, d_xhat, d_h, *grads);
  return r;
}

/// Discriminator update on real `x` vs. the (detached) reconstruction `x_hat`.
/// Touches only the discriminator and its optimizer.
template <typename T>
AdversarialLosses<T> discriminator_update(TrainState<T>& s, const Tensor<T>& x, const Tensor<T>& x_hat) {
  auto& D = s.model.discriminator;
  DiscriminatorTape<T> real_tape, fake_tape;
  const auto real = discriminator_forward(D, x, Mode::train, &real_tape);
  const auto fake = discriminator_forward(D, x_hat, Mode::train, &fake_tape);
  auto adv = adversarial_losses<T>(real.prob, fake.prob);
  detail::require_finite_loss(adv.d_loss, s.step, "discriminator");
  auto grads = zeros_like(D);
  discriminator_backward<T>(D, real_tape, adv.d_grad_real, {}, &grads, false);
  discriminator_backward<T>(D, fake_tape, adv.d_grad_fake, {}, &grads, false);
  discriminator_update_running(D, real_tape);
  discriminator_update_running(D, fake_tape);
  if (s.cfg.grad_clip > 0) clip_grad_norm(grads, s.cfg.grad_clip);
  s.opt_d.step(D, grads);
  return adv;
}

/// Generator update from a forward pass recorded in `tape`. Touches only the
/// generator and its optimizer.
template <typename T>
LossReport generator_update(TrainState<T>& s, const Tensor<T>& x, const GeneratorOutput<T>& out,
                            const GeneratorTape<T>& tape) {
  auto& G = s.model.generator;
  auto grads = zeros_like(G);
  LossReport r = generator_objective(G, s.model.discriminator, x, out, &tape, s.cfg.effective_weights(), &grads);
  detail::require_finite_loss(r.adv, s.step, "adversarial");
  detail::require_finite_loss(r.con, s.step, "context");
  detail::require_finite_loss(r.fea, s.step, "feature");
  detail::require_finite_loss(r.inf, s.step, "entropy");
  detail::require_finite_loss(r.total, s.step, "total");
  if (s.cfg.grad_clip > 0) clip_grad_norm(grads, s.cfg.grad_clip);
  s.opt_g.step(G, grads);
  return r;
}

/// One discriminator update then one generator update on a clean batch `x`.
/// The generator sees a noise-corrupted copy and is asked to reconstruct `x`.
template <typename T>
LossReport train_step(TrainState<T>& s, const Tensor<T>& x) {
  ++s.step;
  try {
    const Tensor<T> noisy = inject_noise(x, s.cfg.noise.sigma, s.rng);
    GeneratorTape<T> tape;
    const auto out = generator_forward(s.model.generator, noisy, Mode::train, s.cfg.use_attention, &tape);
    generator_update_running(s.model.generator, tape);
    const auto adv = discriminator_update(s, x, out.x_hat);
    LossReport r = generator_update(s, x, out, tape);
    r.d_loss = adv.d_loss;
    return r;
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    if (msg.rfind("step ", 0) == 0) throw;
    throw NumericError("step " + std::to_string(s.step) + ": " + msg);
  }
}

/// Eval-mode mean generator objective over `val` (clean inputs), weighted by batch size.
template <typename T>
double validate(const ModelParams<T>& m, const TrainConfig& cfg, const Tensor<T>& val) {
  if (val.n() == 0) throw ConfigError("validation split is empty");
  const LossWeights w = cfg.effective_weights();
  double total = 0;
  for (std::size_t i = 0; i < val.n(); i += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, val.n() - i);
    const Tensor<T> x = val.slice(i, n);
    const auto out = generator_forward(m.generator, x, Mode::eval, cfg.use_attention);
    const auto r = generator_objective<T>(m.generator, m.discriminator, x, out, nullptr, w, nullptr, Mode::eval);
    total += r.total * double(n);
  }
  return total / double(val.n());
}

/// Per-epoch metrics; `val` is NaN when no validation split is available.
struct EpochRecord {
  std::size_t epoch = 0;
  double adv = 0, con = 0, fea = 0, inf = 0, total = 0, d_loss = 0;
  double val = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0;
};

inline nlohmann::json epoch_record_json(const EpochRecord& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"epoch", r.epoch}, {"adv", num(r.adv)},       {"con", num(r.con)},     {"fea", num(r.fea)},
          {"inf", num(r.inf)}, {"total", num(r.total)},  {"d_loss", num(r.d_loss)}, {"val", num(r.val)},
          {"seconds", r.seconds}};
}

template <typename T>
struct FitResult {
  TrainState<T> best;   // retained state (lowest validation loss, or final)
  TrainState<T> last;   // state after the final epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Trains for cfg.epochs over shuffled mini-batches of `train`. After each
/// epoch the validation loss is computed (when `val` is non-empty) and the
/// lowest-loss state retained; with select_best off, or without validation
/// data, the final state is retained.
template <typename T>
FitResult<T> fit(const Tensor<T>& train, const Tensor<T>& val, const ArchConfig& arch, const TrainConfig& cfg,
                 const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (train.n() == 0) throw ConfigError("training split is empty");
  if (train.c() != arch.image_channels || train.h() != arch.image_size) {
    throw ConfigError("training images " + to_string(train.shape()) + " do not match the architecture");
  }
  FitResult<T> res{make_train_state<T>(arch, cfg), {}, {}, 0};
  TrainState<T>& s = res.best;  // trained in place, copied out as `last` at the end
  std::optional<TrainState<T>> best;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = e;
    std::size_t seen = 0;
    for (const auto& idx : make_batches(train.n(), cfg.batch_size, s.rng)) {
      const LossReport r = train_step(s, gather_samples<T>(train, idx));
      const double n = double(idx.size());
      rec.adv += r.adv * n;
      rec.con += r.con * n;
      rec.fea += r.fea * n;
      rec.inf += r.inf * n;
      rec.total += r.total * n;
      rec.d_loss += r.d_loss * n;
      seen += idx.size();
    }
    for (double* v : {&rec.adv, &rec.con, &rec.fea, &rec.inf, &rec.total, &rec.d_loss}) *v /= double(seen);
    s.epoch = e;
    if (val.n() > 0) rec.val = validate(s.model, cfg, val);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (cfg.select_best && val.n() > 0 && rec.val < (best ? best->best_val : std::numeric_limits<double>::infinity())) {
      best = s;
      best->best_val = rec.val;
      res.best_epoch = e;
    }
  }
  res.last = s;
  if (std::isfinite(res.history.back().val)) res.last.best_val = res.history.back().val;
  if (best) {
    res.best = std::move(*best);
  } else {
    res.best = res.last;
    res.best_epoch = cfg.epochs;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout: 8-byte magic, u32 format version, u64 header length, JSON header
// (configuration, counters, tensor directory), raw little-endian tensor data
// in directory order, u32 CRC32 of everything before it.

inline constexpr char kCheckpointMagic[8] = {'N', 'V', 'L', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else return "f64";
}

template <typename T>
std::vector<std::pair<std::string, NamedTensor<T>>> checkpoint_tensors(TrainState<T>& s) {
  std::vector<std::pair<std::string, NamedTensor<T>>> out;
  auto add = [&](const std::string& group, TensorList<T> list) {
    for (auto& nt : list) out.emplace_back(group + "/" + nt.name, nt);
  };
  add("model", s.model.generator.tensors());
  add("model", s.model.discriminator.tensors());
  add("adam_g.m", s.opt_g.m.tensors());
  add("adam_g.v", s.opt_g.v.tensors());
  add("adam_d.m", s.opt_d.m.tensors());
  add("adam_d.v", s.opt_d.v.tensors());
  return out;
}

template <typename I>
void put_le(std::string& buf, I v) {
  for (std::size_t i = 0; i < sizeof(I); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename I>
I get_le(const std::uint8_t* p) {
  I v = 0;
  for (std::size_t i = 0; i < sizeof(I); ++i) v |= static_cast<I>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const TrainState<T>& state, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");
  TrainState<T>& s = const_cast<TrainState<T>&>(state);  // tensors() is non-const; nothing is modified
  auto tensors = detail::checkpoint_tensors(s);
  std::ostringstream rng_state;
  rng_state << s.rng;
  nlohmann::json dir = nlohmann::json::array();
  for (auto& [name, nt] : tensors) {
    const Shape sh = nt.tensor->shape();
    dir.push_back({{"name", name}, {"shape", {sh.n, sh.c, sh.h, sh.w}}});
  }
  const nlohmann::json header = {{"arch", s.arch},
                                 {"train", s.cfg},
                                 {"fingerprint", config_fingerprint(s.arch, s.cfg)},
                                 {"dtype", detail::dtype_name<T>()},
                                 {"epoch", s.epoch},
                                 {"step", s.step},
                                 {"adam_g_steps", s.opt_g.step_count},
                                 {"adam_d_steps", s.opt_d.step_count},
                                 {"best_val", std::isfinite(s.best_val) ? nlohmann::json(s.best_val) : nlohmann::json()},
                                 {"rng", rng_state.str()},
                                 {"tensors", dir}};
  const std::string hs = header.dump();
  std::string buf(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le<std::uint32_t>(buf, kCheckpointVersion);
  detail::put_le<std::uint64_t>(buf, hs.size());
  buf += hs;
  for (auto& [name, nt] : tensors) {
    buf.append(reinterpret_cast<const char*>(nt.tensor->data()), nt.tensor->size() * sizeof(T));
  }
  const auto crc = detail::crc32_of({reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()});
  detail::put_le<std::uint32_t>(buf, crc);

  // write-then-rename so a crash never leaves a half-written checkpoint behind
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Loads a checkpoint into a fresh state. Throws IncompatibleError for a
/// different format version or dtype and IntegrityError for damaged files;
/// nothing is returned unless every tensor was read.
template <typename T>
TrainState<T> load_checkpoint(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  const std::size_t fixed = sizeof kCheckpointMagic + 4 + 8;
  if (bytes.size() < fixed + 4) throw IntegrityError(path.string() + ": truncated checkpoint");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw IntegrityError(path.string() + ": not a checkpoint file");
  }
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kCheckpointVersion) {
    throw IncompatibleError(path.string() + ": checkpoint format version " + std::to_string(version) +
                            ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  const std::size_t body = bytes.size() - 4;
  if (detail::crc32_of({bytes.data(), body}) != detail::get_le<std::uint32_t>(bytes.data() + body)) {
    throw IntegrityError(path.string() + ": checksum mismatch (truncated or corrupted)");
  }
  const auto hlen = detail::get_le<std::uint64_t>(bytes.data() + 12);
  if (fixed + hlen > body) throw IntegrityError(path.string() + ": header overruns file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + fixed, bytes.begin() + fixed + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": unreadable header: " + e.what());
  }
  if (header.at("dtype") != detail::dtype_name<T>()) {
    throw IncompatibleError(path.string() + ": checkpoint holds " + header.at("dtype").get<std::string>() +
                            " tensors");
  }

  TrainState<T> s = make_train_state<T>(header.at("arch").get<ArchConfig>(), header.at("train").get<TrainConfig>());
  auto tensors = detail::checkpoint_tensors(s);
  const auto& dir = header.at("tensors");
  if (dir.size() != tensors.size()) throw IncompatibleError(path.string() + ": tensor directory does not match");
  std::size_t off = fixed + hlen;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, nt] = tensors[i];
    const auto shape = dir[i].at("shape").get<std::vector<std::size_t>>();
    if (dir[i].at("name") != name || !(Shape{shape[0], shape[1], shape[2], shape[3]} == nt.tensor->shape())) {
      throw IncompatibleError(path.string() + ": unexpected tensor " + dir[i].at("name").get<std::string>());
    }
    const std::size_t n = nt.tensor->size() * sizeof(T);
    if (off + n > body) throw IntegrityError(path.string() + ": tensor data truncated");
    std::memcpy(nt.tensor->data(), bytes.data() + off, n);
    off += n;
  }
  if (off != body) throw IntegrityError(path.string() + ": trailing bytes after tensor data");
  s.epoch = header.at("epoch");
  s.step = header.at("step");
  s.opt_g.step_count = header.at("adam_g_steps");
  s.opt_d.step_count = header.at("adam_d_steps");
  s.best_val = header.at("best_val").is_null() ? std::numeric_limits<double>::infinity()
                                                : header.at("best_val").get<double>();
  std::istringstream rng_state(header.at("rng").get<std::string>());
  rng_state >> s.rng;
  return s;
}

/// Warning text when a checkpoint was produced under a different configuration.
template <typename T>
std::optional<std::string> fingerprint_warning(const TrainState<T>& ckpt, const ArchConfig& arch,
                                               const TrainConfig& cfg) {
  const std::string want = config_fingerprint(arch, cfg);
  const std::string have = config_fingerprint(ckpt.arch, ckpt.cfg);
  if (want == have) return std::nullopt;
  return "checkpoint fingerprint " + have + " differs from the supplied configuration (" + want + ")";
}

}  // namespace novelty
