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

// Generator (denoising auto-encoder with channel attention) and
// discriminator networks.
//
// Generator, for the default 4-block configuration on 32x32 inputs:
//
//   x -> [conv s2, BN, LeakyReLU, CA] x4   32 -> 16 -> 8 -> 4 -> 2
//     -> conv (kernel 2, valid)            h, [B, t, 1, 1]
//     -> deconv (kernel 2, valid), BN, ReLU, CA     1 -> 2
//     -> [deconv s2, BN, ReLU, CA] x3      2 -> 4 -> 8 -> 16
//     -> deconv s2, tanh                   x_hat, 16 -> 32
//
// Discriminator: [conv s2, (BN), LeakyReLU] blocks, whose last output is the
// feature tap f(x), followed by a valid conv to one logit and a sigmoid.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "novelty/attention.hpp"
#include "novelty/layers.hpp"

namespace novelty {

/// Architecture hyper-parameters shared by generator and discriminator.
struct ArchConfig {
  std::size_t image_channels = 1;
  std::size_t image_size = 32;
  std::size_t latent_width = 128;
  std::vector<std::size_t> encoder_channels{64, 128, 256, 256};
  std::vector<std::size_t> discriminator_channels{64, 128, 256, 256};
  std::size_t reduction = 16;
  std::size_t kernel = 4;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  /// Spatial size after all stride-2 blocks.
  std::size_t bottom_size(std::size_t blocks) const { return image_size >> blocks; }

  void validate() const {
    if (image_channels == 0) throw ConfigError("image_channels must be positive");
    if (latent_width < 2) throw ConfigError("latent_width must be at least 2");
    if (encoder_channels.empty()) throw ConfigError("generator needs at least one block");
    if (discriminator_channels.empty()) throw ConfigError("discriminator needs at least one block");
    for (const auto* widths : {&encoder_channels, &discriminator_channels}) {
      const std::size_t blocks = widths->size();
      if (blocks >= 8 || (image_size >> blocks) == 0 || (image_size >> blocks) << blocks != image_size) {
        throw ConfigError("image_size " + std::to_string(image_size) + " is not divisible by 2^" +
                          std::to_string(blocks));
      }
      for (std::size_t c : *widths) {
        if (c == 0) throw ConfigError("block channel widths must be positive");
      }
    }
    for (std::size_t c : encoder_channels) {
      if (reduction == 0 || c % reduction != 0) {
        throw ConfigError("reduction ratio " + std::to_string(reduction) +
                          " does not divide generator block width " + std::to_string(c));
      }
    }
    if (kernel != 4) throw ConfigError("only kernel 4 (stride 2, pad 1) blocks are supported");
  }

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = {{"image_channels", a.image_channels},
       {"image_size", a.image_size},
       {"latent_width", a.latent_width},
       {"encoder_channels", a.encoder_channels},
       {"discriminator_channels", a.discriminator_channels},
       {"reduction", a.reduction},
       {"kernel", a.kernel},
       {"bn_eps", a.bn_eps},
       {"bn_momentum", a.bn_momentum}};
}

inline void from_json(const nlohmann::json& j, ArchConfig& a) {
  j.at("image_channels").get_to(a.image_channels);
  j.at("image_size").get_to(a.image_size);
  j.at("latent_width").get_to(a.latent_width);
  j.at("encoder_channels").get_to(a.encoder_channels);
  j.at("discriminator_channels").get_to(a.discriminator_channels);
  j.at("reduction").get_to(a.reduction);
  j.at("kernel").get_to(a.kernel);
  j.at("bn_eps").get_to(a.bn_eps);
  j.at("bn_momentum").get_to(a.bn_momentum);
}

// ---------------------------------------------------------------------------
// Blocks

/// {conv or deconv, optional BN, activation, optional channel attention}.
template <typename T, typename Layer>
struct Block {
  Layer layer;
  std::optional<BatchNormParams<T>> bn;
  Activation act = Activation::identity;
  std::optional<AttentionParams<T>> attention;

  void collect(const std::string& prefix, TensorList<T>& out) {
    layer.collect(prefix + ".layer", out);
    if (bn) bn->collect(prefix + ".bn", out);
    if (attention) attention->collect(prefix + ".attention", out);
  }
};

template <typename T>
struct BlockCache {
  ConvCache<T> conv;
  DeconvCache<T> deconv;
  std::optional<BatchNormCache<T>> bn;
  Tensor<T> activated;
  bool attended = false;
  AttentionCache<T> attention;
};

namespace detail {

template <typename T>
Tensor<T> layer_forward(const ConvParams<T>& p, const Tensor<T>& x, BlockCache<T>* c) {
  return conv_forward(p, x, c ? &c->conv : nullptr);
}
template <typename T>
Tensor<T> layer_forward(const DeconvParams<T>& p, const Tensor<T>& x, BlockCache<T>* c) {
  return deconv_forward(p, x, c ? &c->deconv : nullptr);
}
template <typename T>
Tensor<T> layer_backward(const ConvParams<T>& p, const BlockCache<T>& c, const Tensor<T>& dy,
                         ConvParams<T>* g, bool want_input_grad) {
  return conv_backward(p, c.conv, dy, g, want_input_grad);
}
template <typename T>
Tensor<T> layer_backward(const DeconvParams<T>& p, const BlockCache<T>& c, const Tensor<T>& dy,
                         DeconvParams<T>* g, bool want_input_grad) {
  return deconv_backward(p, c.deconv, dy, g, want_input_grad);
}

}  // namespace detail

template <typename T, typename Layer>
Tensor<T> block_forward(const Block<T, Layer>& b, const Tensor<T>& x, Mode mode, bool use_attention,
                        BlockCache<T>* cache) {
  Tensor<T> y = detail::layer_forward(b.layer, x, cache);
  if (b.bn) {
    if (cache) cache->bn.emplace();
    y = batchnorm_forward(*b.bn, y, mode, cache ? &*cache->bn : nullptr);
  }
  activate_inplace(b.act, y.span());
  const bool attend = b.attention && use_attention;
  if (cache) cache->attended = attend;
  if (!attend) {
    if (cache) cache->activated = y;
    return y;
  }
  Tensor<T> out = channel_attention(*b.attention, y, cache ? &cache->attention : nullptr);
  if (cache) cache->activated = std::move(y);
  return out;
}

template <typename T, typename Layer>
Tensor<T> block_backward(const Block<T, Layer>& b, const BlockCache<T>& cache, Tensor<T> dy,
                         Block<T, Layer>* grads, bool want_input_grad) {
  if (cache.attended) {
    dy = channel_attention_backward(*b.attention, cache.attention, dy,
                                    grads ? &*grads->attention : nullptr);
  }
  activate_backward_inplace(b.act, cache.activated.span(), dy.span());
  if (b.bn) dy = batchnorm_backward(*b.bn, *cache.bn, dy, grads ? &*grads->bn : nullptr);
  return detail::layer_backward(b.layer, cache, dy, grads ? &grads->layer : nullptr,
                                want_input_grad);
}

template <typename T, typename Layer>
void block_update_running(Block<T, Layer>& b, const BlockCache<T>& cache) {
  if (b.bn && cache.bn) batchnorm_update_running(*b.bn, *cache.bn);
}

namespace detail {

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& where) {
  if (!t.all_finite()) throw NumericError("non-finite activation in " + where);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Generator

template <typename T>
struct GeneratorParams {
  ArchConfig arch;
  std::vector<Block<T, ConvParams<T>>> encoder;
  ConvParams<T> bottleneck;
  std::vector<Block<T, DeconvParams<T>>> decoder;
  DeconvParams<T> output;

  TensorList<T> tensors() {
    TensorList<T> out;
    for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].collect("g.enc" + std::to_string(i), out);
    bottleneck.collect("g.bottleneck", out);
    for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect("g.dec" + std::to_string(i), out);
    output.collect("g.out", out);
    return out;
  }
};

template <typename T>
struct GeneratorOutput {
  Tensor<T> x_hat;  // [B, C, H, W] in [-1, 1]
  Tensor<T> h;      // [B, t, 1, 1] raw latent code
};

template <typename T>
struct GeneratorTape {
  std::vector<BlockCache<T>> encoder;
  ConvCache<T> bottleneck;
  std::vector<BlockCache<T>> decoder;
  DeconvCache<T> output;
  Tensor<T> x_hat;
};

/// Builds zero-valued parameters with the generator layout of `arch`.
template <typename T>
GeneratorParams<T> make_generator(const ArchConfig& arch) {
  arch.validate();
  GeneratorParams<T> g;
  g.arch = arch;
  const T eps = T(arch.bn_eps), mom = T(arch.bn_momentum);
  const auto& widths = arch.encoder_channels;
  std::size_t in = arch.image_channels;
  for (std::size_t w : widths) {
    Block<T, ConvParams<T>> b;
    b.layer = make_conv<T>(in, w, arch.kernel, 2, 1);
    b.bn = make_batchnorm<T>(w, eps, mom);
    b.act = Activation::leaky_relu;
    b.attention = make_attention<T>(w, arch.reduction);
    g.encoder.push_back(std::move(b));
    in = w;
  }
  const std::size_t bottom = arch.bottom_size(widths.size());
  g.bottleneck = make_conv<T>(widths.back(), arch.latent_width, bottom, 1, 0);

  // decoder block i mirrors encoder block n-1-i
  const std::size_t n = widths.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t out = widths[n - 1 - i];
    Block<T, DeconvParams<T>> b;
    b.layer = i == 0 ? make_deconv<T>(arch.latent_width, out, bottom, 1, 0)
                     : make_deconv<T>(widths[n - i], out, arch.kernel, 2, 1);
    b.bn = make_batchnorm<T>(out, eps, mom);
    b.act = Activation::relu;
    b.attention = make_attention<T>(out, arch.reduction);
    g.decoder.push_back(std::move(b));
  }
  g.output = make_deconv<T>(widths.front(), arch.image_channels, arch.kernel, 2, 1);
  return g;
}

template <typename T>
GeneratorOutput<T> generator_forward(const GeneratorParams<T>& g, const Tensor<T>& x, Mode mode,
                                     bool use_attention = true, GeneratorTape<T>* tape = nullptr) {
  if (x.c() != g.arch.image_channels || x.h() != g.arch.image_size || x.w() != g.arch.image_size) {
    throw ShapeError("generator: input " + to_string(x.shape()) + " does not match architecture");
  }
  if (tape) {
    tape->encoder.assign(g.encoder.size(), {});
    tape->decoder.assign(g.decoder.size(), {});
  }
  Tensor<T> y = x;
  for (std::size_t i = 0; i < g.encoder.size(); ++i) {
    y = block_forward(g.encoder[i], y, mode, use_attention, tape ? &tape->encoder[i] : nullptr);
    detail::require_finite(y, "generator encoder block " + std::to_string(i));
  }
  Tensor<T> h = conv_forward(g.bottleneck, y, tape ? &tape->bottleneck : nullptr);
  detail::require_finite(h, "generator bottleneck");
  y = h;
  for (std::size_t i = 0; i < g.decoder.size(); ++i) {
    y = block_forward(g.decoder[i], y, mode, use_attention, tape ? &tape->decoder[i] : nullptr);
    detail::require_finite(y, "generator decoder block " + std::to_string(i));
  }
  Tensor<T> x_hat = deconv_forward(g.output, y, tape ? &tape->output : nullptr);
  activate_inplace(Activation::tanh, x_hat.span());
  detail::require_finite(x_hat, "generator output block");
  if (tape) tape->x_hat = x_hat;
  return {std::move(x_hat), std::move(h)};
}

/// Back-propagates dL/dx_hat and dL/dh (either may be empty) into `grads`.
template <typename T>
void generator_backward(const GeneratorParams<T>& g, const GeneratorTape<T>& tape,
                        const Tensor<T>& d_xhat, const Tensor<T>& d_h, GeneratorParams<T>& grads) {
  Tensor<T> dy = d_xhat.empty() ? Tensor<T>(tape.x_hat.shape()) : d_xhat;
  activate_backward_inplace(Activation::tanh, tape.x_hat.span(), dy.span());
  dy = deconv_backward(g.output, tape.output, dy, &grads.output);
  for (std::size_t i = g.decoder.size(); i-- > 0;) {
    dy = block_backward(g.decoder[i], tape.decoder[i], std::move(dy), &grads.decoder[i], true);
  }
  if (!d_h.empty()) {
    require_same_shape(dy.shape(), d_h.shape(), "generator latent gradient");
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += d_h[i];
  }
  dy = conv_backward(g.bottleneck, tape.bottleneck, dy, &grads.bottleneck);
  for (std::size_t i = g.encoder.size(); i-- > 0;) {
    dy = block_backward(g.encoder[i], tape.encoder[i], std::move(dy), &grads.encoder[i], i > 0);
  }
}

template <typename T>
void generator_update_running(GeneratorParams<T>& g, const GeneratorTape<T>& tape) {
  for (std::size_t i = 0; i < g.encoder.size(); ++i) block_update_running(g.encoder[i], tape.encoder[i]);
  for (std::size_t i = 0; i < g.decoder.size(); ++i) block_update_running(g.decoder[i], tape.decoder[i]);
}

// ---------------------------------------------------------------------------
// Discriminator

template <typename T>
struct DiscriminatorParams {
  ArchConfig arch;
  std::vector<Block<T, ConvParams<T>>> blocks;
  ConvParams<T> head;

  std::size_t feature_dim() const {
    const std::size_t s = arch.bottom_size(blocks.size());
    return blocks.back().layer.out_channels() * s * s;
  }

  TensorList<T> tensors() {
    TensorList<T> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("d.block" + std::to_string(i), out);
    head.collect("d.head", out);
    return out;
  }
};

template <typename T>
struct DiscriminatorOutput {
  std::vector<T> prob;  // [B], in (0, 1)
  Tensor<T> features;   // [B, F_dim, 1, 1], penultimate activation
};

template <typename T>
struct DiscriminatorTape {
  std::vector<BlockCache<T>> blocks;
  Shape feature_map;
  ConvCache<T> head;
  std::vector<T> prob;
};

template <typename T>
DiscriminatorParams<T> make_discriminator(const ArchConfig& arch) {
  arch.validate();
  DiscriminatorParams<T> d;
  d.arch = arch;
  std::size_t in = arch.image_channels;
  for (std::size_t i = 0; i < arch.discriminator_channels.size(); ++i) {
    const std::size_t w = arch.discriminator_channels[i];
    Block<T, ConvParams<T>> b;
    b.layer = make_conv<T>(in, w, arch.kernel, 2, 1);
    if (i > 0) b.bn = make_batchnorm<T>(w, T(arch.bn_eps), T(arch.bn_momentum));
    b.act = Activation::leaky_relu;
    d.blocks.push_back(std::move(b));
    in = w;
  }
  d.head = make_conv<T>(in, 1, arch.bottom_size(arch.discriminator_channels.size()), 1, 0);
  return d;
}

template <typename T>
DiscriminatorOutput<T> discriminator_forward(const DiscriminatorParams<T>& d, const Tensor<T>& x,
                                             Mode mode, DiscriminatorTape<T>* tape = nullptr) {
  if (x.c() != d.arch.image_channels || x.h() != d.arch.image_size || x.w() != d.arch.image_size) {
    throw ShapeError("discriminator: input " + to_string(x.shape()) + " does not match architecture");
  }
  if (tape) tape->blocks.assign(d.blocks.size(), {});
  Tensor<T> y = x;
  for (std::size_t i = 0; i < d.blocks.size(); ++i) {
    y = block_forward(d.blocks[i], y, mode, false, tape ? &tape->blocks[i] : nullptr);
    detail::require_finite(y, "discriminator block " + std::to_string(i));
  }
  Tensor<T> logit = conv_forward(d.head, y, tape ? &tape->head : nullptr);
  detail::require_finite(logit, "discriminator head");
  DiscriminatorOutput<T> out;
  out.prob.resize(x.n());
  for (std::size_t i = 0; i < x.n(); ++i) out.prob[i] = sigmoid(logit[i]);
  if (tape) {
    tape->feature_map = y.shape();
    tape->prob = out.prob;
  }
  out.features = y.reshaped(Shape{y.n(), y.shape().per_sample(), 1, 1});
  return out;
}

/// Back-propagates dL/dprob and dL/dfeatures (either may be empty). Parameter
/// gradients are accumulated only when `grads` is non-null; the returned
/// input gradient is empty unless `want_input_grad`.
template <typename T>
Tensor<T> discriminator_backward(const DiscriminatorParams<T>& d, const DiscriminatorTape<T>& tape,
                                 std::span<const T> d_prob, const Tensor<T>& d_features,
                                 DiscriminatorParams<T>* grads, bool want_input_grad) {
  Tensor<T> dy(tape.feature_map);
  if (!d_prob.empty()) {
    Tensor<T> dlogit(tape.prob.size(), 1, 1, 1);
    for (std::size_t i = 0; i < tape.prob.size(); ++i) {
      dlogit[i] = d_prob[i] * tape.prob[i] * (T(1) - tape.prob[i]);
    }
    dy = conv_backward(d.head, tape.head, dlogit, grads ? &grads->head : nullptr);
  }
  if (!d_features.empty()) {
    if (d_features.size() != dy.size()) throw ShapeError("discriminator feature gradient size mismatch");
    for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += d_features[i];
  }
  for (std::size_t i = d.blocks.size(); i-- > 0;) {
    const bool need = i > 0 || want_input_grad;
    dy = block_backward(d.blocks[i], tape.blocks[i], std::move(dy), grads ? &grads->blocks[i] : nullptr,
                        need);
  }
  return dy;
}

template <typename T>
void discriminator_update_running(DiscriminatorParams<T>& d, const DiscriminatorTape<T>& tape) {
  for (std::size_t i = 0; i < d.blocks.size(); ++i) block_update_running(d.blocks[i], tape.blocks[i]);
}

// ---------------------------------------------------------------------------
// Initialization and parameter utilities

template <typename T>
struct ModelParams {
  GeneratorParams<T> generator;
  DiscriminatorParams<T> discriminator;
};

namespace detail {

template <typename T>
void init_tensors(TensorList<T> list, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.02);
  for (auto& nt : list) {
    const std::string& name = nt.name;
    auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    Tensor<T>& t = *nt.tensor;
    if (name.find(".attention.") != std::string::npos) continue;  // see init_dense
    if (ends_with(".gamma")) {
      for (T& v : t.vec()) v = static_cast<T>(1.0 + normal(rng));
    } else if (ends_with(".weight")) {
      for (T& v : t.vec()) v = static_cast<T>(normal(rng));
    } else if (ends_with(".running_var")) {
      t.fill(T(1));
    } else {
      t.fill(T(0));
    }
  }
}

template <typename T>
void init_dense(DenseParams<T>& p, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.in_features()));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (T& v : p.weight.vec()) v = static_cast<T>(u(rng));
  for (T& v : p.bias.vec()) v = static_cast<T>(u(rng));
}

template <typename T, typename Layer>
void init_block_attention(Block<T, Layer>& b, std::mt19937_64& rng) {
  if (!b.attention) return;
  init_dense(b.attention->fc1, rng);
  init_dense(b.attention->fc2, rng);
  init_dense(b.attention->fc3, rng);
}

}  // namespace detail

/// Deterministic initialization: conv weights ~ N(0, 0.02), BN gamma ~ N(1, 0.02),
/// biases and BN beta zero, running statistics at (0, 1), attention layers
/// uniform in +-1/sqrt(fan_in).
template <typename T>
ModelParams<T> init_params(const ArchConfig& arch, std::uint64_t seed) {
  ModelParams<T> m{make_generator<T>(arch), make_discriminator<T>(arch)};
  std::mt19937_64 rng(seed);
  detail::init_tensors(m.generator.tensors(), rng);
  for (auto& b : m.generator.encoder) detail::init_block_attention(b, rng);
  for (auto& b : m.generator.decoder) detail::init_block_attention(b, rng);
  detail::init_tensors(m.discriminator.tensors(), rng);
  return m;
}

}  // namespace novelty
