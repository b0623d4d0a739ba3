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

// Dataset readers (MNIST IDX, CIFAR-10 binary batches, COIL-100 PNG
// directories), one-class splits, preprocessing and training noise.

#pragma once

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "novelty/error.hpp"
#include "novelty/tensor.hpp"

namespace novelty {

namespace fs = std::filesystem;

enum class DatasetKind { mnist, cifar10, coil100 };

inline std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::cifar10: return "cifar10";
    case DatasetKind::coil100: return "coil100";
  }
  return "?";
}

inline DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "mnist") return DatasetKind::mnist;
  if (s == "cifar10") return DatasetKind::cifar10;
  if (s == "coil100") return DatasetKind::coil100;
  throw ConfigError("unknown dataset '" + s + "' (expected mnist, cifar10 or coil100)");
}

inline std::size_t dataset_channels(DatasetKind k) { return k == DatasetKind::mnist ? 1 : 3; }

/// 8-bit images in planar [N, C, H, W] order with integer class labels.
struct RawImages {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_bytes() const { return channels * height * width; }
  const std::uint8_t* image(std::size_t i) const { return pixels.data() + i * image_bytes(); }
};

/// The official train / test pools. COIL-100 has no official split, so
/// everything lives in `train` and `test` stays empty.
struct DatasetBundle {
  DatasetKind kind = DatasetKind::mnist;
  RawImages train;
  RawImages test;
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | p[3];
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed in chunks for files > 4 GiB
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

/// Reads an optional `CHECKSUMS` file (lines of "<crc32 hex> <file name>")
/// from `dir`. Returns an empty map when the file does not exist.
inline std::map<std::string, std::uint32_t> read_checksums(const fs::path& dir) {
  std::map<std::string, std::uint32_t> out;
  const fs::path p = dir / "CHECKSUMS";
  if (!fs::exists(p)) return out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string hex, name;
    if (!(ls >> hex >> name)) continue;
    out[name] = static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16));
  }
  return out;
}

/// Reads a file and, if `checksums` lists it, verifies its CRC32.
inline std::vector<std::uint8_t> read_verified(const fs::path& path,
                                               const std::map<std::string, std::uint32_t>& checksums) {
  auto bytes = detail::read_file(path);
  auto it = checksums.find(path.filename().string());
  if (it != checksums.end() && detail::crc32_of(bytes) != it->second) {
    throw IntegrityError("checksum mismatch: " + path.string());
  }
  return bytes;
}

// ---------------------------------------------------------------------------
// MNIST

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Parses an IDX3 image file held in memory. `what` names the file in errors.
inline RawImages parse_idx_images(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() < 16) throw IntegrityError(what + ": truncated IDX header");
  if (detail::read_be32(bytes.data()) != kIdxImageMagic) throw IntegrityError(what + ": bad IDX image magic");
  const std::size_t n = detail::read_be32(bytes.data() + 4);
  const std::size_t h = detail::read_be32(bytes.data() + 8);
  const std::size_t w = detail::read_be32(bytes.data() + 12);
  if (bytes.size() != 16 + n * h * w) {
    throw IntegrityError(what + ": expected " + std::to_string(16 + n * h * w) + " bytes, found " +
                         std::to_string(bytes.size()));
  }
  RawImages out;
  out.channels = 1;
  out.height = h;
  out.width = w;
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  out.labels.assign(n, -1);
  return out;
}

inline std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() < 8) throw IntegrityError(what + ": truncated IDX header");
  if (detail::read_be32(bytes.data()) != kIdxLabelMagic) throw IntegrityError(what + ": bad IDX label magic");
  const std::size_t n = detail::read_be32(bytes.data() + 4);
  if (bytes.size() != 8 + n) throw IntegrityError(what + ": label count does not match file size");
  return {bytes.begin() + 8, bytes.end()};
}

inline RawImages load_idx_pair(const fs::path& images, const fs::path& labels,
                               const std::map<std::string, std::uint32_t>& checksums) {
  RawImages out = parse_idx_images(read_verified(images, checksums), images.string());
  out.labels = parse_idx_labels(read_verified(labels, checksums), labels.string());
  if (out.labels.size() * out.image_bytes() != out.pixels.size()) {
    throw IntegrityError(images.string() + " and " + labels.string() + " disagree on the sample count");
  }
  return out;
}

inline DatasetBundle load_mnist(const fs::path& root) {
  const auto sums = read_checksums(root);
  DatasetBundle b;
  b.kind = DatasetKind::mnist;
  b.train = load_idx_pair(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte", sums);
  b.test = load_idx_pair(root / "t10k-images-idx3-ubyte", root / "t10k-labels-idx1-ubyte", sums);
  return b;
}

// ---------------------------------------------------------------------------
// CIFAR-10

inline constexpr std::size_t kCifarRecord = 1 + 3 * 32 * 32;

inline void append_cifar_batch(std::span<const std::uint8_t> bytes, const std::string& what, RawImages& out) {
  if (bytes.empty() || bytes.size() % kCifarRecord != 0) {
    throw IntegrityError(what + ": size " + std::to_string(bytes.size()) + " is not a multiple of " +
                         std::to_string(kCifarRecord));
  }
  out.channels = 3;
  out.height = 32;
  out.width = 32;
  for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
    const int label = bytes[off];
    if (label > 9) throw IntegrityError(what + ": label " + std::to_string(label) + " out of range");
    out.labels.push_back(label);
    out.pixels.insert(out.pixels.end(), bytes.begin() + off + 1, bytes.begin() + off + kCifarRecord);
  }
}

/// Accepts either the extracted `cifar-10-batches-bin` directory or its parent.
inline DatasetBundle load_cifar10(const fs::path& root) {
  const fs::path dir = fs::exists(root / "cifar-10-batches-bin") ? root / "cifar-10-batches-bin" : root;
  const auto sums = read_checksums(dir);
  DatasetBundle b;
  b.kind = DatasetKind::cifar10;
  for (int i = 1; i <= 5; ++i) {
    const fs::path p = dir / ("data_batch_" + std::to_string(i) + ".bin");
    append_cifar_batch(read_verified(p, sums), p.string(), b.train);
  }
  const fs::path t = dir / "test_batch.bin";
  append_cifar_batch(read_verified(t, sums), t.string(), b.test);
  return b;
}

// ---------------------------------------------------------------------------
// COIL-100

struct PngImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved RGB
};

/// Decodes any PNG into 8-bit RGB.
inline PngImage read_png_rgb(const fs::path& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open " + path.string());
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&image, fp)) {
    std::fclose(fp);
    throw IntegrityError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  PngImage out;
  out.width = image.width;
  out.height = image.height;
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  const bool ok = png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr);
  std::fclose(fp);
  if (!ok) throw IntegrityError(path.string() + ": " + image.message);
  return out;
}

inline void write_png_rgb(const fs::path& path, const PngImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + image.message);
  }
}

/// Reads every obj{K}__{angle}.png under `root`; labels are K - 1. Files are
/// ordered by (object, angle) so sample indices do not depend on directory order.
inline DatasetBundle load_coil100(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("COIL-100 directory not found: " + root.string());
  const fs::path dir = fs::exists(root / "coil-100") ? root / "coil-100" : root;
  static const std::regex name_re(R"(obj(\d+)__(\d+)\.png)");
  struct Entry {
    int object, angle;
    fs::path path;
  };
  std::vector<Entry> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (!std::regex_match(name, m, name_re)) continue;
    entries.push_back({std::stoi(m[1]), std::stoi(m[2]), e.path()});
  }
  if (entries.empty()) throw IoError("no obj{K}__{angle}.png files in " + dir.string());
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return std::tie(a.object, a.angle) < std::tie(b.object, b.angle); });

  DatasetBundle b;
  b.kind = DatasetKind::coil100;
  RawImages& out = b.train;
  out.channels = 3;
  for (const auto& e : entries) {
    if (e.object < 1 || e.object > 100) throw IntegrityError(e.path.string() + ": object id outside 1..100");
    const PngImage img = read_png_rgb(e.path);
    if (out.labels.empty()) {
      out.height = img.height;
      out.width = img.width;
    } else if (img.height != out.height || img.width != out.width) {
      throw IntegrityError(e.path.string() + ": image size differs from the rest of the dataset");
    }
    const std::size_t plane = img.height * img.width;
    const std::size_t base = out.pixels.size();
    out.pixels.resize(base + 3 * plane);
    for (std::size_t i = 0; i < plane; ++i) {
      for (std::size_t c = 0; c < 3; ++c) out.pixels[base + c * plane + i] = img.rgb[i * 3 + c];
    }
    out.labels.push_back(e.object - 1);
  }
  return b;
}

inline DatasetBundle load_dataset(DatasetKind kind, const fs::path& root) {
  switch (kind) {
    case DatasetKind::mnist: return load_mnist(root);
    case DatasetKind::cifar10: return load_cifar10(root);
    case DatasetKind::coil100: return load_coil100(root);
  }
  throw ConfigError("unknown dataset kind");
}

// ---------------------------------------------------------------------------
// One-class splits

inline constexpr double kValFraction = 0.15;
inline constexpr double kCoilTrainFraction = 0.8;

/// Sample indices of a one-class experiment. `train` and `val` index
/// `bundle.train`; `test` indexes `bundle.test`, or `bundle.train` when
/// `shared_pool` is set (COIL-100).
struct OneClassSplit {
  int inlier_class = 0;
  std::uint64_t seed = 0;
  bool shared_pool = false;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::vector<int> test_labels;  // 0 inlier, 1 outlier
};

namespace detail {

inline std::vector<std::size_t> indices_of_class(const RawImages& pool, int cls) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool.labels[i] == cls) out.push_back(i);
  }
  return out;
}

inline int num_classes(DatasetKind k) { return k == DatasetKind::coil100 ? 100 : 10; }

inline void check_class(DatasetKind k, int cls) {
  if (cls < 0 || cls >= num_classes(k)) {
    throw ConfigError("inlier class " + std::to_string(cls) + " out of range for " + to_string(k));
  }
}

// Carves floor(15%) of the (already shuffled) inliers into val; the rest is train.
inline void carve_validation(std::vector<std::size_t> shuffled, std::size_t max_train, OneClassSplit& s) {
  const auto n_val = static_cast<std::size_t>(std::floor(kValFraction * double(shuffled.size())));
  s.val.assign(shuffled.begin(), shuffled.begin() + n_val);
  s.train.assign(shuffled.begin() + n_val, shuffled.end());
  if (max_train > 0 && s.train.size() > max_train) s.train.resize(max_train);
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
}

}  // namespace detail

/// MNIST / CIFAR-10 protocol: inliers of the official train split (minus a
/// 15% validation carve-out) for training, the whole official test split for
/// testing. `max_train` > 0 caps the training set after the carve-out.
inline OneClassSplit make_one_class_split(const DatasetBundle& data, int inlier_class, std::uint64_t seed,
                                          std::size_t max_train = 0) {
  if (data.kind == DatasetKind::coil100) throw ConfigError("COIL-100 uses make_coil_split");
  detail::check_class(data.kind, inlier_class);
  OneClassSplit s;
  s.inlier_class = inlier_class;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  auto inliers = detail::indices_of_class(data.train, inlier_class);
  std::shuffle(inliers.begin(), inliers.end(), rng);
  detail::carve_validation(std::move(inliers), max_train, s);
  s.test.resize(data.test.size());
  std::iota(s.test.begin(), s.test.end(), std::size_t{0});
  s.test_labels.resize(s.test.size());
  for (std::size_t i = 0; i < s.test.size(); ++i) s.test_labels[i] = data.test.labels[i] != inlier_class;
  return s;
}

/// COIL-100 protocol: 80% of the inlier views (minus the validation
/// carve-out) train; the remaining inlier views are test inliers, matched by
/// an equal number of outliers drawn uniformly from all other objects' images.
inline OneClassSplit make_coil_split(const DatasetBundle& data, int inlier_class, std::uint64_t seed,
                                     std::size_t max_train = 0) {
  if (data.kind != DatasetKind::coil100) throw ConfigError("make_coil_split needs a COIL-100 bundle");
  detail::check_class(data.kind, inlier_class);
  OneClassSplit s;
  s.inlier_class = inlier_class;
  s.seed = seed;
  s.shared_pool = true;
  std::mt19937_64 rng(seed);

  auto inliers = detail::indices_of_class(data.train, inlier_class);
  if (inliers.size() < 2) throw ConfigError("COIL-100 object " + std::to_string(inlier_class) + " has too few views");
  std::shuffle(inliers.begin(), inliers.end(), rng);
  const auto n_fit = static_cast<std::size_t>(std::floor(kCoilTrainFraction * double(inliers.size())));
  std::vector<std::size_t> fit(inliers.begin(), inliers.begin() + n_fit);
  std::vector<std::size_t> test_in(inliers.begin() + n_fit, inliers.end());
  detail::carve_validation(std::move(fit), max_train, s);

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    if (data.train.labels[i] != inlier_class) others.push_back(i);
  }
  if (others.size() < test_in.size()) throw ConfigError("not enough outlier images for the COIL-100 protocol");
  std::vector<std::size_t> test_out;
  std::sample(others.begin(), others.end(), std::back_inserter(test_out), test_in.size(), rng);

  std::sort(test_in.begin(), test_in.end());
  for (std::size_t i : test_in) {
    s.test.push_back(i);
    s.test_labels.push_back(0);
  }
  for (std::size_t i : test_out) {
    s.test.push_back(i);
    s.test_labels.push_back(1);
  }
  return s;
}

inline OneClassSplit make_split(const DatasetBundle& data, int inlier_class, std::uint64_t seed,
                                std::size_t max_train = 0) {
  return data.kind == DatasetKind::coil100 ? make_coil_split(data, inlier_class, seed, max_train)
                                           : make_one_class_split(data, inlier_class, seed, max_train);
}

inline const RawImages& test_pool(const DatasetBundle& data, const OneClassSplit& s) {
  return s.shared_pool ? data.train : data.test;
}

// ---------------------------------------------------------------------------
// Preprocessing

/// Bilinear resize of one plane with half-pixel centers and edge clamping
/// (the convention of most deep-learning toolkits' "align_corners=False").
template <typename T>
void resize_bilinear(const T* src, std::size_t sh, std::size_t sw, T* dst, std::size_t dh, std::size_t dw) {
  auto axis = [](std::size_t out, std::size_t in, std::vector<std::size_t>& i0, std::vector<std::size_t>& i1,
                 std::vector<double>& frac) {
    i0.resize(out);
    i1.resize(out);
    frac.resize(out);
    const double scale = double(in) / double(out);
    for (std::size_t o = 0; o < out; ++o) {
      const double pos = std::max(0.0, (double(o) + 0.5) * scale - 0.5);
      const auto lo = std::min(static_cast<std::size_t>(pos), in - 1);
      i0[o] = lo;
      i1[o] = std::min(lo + 1, in - 1);
      frac[o] = pos - double(lo);
    }
  };
  std::vector<std::size_t> y0, y1, x0, x1;
  std::vector<double> fy, fx;
  axis(dh, sh, y0, y1, fy);
  axis(dw, sw, x0, x1, fx);
  for (std::size_t y = 0; y < dh; ++y) {
    for (std::size_t x = 0; x < dw; ++x) {
      const double top = (1 - fx[x]) * double(src[y0[y] * sw + x0[x]]) + fx[x] * double(src[y0[y] * sw + x1[x]]);
      const double bot = (1 - fx[x]) * double(src[y1[y] * sw + x0[x]]) + fx[x] * double(src[y1[y] * sw + x1[x]]);
      dst[y * dw + x] = static_cast<T>((1 - fy[y]) * top + fy[y] * bot);
    }
  }
}

/// Maps [0, 255] linearly onto [-1, 1].
inline float scale_pixel(double v) { return static_cast<float>(v / 127.5 - 1.0); }

/// Selected raw images -> [N, C, size, size] floats in [-1, 1].
inline Tensor<float> preprocess(const RawImages& raw, std::span<const std::size_t> indices, std::size_t size) {
  const std::size_t C = raw.channels, H = raw.height, W = raw.width;
  Tensor<float> out(Shape{indices.size(), C, size, size});
  std::vector<float> plane(H * W);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= raw.size()) throw ShapeError("sample index out of range");
    const std::uint8_t* img = raw.image(indices[k]);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < H * W; ++i) plane[i] = scale_pixel(img[c * H * W + i]);
      float* dst = out.sample(k) + c * size * size;
      if (H == size && W == size) {
        std::copy(plane.begin(), plane.end(), dst);
      } else {
        resize_bilinear(plane.data(), H, W, dst, size, size);
      }
    }
  }
  return out;
}

inline Tensor<float> preprocess(const RawImages& raw, std::size_t size) {
  std::vector<std::size_t> all(raw.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return preprocess(raw, all, size);
}

/// Already-scaled batches are only resized, so applying preprocessing twice is a no-op.
inline Tensor<float> preprocess(const Tensor<float>& batch, std::size_t size) {
  if (batch.h() == size && batch.w() == size) return batch;
  Tensor<float> out(Shape{batch.n(), batch.c(), size, size});
  for (std::size_t p = 0; p < batch.n() * batch.c(); ++p) {
    resize_bilinear(batch.data() + p * batch.h() * batch.w(), batch.h(), batch.w(), out.data() + p * size * size,
                    size, size);
  }
  return out;
}

/// Preprocessed tensors of a split, ready for training and scoring.
struct SplitData {
  Tensor<float> train;
  Tensor<float> val;
  Tensor<float> test;
  std::vector<int> test_labels;
};

inline SplitData materialize(const DatasetBundle& data, const OneClassSplit& s, std::size_t size) {
  return {preprocess(data.train, s.train, size), preprocess(data.train, s.val, size),
          preprocess(test_pool(data, s), s.test, size), s.test_labels};
}

// ---------------------------------------------------------------------------
// Training noise

struct NoiseConfig {
  double sigma = 0.1;
  bool apply_at_test = false;  // kept for completeness; scoring always uses clean inputs

  void validate() const {
    if (!(sigma >= 0) || !std::isfinite(sigma)) throw ConfigError("noise sigma must be finite and >= 0");
    if (apply_at_test) throw ConfigError("noise at test time is not supported");
  }
};

/// x + N(0, sigma^2) per element, clipped to [-1, 1].
template <typename T>
Tensor<T> inject_noise(const Tensor<T>& x, double sigma, std::mt19937_64& rng) {
  Tensor<T> out = x;
  if (sigma == 0) return out;
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& v : out.vec()) v = static_cast<T>(std::clamp(double(v) + n(rng), -1.0, 1.0));
  return out;
}

/// Shuffled mini-batches of [0, n). A trailing batch of a single sample is
/// dropped (train-mode batch norm needs at least two); shuffling makes the
/// dropped sample differ between epochs.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                          std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    const std::size_t end = std::min(n, i + batch_size);
    if (end - i < 2 && !out.empty()) break;
    out.emplace_back(order.begin() + i, order.begin() + end);
  }
  return out;
}

}  // namespace novelty
