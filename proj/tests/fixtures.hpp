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

// Writers for small synthetic datasets in the native on-disk formats, so the
// readers and split logic can be exercised without the real downloads.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "novelty/data.hpp"

namespace novelty::testing {

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

/// IDX image + label files with `per_class` random images of each of 10 digits.
inline void write_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                           std::size_t per_class, std::size_t side, std::mt19937_64& rng) {
  std::vector<int> ys;
  for (std::size_t k = 0; k < per_class; ++k) {
    for (int c = 0; c < 10; ++c) ys.push_back(c);
  }
  std::shuffle(ys.begin(), ys.end(), rng);
  std::vector<std::uint8_t> img, lab;
  put_be32(img, kIdxImageMagic);
  put_be32(img, static_cast<std::uint32_t>(ys.size()));
  put_be32(img, static_cast<std::uint32_t>(side));
  put_be32(img, static_cast<std::uint32_t>(side));
  put_be32(lab, kIdxLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(ys.size()));
  std::uniform_int_distribution<int> px(0, 255);
  for (int y : ys) {
    lab.push_back(static_cast<std::uint8_t>(y));
    for (std::size_t i = 0; i < side * side; ++i) img.push_back(static_cast<std::uint8_t>(px(rng)));
  }
  write_bytes(images, img);
  write_bytes(labels, lab);
}

inline void write_mnist_fixture(const std::filesystem::path& dir, std::size_t train_per_class,
                                std::size_t test_per_class, std::uint64_t seed = 1) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  write_idx_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", train_per_class, 28, rng);
  write_idx_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", test_per_class, 28, rng);
}

inline std::vector<std::uint8_t> cifar_batch_bytes(std::size_t per_class, std::mt19937_64& rng) {
  std::vector<int> ys;
  for (std::size_t k = 0; k < per_class; ++k) {
    for (int c = 0; c < 10; ++c) ys.push_back(c);
  }
  std::shuffle(ys.begin(), ys.end(), rng);
  std::uniform_int_distribution<int> px(0, 255);
  std::vector<std::uint8_t> out;
  for (int y : ys) {
    out.push_back(static_cast<std::uint8_t>(y));
    for (std::size_t i = 0; i < 3072; ++i) out.push_back(static_cast<std::uint8_t>(px(rng)));
  }
  return out;
}

/// Five training batches and one test batch, each balanced over 10 classes.
inline void write_cifar_fixture(const std::filesystem::path& dir, std::size_t per_class_per_batch,
                                std::uint64_t seed = 2) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  for (int i = 1; i <= 5; ++i) {
    write_bytes(dir / ("data_batch_" + std::to_string(i) + ".bin"), cifar_batch_bytes(per_class_per_batch, rng));
  }
  write_bytes(dir / "test_batch.bin", cifar_batch_bytes(per_class_per_batch, rng));
}

/// obj{K}__{angle}.png for `objects` objects with `views` views each (angles step 5 degrees).
inline void write_coil_fixture(const std::filesystem::path& dir, int objects, int views, std::size_t side,
                               std::uint64_t seed = 3) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> px(0, 255);
  for (int k = 1; k <= objects; ++k) {
    for (int v = 0; v < views; ++v) {
      PngImage img{side, side, std::vector<std::uint8_t>(side * side * 3)};
      for (auto& b : img.rgb) b = static_cast<std::uint8_t>(px(rng));
      write_png_rgb(dir / ("obj" + std::to_string(k) + "__" + std::to_string(v * 5) + ".png"), img);
    }
  }
}

}  // namespace novelty::testing
