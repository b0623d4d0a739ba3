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

#pragma once

#include <stdexcept>
#include <string>

namespace novelty {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not agree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up in an activation, loss or score.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid architecture, training or experiment settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its content is truncated or inconsistent.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint was written by an incompatible format version.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

/// A metric cannot be computed for the given inputs (e.g. AUC with a single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace novelty
