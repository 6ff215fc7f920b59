// Copyright 2026 The tsood Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TSOOD_COMMON_HPP_
#define TSOOD_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsood {

/// Base class for every error the library throws.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Kernel received tensors whose shapes do not fit; message names the
/// kernel and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Kernel received NaN/Inf input, or a computation diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autodiff tape (non-scalar loss, consumed tape, mixed tapes).
class TapeError : public Error {
 public:
  using Error::Error;
};

/// `.ts` file rejected; `kind` tells the test/caller which rule fired.
class ParseError : public Error {
 public:
  enum class Kind {
    MissingHeader,
    UnequalLength,
    DimensionMismatch,
    UnknownClass,
    MalformedNumber,
  };
  ParseError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
  Kind kind;
};

/// Bad configuration value (unknown scorer, invalid augmentation kind, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset-level violation: empty split side, too few samples per class,
/// anchor without a positive, single-class metric input.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to reach its tolerance; carries the residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, double res)
      : Error(msg), residual(res) {}
  double residual;
};

/// Sequencing violation, e.g. reading OOD test data before scorers are fit.
class LogicError : public Error {
 public:
  using Error::Error;
};

/// Deterministic random stream. Wraps mt19937_64 with explicit
/// distributions so results do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {
    // splitmix warmup decorrelates nearby seeds
    for (int i = 0; i < 4; ++i) next();
  }

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  int64_t randint(int64_t n) {
    return n <= 0 ? 0 : int64_t(next() % uint64_t(n));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle of an index vector.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = int64_t(v.size()) - 1; i > 0; --i) {
      std::swap(v[size_t(i)], v[size_t(randint(i + 1))]);
    }
  }

  /// Derives an independent stream, for per-sample / per-epoch seeding.
  Rng fork(uint64_t salt) {
    return Rng(state_ ^ (0x632be59bd9b4e019ull * (salt + 1)));
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a over a byte string; used for config digests.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(uint64_t v);

}  // namespace tsood

#endif  // TSOOD_COMMON_HPP_
