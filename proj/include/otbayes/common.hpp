// Copyright 2026 The otbayes Authors
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

#ifndef OTBAYES_COMMON_HPP
#define OTBAYES_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace otbayes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Error raised by every precondition or numerical failure in the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Seeded random stream. Every stochastic routine takes one of these by
/// reference; there is no global generator.
///
/// Streams are splittable: `split(k)` derives an independent child stream
/// from the parent seed and a stream index, without advancing the parent.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(make_seed(seed, stream)) {}

  [[nodiscard]] RandomStream split(std::uint64_t index) const {
    return RandomStream{seed_, stream_ * 0x9E3779B97F4A7C15ULL + index + 1};
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    }
    return m;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::mt19937_64 make_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64{seq};
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw Error(std::string("dimension mismatch in ") + what + ": got " + std::to_string(got) +
                ", expected " + std::to_string(want));
  }
}

}  // namespace detail

}  // namespace otbayes

#endif  // OTBAYES_COMMON_HPP
