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

#ifndef OTBAYES_ENSEMBLE_STATS_HPP
#define OTBAYES_ENSEMBLE_STATS_HPP

#include <algorithm>
#include <utility>
#include <vector>

#include <otbayes/common.hpp>

namespace otbayes {

/// N particles in R^n, one particle per row.
class Ensemble {
 public:
  Ensemble() = default;

  explicit Ensemble(Matrix particles) : particles_(std::move(particles)) {
    detail::require(particles_.rows() >= 1, "empty ensemble");
    detail::require(particles_.allFinite(), "ensemble contains non-finite entries");
  }

  [[nodiscard]] const Matrix& particles() const { return particles_; }
  [[nodiscard]] Eigen::Index size() const { return particles_.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return particles_.cols(); }
  [[nodiscard]] auto particle(Eigen::Index i) const { return particles_.row(i); }

 private:
  Matrix particles_;
};

/// Paired draws (X^i, Y^i) from the joint law; row i of `x` goes with row i of `y`.
class JointSamples {
 public:
  JointSamples() = default;

  JointSamples(Matrix x, Matrix y) : x_(std::move(x)), y_(std::move(y)) {
    detail::require(x_.rows() == y_.rows(), "joint samples: x and y row counts differ");
    detail::require(x_.rows() >= 1, "empty ensemble");
    detail::require(x_.allFinite() && y_.allFinite(), "joint samples contain non-finite entries");
  }

  [[nodiscard]] const Matrix& x() const { return x_; }
  [[nodiscard]] const Matrix& y() const { return y_; }
  [[nodiscard]] Eigen::Index size() const { return x_.rows(); }
  [[nodiscard]] Eigen::Index x_dim() const { return x_.cols(); }
  [[nodiscard]] Eigen::Index y_dim() const { return y_.cols(); }

  [[nodiscard]] Ensemble prior() const { return Ensemble{x_}; }

  /// Samples from the product of the marginals: the y column is paired
  /// with a uniformly shuffled x order.
  [[nodiscard]] JointSamples product_coupling(RandomStream& rng) const {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    std::shuffle(order.begin(), order.end(), rng.engine());
    Matrix shuffled(y_.rows(), y_.cols());
    for (Eigen::Index i = 0; i < size(); ++i) {
      shuffled.row(i) = y_.row(order[static_cast<std::size_t>(i)]);
    }
    return JointSamples{x_, std::move(shuffled)};
  }

 private:
  Matrix x_;
  Matrix y_;
};

/// First and second moments of a joint sample, normalized by 1/N.
struct MomentSet {
  Vector m_x;
  Vector m_y;
  Matrix sigma_x;
  Matrix sigma_y;
  Matrix sigma_xy;

  [[nodiscard]] Eigen::Index x_dim() const { return m_x.size(); }
  [[nodiscard]] Eigen::Index y_dim() const { return m_y.size(); }

  /// Covariance of the stacked vector (X, Y).
  [[nodiscard]] Matrix joint_covariance() const {
    const auto n = x_dim();
    const auto m = y_dim();
    Matrix sigma(n + m, n + m);
    sigma.topLeftCorner(n, n) = sigma_x;
    sigma.topRightCorner(n, m) = sigma_xy;
    sigma.bottomLeftCorner(m, n) = sigma_xy.transpose();
    sigma.bottomRightCorner(m, m) = sigma_y;
    return sigma;
  }
};

/// Arithmetic mean of the rows.
inline Vector empirical_mean(const Matrix& samples) {
  if (samples.rows() < 1) throw Error("empty ensemble");
  return samples.colwise().mean().transpose();
}

/// (1/N) sum_i (a_i - mean a)(b_i - mean b)^T.
inline Matrix empirical_cov(const Matrix& a, const Matrix& b) {
  detail::require(a.rows() == b.rows(), "empirical_cov: mismatched row counts");
  detail::require(a.rows() >= 2, "empirical_cov: need at least two samples");
  const Matrix ca = a.rowwise() - a.colwise().mean();
  const Matrix cb = b.rowwise() - b.colwise().mean();
  return (ca.transpose() * cb) / static_cast<double>(a.rows());
}

/// Covariance of a single sample set; exactly symmetric.
inline Matrix empirical_cov(const Matrix& a) {
  Matrix c = empirical_cov(a, a);
  return 0.5 * (c + c.transpose());
}

inline MomentSet moments_of(const JointSamples& joint) {
  MomentSet mom;
  mom.m_x = empirical_mean(joint.x());
  mom.m_y = empirical_mean(joint.y());
  mom.sigma_x = empirical_cov(joint.x());
  mom.sigma_y = empirical_cov(joint.y());
  mom.sigma_xy = empirical_cov(joint.x(), joint.y());
  return mom;
}

}  // namespace otbayes

#endif  // OTBAYES_ENSEMBLE_STATS_HPP
