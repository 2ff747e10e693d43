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

#ifndef OTBAYES_MODELS_HPP
#define OTBAYES_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <otbayes/common.hpp>
#include <otbayes/ensemble_stats.hpp>

namespace otbayes {

using PriorSampler = std::function<Vector(RandomStream&)>;
using Dynamics = std::function<Vector(const Vector&, RandomStream&)>;

/// Simulator for Y ~ P_{Y|X}(.|x). Algorithms only ever see the sampler;
/// analytic likelihoods live in `ModelOracle`.
struct ObservationModel {
  std::function<Vector(const Vector&, RandomStream&)> sample;
  Eigen::Index dim = 0;

  /// One observation per row of `x`.
  [[nodiscard]] Matrix simulate(const Matrix& x, RandomStream& rng) const {
    Matrix y(x.rows(), dim);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Vector yi = sample(x.row(i).transpose(), rng);
      detail::require_dim(yi.size(), dim, "observation sampler output");
      y.row(i) = yi.transpose();
    }
    return y;
  }
};

inline Matrix sample_prior(const PriorSampler& prior, Eigen::Index n_particles, RandomStream& rng) {
  detail::require(n_particles >= 1, "empty ensemble");
  Vector first = prior(rng);
  Matrix out(n_particles, first.size());
  out.row(0) = first.transpose();
  for (Eigen::Index i = 1; i < n_particles; ++i) out.row(i) = prior(rng).transpose();
  return out;
}

/// Draws N joint samples: X^i from the prior, then Y^i from the simulator.
inline JointSamples sample_joint(const PriorSampler& prior, const ObservationModel& obs,
                                 Eigen::Index n_particles, RandomStream& rng) {
  Matrix x = sample_prior(prior, n_particles, rng);
  Matrix y = obs.simulate(x, rng);
  return {std::move(x), std::move(y)};
}

inline double normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

class GaussianMixture1D {
 public:
  GaussianMixture1D(std::vector<double> weights, std::vector<double> means, std::vector<double> variances)
      : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
    detail::require(!weights_.empty(), "mixture needs at least one component");
    detail::require(weights_.size() == means_.size() && means_.size() == variances_.size(),
                    "mixture: component arrays differ in length");
    double total = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
      detail::require(weights_[k] >= 0.0, "mixture: negative weight");
      detail::require(variances_[k] > 0.0, "mixture: variance must be positive");
      total += weights_[k];
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "mixture: weights must sum to 1");
  }

  [[nodiscard]] std::size_t components() const { return weights_.size(); }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<double>& means() const { return means_; }
  [[nodiscard]] const std::vector<double>& variances() const { return variances_; }

  [[nodiscard]] double density(double x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < components(); ++k) p += weights_[k] * normal_pdf(x, means_[k], variances_[k]);
    return p;
  }

  [[nodiscard]] double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < components(); ++k) m += weights_[k] * means_[k];
    return m;
  }

  [[nodiscard]] double variance() const {
    const double m = mean();
    double v = 0.0;
    for (std::size_t k = 0; k < components(); ++k) {
      v += weights_[k] * (variances_[k] + (means_[k] - m) * (means_[k] - m));
    }
    return v;
  }

  double sample(RandomStream& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < components(); ++k) {
      acc += weights_[k];
      if (u < acc) break;
    }
    return means_[k] + std::sqrt(variances_[k]) * rng.normal();
  }

 private:
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> variances_;
};

/// Exact posterior of a Gaussian-mixture prior under Y = X + noise with
/// noise variance `noise_variance`: each component is updated by Gaussian
/// conjugacy and reweighted by its evidence.
inline GaussianMixture1D mixture_posterior(const GaussianMixture1D& prior, double y, double noise_variance) {
  detail::require(noise_variance > 0.0, "mixture posterior: noise variance must be positive");
  const auto k = prior.components();
  std::vector<double> log_w(k), means(k), variances(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double mu = prior.means()[c];
    const double s2 = prior.variances()[c];
    const double total = s2 + noise_variance;
    log_w[c] = prior.weights()[c] > 0.0
                   ? std::log(prior.weights()[c]) - 0.5 * std::log(total) - 0.5 * (y - mu) * (y - mu) / total
                   : -std::numeric_limits<double>::infinity();
    means[c] = (noise_variance * mu + s2 * y) / total;
    variances[c] = s2 * noise_variance / total;
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(k);
  double norm = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    w[c] = std::exp(log_w[c] - top);
    norm += w[c];
  }
  for (auto& wc : w) wc /= norm;
  return {std::move(w), std::move(means), std::move(variances)};
}

struct GaussianPosterior {
  Vector mean;
  Matrix cov;
};

/// Gaussian conditioning of N(mean, cov) on y = H x + v, v ~ N(0, R).
inline GaussianPosterior kalman_oracle(const Vector& mean, const Matrix& cov, const Matrix& h, const Matrix& r,
                                       const Vector& y) {
  const auto n = mean.size();
  detail::require(cov.rows() == n && cov.cols() == n, "kalman oracle: covariance shape");
  detail::require(h.cols() == n && h.rows() == y.size(), "kalman oracle: observation map shape");
  detail::require(r.rows() == y.size() && r.cols() == y.size(), "kalman oracle: noise covariance shape");
  const Matrix s = h * cov * h.transpose() + r;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw Error("kalman oracle: singular innovation covariance");
  const Matrix gain = llt.solve(h * cov).transpose();
  GaussianPosterior post;
  post.mean = mean + gain * (y - h * mean);
  post.cov = cov - gain * h * cov;
  post.cov = 0.5 * (post.cov + post.cov.transpose());
  return post;
}

struct MomentTrajectory {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Kalman-Bucy filter for a static scalar state observed through
/// dZ = c X dt + sigma_w dW, integrated by explicit Euler on the given
/// observation increments. Returns steps + 1 points, starting at the prior.
inline MomentTrajectory kalman_bucy_oracle(double prior_mean, double prior_variance, double h_coefficient,
                                           double sigma_w, double dt, const std::vector<double>& dz) {
  detail::require(sigma_w > 0.0, "kalman-bucy: sigma_w must be positive");
  detail::require(dt > 0.0, "kalman-bucy: dt must be positive");
  MomentTrajectory traj;
  traj.mean.reserve(dz.size() + 1);
  traj.variance.reserve(dz.size() + 1);
  double m = prior_mean;
  double v = prior_variance;
  traj.mean.push_back(m);
  traj.variance.push_back(v);
  const double s2 = sigma_w * sigma_w;
  for (double increment : dz) {
    const double gain = v * h_coefficient / s2;
    m += gain * (increment - h_coefficient * m * dt);
    v -= h_coefficient * h_coefficient * v * v / s2 * dt;
    traj.mean.push_back(m);
    traj.variance.push_back(v);
  }
  return traj;
}

struct SamplingMetrics {
  double energy_distance = 0.0;
  double mean_gap = 0.0;
  double variance_gap = 0.0;
};

namespace detail {

// Sum over unordered pairs of |v_i - v_j| for a sorted vector.
inline double pairwise_abs_sum_sorted(const std::vector<double>& v) {
  double total = 0.0;
  const auto n = static_cast<double>(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) total += (2.0 * static_cast<double>(k) - n + 1.0) * v[k];
  return total;
}

inline double energy_distance_1d(const Matrix& a, const Matrix& b) {
  std::vector<double> va(a.data(), a.data() + a.size());
  std::vector<double> vb(b.data(), b.data() + b.size());
  std::vector<double> all(va);
  all.insert(all.end(), vb.begin(), vb.end());
  std::sort(va.begin(), va.end());
  std::sort(vb.begin(), vb.end());
  std::sort(all.begin(), all.end());
  const double uaa = pairwise_abs_sum_sorted(va);
  const double ubb = pairwise_abs_sum_sorted(vb);
  const double cross = pairwise_abs_sum_sorted(all) - uaa - ubb;
  const auto na = static_cast<double>(va.size());
  const auto nb = static_cast<double>(vb.size());
  return 2.0 * cross / (na * nb) - 2.0 * uaa / (na * na) - 2.0 * ubb / (nb * nb);
}

}  // namespace detail

/// V-statistic energy distance 2E|A-B| - E|A-A'| - E|B-B'|.
inline double energy_distance(const Matrix& a, const Matrix& b) {
  detail::require(a.rows() >= 1 && b.rows() >= 1, "energy distance: empty sample");
  detail::require(a.cols() == b.cols(), "energy distance: dimension mismatch");
  if (a.cols() == 1) return detail::energy_distance_1d(a, b);
  auto mean_dist = [](const Matrix& p, const Matrix& q) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      total += (q.rowwise() - p.row(i)).rowwise().norm().sum();
    }
    return total / (static_cast<double>(p.rows()) * static_cast<double>(q.rows()));
  };
  return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

inline SamplingMetrics sampling_metrics(const Ensemble& a, const Ensemble& b) {
  SamplingMetrics out;
  out.energy_distance = energy_distance(a.particles(), b.particles());
  out.mean_gap = (empirical_mean(a.particles()) - empirical_mean(b.particles())).norm();
  const auto cov = [](const Matrix& m) {
    return m.rows() >= 2 ? empirical_cov(m) : Matrix::Zero(m.cols(), m.cols()).eval();
  };
  out.variance_gap = (cov(a.particles()) - cov(b.particles())).norm();
  return out;
}

/// A prior plus an observation simulator, as consumed by the algorithms.
struct TestProblem {
  std::string name;
  PriorSampler prior;
  ObservationModel observation;
};

/// Analytic description of a registered problem. Only oracles and tests
/// read this; the filtering algorithms take a `TestProblem`.
struct ModelOracle {
  std::optional<GaussianMixture1D> prior_mixture;
  Vector prior_mean;
  Matrix prior_cov;
  Matrix h;
  Matrix r;

  [[nodiscard]] double likelihood(const Vector& y, const Vector& x) const {
    const Vector d = y - h * x;
    Eigen::LLT<Matrix> llt(r);
    const double quad = d.dot(llt.solve(d));
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return std::exp(-0.5 * quad - 0.5 * logdet -
                    0.5 * static_cast<double>(d.size()) * std::log(2.0 * std::numbers::pi));
  }
};

namespace detail {

inline ObservationModel additive_gaussian(Matrix h, Matrix r) {
  const Matrix chol = Eigen::LLT<Matrix>(r).matrixL();
  const auto m = h.rows();
  return ObservationModel{[h = std::move(h), chol](const Vector& x, RandomStream& rng) -> Vector {
                            return h * x + chol * rng.normal_vector(chol.rows());
                          },
                          m};
}

}  // namespace detail

inline constexpr double kBimodalComponentVariance = 0.2;
inline constexpr double kBimodalNoiseVariance = 0.2;

inline GaussianMixture1D bimodal_prior() {
  return {{0.5, 0.5}, {-1.0, 1.0}, {kBimodalComponentVariance, kBimodalComponentVariance}};
}

/// Equal-weight mixture of N(-1, 0.2) and N(+1, 0.2), observed as Y = X + W
/// with W ~ N(0, 0.2).
inline TestProblem bimodal_model() {
  const auto mixture = bimodal_prior();
  return {"bimodal",
          [mixture](RandomStream& rng) { return Vector::Constant(1, mixture.sample(rng)); },
          detail::additive_gaussian(Matrix::Identity(1, 1), Matrix::Constant(1, 1, kBimodalNoiseVariance))};
}

/// X ~ N(0, 1), Y = X + W, W ~ N(0, 1).
inline TestProblem gaussian_1d_model() {
  return {"gauss-1d", [](RandomStream& rng) { return rng.normal_vector(1); },
          detail::additive_gaussian(Matrix::Identity(1, 1), Matrix::Identity(1, 1))};
}

inline Matrix gaussian_nd_observation_map() {
  Matrix h(2, 3);
  h << 1.0, 0.5, 0.0,
       0.0, -0.5, 1.0;
  return h;
}

/// X ~ N(0, I_3), Y = H X + W with a fixed 2x3 H and W ~ N(0, I_2).
inline TestProblem gaussian_nd_model() {
  return {"gauss-nd", [](RandomStream& rng) { return rng.normal_vector(3); },
          detail::additive_gaussian(gaussian_nd_observation_map(), Matrix::Identity(2, 2))};
}

inline std::vector<std::string> model_names() { return {"bimodal", "gauss-1d", "gauss-nd"}; }

inline TestProblem make_model(const std::string& name) {
  if (name == "bimodal") return bimodal_model();
  if (name == "gauss-1d") return gaussian_1d_model();
  if (name == "gauss-nd") return gaussian_nd_model();
  throw Error("unknown model '" + name + "'");
}

inline ModelOracle model_oracle(const std::string& name) {
  ModelOracle o;
  if (name == "bimodal") {
    o.prior_mixture = bimodal_prior();
    o.prior_mean = Vector::Constant(1, o.prior_mixture->mean());
    o.prior_cov = Matrix::Constant(1, 1, o.prior_mixture->variance());
    o.h = Matrix::Identity(1, 1);
    o.r = Matrix::Constant(1, 1, kBimodalNoiseVariance);
  } else if (name == "gauss-1d") {
    o.prior_mixture = GaussianMixture1D({1.0}, {0.0}, {1.0});
    o.prior_mean = Vector::Zero(1);
    o.prior_cov = Matrix::Identity(1, 1);
    o.h = Matrix::Identity(1, 1);
    o.r = Matrix::Identity(1, 1);
  } else if (name == "gauss-nd") {
    o.prior_mean = Vector::Zero(3);
    o.prior_cov = Matrix::Identity(3, 3);
    o.h = gaussian_nd_observation_map();
    o.r = Matrix::Identity(2, 2);
  } else {
    throw Error("unknown model '" + name + "'");
  }
  return o;
}

}  // namespace otbayes

#endif  // OTBAYES_MODELS_HPP
