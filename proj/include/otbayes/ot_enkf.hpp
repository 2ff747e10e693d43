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

#ifndef OTBAYES_OT_ENKF_HPP
#define OTBAYES_OT_ENKF_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <otbayes/common.hpp>
#include <otbayes/ensemble_stats.hpp>
#include <otbayes/models.hpp>
#include <otbayes/variational.hpp>

namespace otbayes {

/// Symmetric PSD square root by eigendecomposition, negative rounding
/// noise in the spectrum clamped to zero.
inline Matrix sqrt_spd(const Matrix& m) {
  detail::require(m.rows() == m.cols(), "sqrt_spd: matrix must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error("sqrt_spd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) throw Error("sqrt_spd: eigendecomposition failed");
  Vector values = eig.eigenvalues();
  if (values.minCoeff() < -1e-10 * scale) throw Error("sqrt_spd: matrix is not PSD");
  values = values.cwiseMax(0.0).cwiseSqrt();
  Matrix r = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

/// Optimal quadratic potential for a given moment set, i.e. the map
/// x -> m_x + A (x - m_x) + K (y - m_y).
struct EnkfSolution {
  QuadraticPotential potential;
  MomentSet moments;
  std::vector<std::string> warnings;

  [[nodiscard]] const Matrix& a() const { return potential.a(); }
  [[nodiscard]] const Matrix& k() const { return potential.k(); }

  [[nodiscard]] Vector transport(const Vector& x, const Vector& y) const {
    return quad_gradient_map(potential, x, y);
  }
};

namespace detail {

// Factorizes sigma_y, regularizing when it is ill-conditioned.
inline Eigen::LLT<Matrix> factor_observation_cov(const Matrix& sigma_y, std::vector<std::string>& warnings) {
  const auto m = sigma_y.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_y, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(top > 0.0) || bottom <= 1e-14 * top) throw Error("degenerate moments: sigma_y is singular");
  Matrix s = sigma_y;
  if (bottom < 1e-10 * top) {
    const double eps = 1e-8 * sigma_y.trace() / static_cast<double>(m);
    s += eps * Matrix::Identity(m, m);
    warnings.push_back("sigma_y is near-singular; regularized with eps = " + std::to_string(eps));
  }
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw Error("degenerate moments: sigma_y is not positive definite");
  return llt;
}

}  // namespace detail

/// K = Sigma_xy Sigma_y^{-1}.
inline Matrix kalman_gain(const MomentSet& mom, std::vector<std::string>* warnings = nullptr) {
  std::vector<std::string> sink;
  const auto llt = detail::factor_observation_cov(mom.sigma_y, warnings != nullptr ? *warnings : sink);
  return llt.solve(mom.sigma_xy.transpose()).transpose();
}

/// Coefficients of x -> A x + K y + b. `rank_deficient` marks a singular
/// Sigma_x - K Sigma_y K^T, where A is only PSD and the ensemble is squeezed
/// onto a lower-dimensional set.
struct AffineUpdate {
  Matrix a;
  Matrix k;
  Vector b;
  bool rank_deficient = false;
  std::vector<std::string> warnings;
};

inline AffineUpdate prop1_map(const MomentSet& mom) {
  const auto n = mom.x_dim();
  const auto m = mom.y_dim();
  detail::check_moments(mom, n, m);
  AffineUpdate out;
  out.k = kalman_gain(mom, &out.warnings);

  Eigen::SelfAdjointEigenSolver<Matrix> eig_x(mom.sigma_x, Eigen::EigenvaluesOnly);
  const double top = eig_x.eigenvalues().maxCoeff();
  if (!(top > 0.0) || eig_x.eigenvalues().minCoeff() <= 1e-14 * top) {
    throw Error("degenerate moments: sigma_x is singular");
  }

  Matrix schur = mom.sigma_x - out.k * mom.sigma_xy.transpose();
  schur = 0.5 * (schur + schur.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig_s(schur, Eigen::EigenvaluesOnly);
  if (eig_s.eigenvalues().minCoeff() < -1e-10 * top) {
    throw Error("inconsistent moments: sigma_x - K sigma_y K^T is not PSD");
  }
  out.rank_deficient = eig_s.eigenvalues().minCoeff() <= 1e-14 * top;

  const Matrix root = sqrt_spd(mom.sigma_x);
  const Eigen::LLT<Matrix> root_llt(root);
  const Matrix root_inv = root_llt.solve(Matrix::Identity(n, n));
  Matrix inner = root * schur * root;
  inner = 0.5 * (inner + inner.transpose());
  out.a = root_inv * sqrt_spd(inner) * root_inv;
  out.a = 0.5 * (out.a + out.a.transpose());
  out.b = mom.m_x - out.a * mom.m_x - out.k * mom.m_y;
  return out;
}

/// Closed-form minimizer of the quadratic dual problem:
///
///   K = Sxy Sy^{-1},
///   A = Sx^{-1/2} (Sx^{1/2} (Sx - Sxy Sy^{-1} Sxy^T) Sx^{1/2})^{1/2} Sx^{-1/2},
///
/// with the intercept chosen so that grad_x f(x, y) = m_x + A (x - m_x) + K (y - m_y).
inline EnkfSolution solve_prop1(const MomentSet& mom) {
  AffineUpdate map = prop1_map(mom);
  if (map.rank_deficient) throw Error("degenerate moments: joint covariance is singular");
  return EnkfSolution{QuadraticPotential{std::move(map.a), std::move(map.k), std::move(map.b)}, mom,
                      std::move(map.warnings)};
}

/// Applies the transport map of `solution` to every particle.
inline Ensemble apply_transport(const EnkfSolution& solution, const Ensemble& ens, const Vector& y) {
  detail::require_dim(ens.dim(), solution.potential.x_dim(), "ensemble");
  detail::require_dim(y.size(), solution.potential.y_dim(), "observation");
  const Vector shift = solution.k() * y + solution.potential.b();
  Matrix out = ens.particles() * solution.a().transpose();
  out.rowwise() += shift.transpose();
  return Ensemble{std::move(out)};
}

namespace detail {

inline void check_update_inputs(const Ensemble& ens, const JointSamples& joint, const Vector& y) {
  require(ens.size() == joint.size(), "update: ensemble and joint samples differ in particle count");
  require_dim(ens.dim(), joint.x_dim(), "update (state)");
  require_dim(y.size(), joint.y_dim(), "update (observation)");
}

}  // namespace detail

/// X^i_1 = m_x + A (X^i_0 - m_x) + K (y - m_y), all quantities estimated from `joint`.
inline Ensemble ot_enkf_update(const Ensemble& ens, const JointSamples& joint, const Vector& y) {
  detail::check_update_inputs(ens, joint, y);
  const AffineUpdate map = prop1_map(moments_of(joint));
  Matrix out = ens.particles() * map.a.transpose();
  out.rowwise() += (map.k * y + map.b).transpose();
  return Ensemble{std::move(out)};
}

/// X^i_1 = X^i_0 + K (y - Y^i), with Y^i the simulated observations in `joint`.
inline Ensemble perturbed_enkf_update(const Ensemble& ens, const JointSamples& joint, const Vector& y) {
  detail::check_update_inputs(ens, joint, y);
  const Matrix k = kalman_gain(moments_of(joint));
  Matrix innovation = (-joint.y()).rowwise() + y.transpose();
  return Ensemble{ens.particles() + innovation * k.transpose()};
}

enum class UpdateMethod { kOptimalTransport, kPerturbed };

struct FilterStep {
  Ensemble forecast;
  JointSamples joint;
  Ensemble posterior;
};

/// Forecast/analysis loop. Step t propagates every particle through
/// `dynamics`, simulates Y^i ~ P_{Y|X}(.|X^i) and conditions on
/// observations[t] with the selected update.
///
/// Stream layout: prior draws use split(0), the dynamics of step t use
/// split(2t + 1) and the simulated observations split(2t + 2).
inline std::vector<FilterStep> sequential_filter(const PriorSampler& prior, const Dynamics& dynamics,
                                                 const ObservationModel& obs,
                                                 const std::vector<Vector>& observations, UpdateMethod method,
                                                 Eigen::Index n_particles, std::uint64_t seed) {
  detail::require(n_particles >= 2, "sequential filter needs at least two particles");
  RandomStream root(seed);
  RandomStream prior_rng = root.split(0);
  Matrix current = sample_prior(prior, n_particles, prior_rng);

  std::vector<FilterStep> steps;
  steps.reserve(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) {
    RandomStream dyn_rng = root.split(2 * t + 1);
    RandomStream obs_rng = root.split(2 * t + 2);
    Matrix forecast(current.rows(), current.cols());
    for (Eigen::Index i = 0; i < current.rows(); ++i) {
      forecast.row(i) = dynamics(current.row(i).transpose(), dyn_rng).transpose();
    }
    Matrix y_sim = obs.simulate(forecast, obs_rng);
    JointSamples joint{forecast, std::move(y_sim)};
    Ensemble prior_ens{std::move(forecast)};
    Ensemble posterior = method == UpdateMethod::kOptimalTransport
                             ? ot_enkf_update(prior_ens, joint, observations[t])
                             : perturbed_enkf_update(prior_ens, joint, observations[t]);
    current = posterior.particles();
    steps.push_back(FilterStep{std::move(prior_ens), std::move(joint), std::move(posterior)});
  }
  return steps;
}

}  // namespace otbayes

#endif  // OTBAYES_OT_ENKF_HPP
