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

#ifndef OTBAYES_VARIATIONAL_HPP
#define OTBAYES_VARIATIONAL_HPP

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <otbayes/common.hpp>
#include <otbayes/ensemble_stats.hpp>

namespace otbayes {

/// f(x; y) = 1/2 x^T A x + x^T (K y + b), with A symmetric positive definite.
class QuadraticPotential {
 public:
  QuadraticPotential(Matrix a, Matrix k, Vector b)
      : a_(std::move(a)), k_(std::move(k)), b_(std::move(b)) {
    const auto n = a_.rows();
    detail::require(a_.cols() == n, "quadratic potential: A must be square");
    detail::require(k_.rows() == n, "quadratic potential: K must have n rows");
    detail::require(b_.size() == n, "quadratic potential: b must have n entries");
    detail::require(a_.allFinite() && k_.allFinite() && b_.allFinite(),
                    "quadratic potential: non-finite parameters");
    const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    detail::require((a_ - a_.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                    "quadratic potential: A is not symmetric");
    a_ = 0.5 * (a_ + a_.transpose());
    llt_.compute(a_);
    if (llt_.info() != Eigen::Success) throw Error("degenerate potential: A is not positive definite");
  }

  /// Identity potential 1/2 |x|^2, whose gradient map is the identity.
  static QuadraticPotential identity(Eigen::Index n, Eigen::Index m) {
    return {Matrix::Identity(n, n), Matrix::Zero(n, m), Vector::Zero(n)};
  }

  [[nodiscard]] const Matrix& a() const { return a_; }
  [[nodiscard]] const Matrix& k() const { return k_; }
  [[nodiscard]] const Vector& b() const { return b_; }
  [[nodiscard]] Eigen::Index x_dim() const { return a_.rows(); }
  [[nodiscard]] Eigen::Index y_dim() const { return k_.cols(); }

  /// Solves A z = v using the stored Cholesky factor.
  [[nodiscard]] Vector solve(const Vector& v) const { return llt_.solve(v); }
  [[nodiscard]] Matrix inverse() const { return llt_.solve(Matrix::Identity(x_dim(), x_dim())); }

 private:
  Matrix a_;
  Matrix k_;
  Vector b_;
  Eigen::LLT<Matrix> llt_;
};

namespace detail {

inline void check_xy(const QuadraticPotential& f, const Vector& x, const Vector& y) {
  require_dim(x.size(), f.x_dim(), "quadratic potential (x)");
  require_dim(y.size(), f.y_dim(), "quadratic potential (y)");
}

}  // namespace detail

inline double quad_eval(const QuadraticPotential& f, const Vector& x, const Vector& y) {
  detail::check_xy(f, x, y);
  return 0.5 * x.dot(f.a() * x) + x.dot(f.k() * y + f.b());
}

/// Closed-form conjugate in x for fixed y: 1/2 (x - K y - b)^T A^{-1} (x - K y - b).
inline double quad_conjugate(const QuadraticPotential& f, const Vector& x, const Vector& y) {
  detail::check_xy(f, x, y);
  const Vector r = x - f.k() * y - f.b();
  return 0.5 * r.dot(f.solve(r));
}

/// grad_x f = A x + K y + b.
inline Vector quad_gradient_map(const QuadraticPotential& f, const Vector& x, const Vector& y) {
  detail::check_xy(f, x, y);
  return f.a() * x + f.k() * y + f.b();
}

namespace detail {

inline std::vector<Vector> rows_of(const Matrix& m) {
  std::vector<Vector> rows;
  rows.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.emplace_back(m.row(i).transpose());
  return rows;
}

inline double checked(double value, Eigen::Index i, Eigen::Index j, const char* term) {
  if (!std::isfinite(value)) {
    throw Error(std::string("non-finite ") + term + " at index pair (" + std::to_string(i) + ", " +
                std::to_string(j) + ")");
  }
  return value;
}

}  // namespace detail

/// Empirical dual objective
///
///   J_N(f) = 1/N^2 sum_{i,j} f(X^i, Y^j) + 1/N sum_i f*(X^i, Y^i)
///
/// with the product-coupling term evaluated as the full double sum.
/// `f` and `f_conj` are callables `double(const Vector& x, const Vector& y)`.
template <typename F, typename FConj>
double empirical_objective(F&& f, FConj&& f_conj, const JointSamples& joint) {
  const auto xs = detail::rows_of(joint.x());
  const auto ys = detail::rows_of(joint.y());
  const auto n = joint.size();
  double product = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      row += detail::checked(f(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]), i, j,
                             "potential");
    }
    product += row;
  }
  double conjugate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    conjugate += detail::checked(f_conj(xs[k], ys[k]), i, i, "conjugate");
  }
  const double dn = static_cast<double>(n);
  return product / (dn * dn) + conjugate / dn;
}

/// O(N) approximation of `empirical_objective`: the product coupling is
/// replaced by a single random derangement pairing (X^i, Y^{pi(i)}).
/// Unbiased for J(f) but noisier than the double sum.
template <typename F, typename FConj>
double empirical_objective_paired(F&& f, FConj&& f_conj, const JointSamples& joint,
                                  RandomStream& rng) {
  const auto n = joint.size();
  detail::require(n >= 2, "paired objective needs at least two samples");
  // Sattolo's algorithm yields a single n-cycle, hence a derangement.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i - 1);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng.engine()))]);
  }
  const auto xs = detail::rows_of(joint.x());
  const auto ys = detail::rows_of(joint.y());
  double product = 0.0;
  double conjugate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const auto j = perm[k];
    product += detail::checked(f(xs[k], ys[static_cast<std::size_t>(j)]), i, j, "potential");
    conjugate += detail::checked(f_conj(xs[k], ys[k]), i, i, "conjugate");
  }
  return (product + conjugate) / static_cast<double>(n);
}

/// Exact J_N(f) for a quadratic potential. f is affine in y, so the double
/// sum over the product coupling collapses onto the mean of the y column.
inline double empirical_objective(const QuadraticPotential& f, const JointSamples& joint) {
  detail::require_dim(joint.x_dim(), f.x_dim(), "empirical objective (x)");
  detail::require_dim(joint.y_dim(), f.y_dim(), "empirical objective (y)");
  const Vector y_bar = empirical_mean(joint.y());
  const Vector shift = f.k() * y_bar + f.b();
  const auto n = joint.size();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = joint.x().row(i).transpose();
    const Vector r = x - f.k() * joint.y().row(i).transpose() - f.b();
    total += 0.5 * x.dot(f.a() * x) + x.dot(shift) + 0.5 * r.dot(f.solve(r));
  }
  return total / static_cast<double>(n);
}

/// Parameters (A, K, b~) of the reduced quadratic problem. The intercept
/// enters through the shifted b~ = b + A m_x + K m_y, which is the shift
/// that turns the intercept contribution into 1/2 (b~ - m_x)^T A^{-1} (b~ - m_x).
struct QuadraticParams {
  Matrix a;
  Matrix k;
  Vector b_tilde;
};

inline Vector shifted_intercept(const QuadraticPotential& f, const MomentSet& mom) {
  return f.b() + f.a() * mom.m_x + f.k() * mom.m_y;
}

inline QuadraticPotential potential_from(const QuadraticParams& p, const MomentSet& mom) {
  return {p.a, p.k, p.b_tilde - p.a * mom.m_x - p.k * mom.m_y};
}

namespace detail {

inline void check_moments(const MomentSet& mom, Eigen::Index n, Eigen::Index m) {
  require_dim(mom.m_x.size(), n, "moments (m_x)");
  require_dim(mom.m_y.size(), m, "moments (m_y)");
  require(mom.sigma_x.rows() == n && mom.sigma_x.cols() == n, "moments: sigma_x shape");
  require(mom.sigma_y.rows() == m && mom.sigma_y.cols() == m, "moments: sigma_y shape");
  require(mom.sigma_xy.rows() == n && mom.sigma_xy.cols() == m, "moments: sigma_xy shape");
}

}  // namespace detail

/// Reduced population objective over (A, K, b~):
///
///   1/2 Tr(A Sx) + 1/2 Tr(A^{-1} Sx) + 1/2 Tr(A^{-1} K Sy K^T)
///     - Tr(A^{-1} Sxy K^T) + 1/2 (b~ - m_x)^T A^{-1} (b~ - m_x).
///
/// It differs from the dual value J(f) by the constant m_x^T m_x
/// (see `population_dual_value`).
inline double population_objective_quadratic(const QuadraticParams& p, const MomentSet& mom) {
  const auto n = p.a.rows();
  detail::check_moments(mom, n, p.k.cols());
  Eigen::LLT<Matrix> llt(p.a);
  if (llt.info() != Eigen::Success) throw Error("degenerate potential: A is not positive definite");
  const Matrix a_inv = llt.solve(Matrix::Identity(n, n));
  const Vector d = p.b_tilde - mom.m_x;
  return 0.5 * (p.a * mom.sigma_x).trace() + 0.5 * (a_inv * mom.sigma_x).trace() +
         0.5 * (a_inv * p.k * mom.sigma_y * p.k.transpose()).trace() -
         (a_inv * mom.sigma_xy * p.k.transpose()).trace() + 0.5 * d.dot(a_inv * d);
}

inline double population_objective_quadratic(const QuadraticPotential& f, const MomentSet& mom) {
  return population_objective_quadratic(QuadraticParams{f.a(), f.k(), shifted_intercept(f, mom)}, mom);
}

/// J(f) = E_{P_X x P_Y}[f] + E_{P_XY}[f*] for a quadratic f, in closed form.
inline double population_dual_value(const QuadraticPotential& f, const MomentSet& mom) {
  return population_objective_quadratic(f, mom) + mom.m_x.squaredNorm();
}

/// Gradient of `population_objective_quadratic` with respect to (A, K, b~),
/// with the A-block symmetrized.
inline QuadraticParams population_objective_gradient(const QuadraticParams& p, const MomentSet& mom) {
  const auto n = p.a.rows();
  detail::check_moments(mom, n, p.k.cols());
  Eigen::LLT<Matrix> llt(p.a);
  if (llt.info() != Eigen::Success) throw Error("degenerate potential: A is not positive definite");
  const Matrix a_inv = llt.solve(Matrix::Identity(n, n));
  const Vector d = p.b_tilde - mom.m_x;
  const Matrix cross = mom.sigma_xy * p.k.transpose();
  const Matrix c = mom.sigma_x + p.k * mom.sigma_y * p.k.transpose() - cross - cross.transpose() +
                   d * d.transpose();
  QuadraticParams g;
  g.a = 0.5 * mom.sigma_x - 0.5 * a_inv * c * a_inv;
  g.a = 0.5 * (g.a + g.a.transpose());
  g.k = a_inv * (p.k * mom.sigma_y - mom.sigma_xy);
  g.b_tilde = a_inv * d;
  return g;
}

struct DescentOptions {
  int max_iterations = 200000;
  double gradient_tolerance = 1e-9;
  /// Stop after this many consecutive steps without a representable decrease.
  int stall_limit = 50;
  double initial_step = 1.0;
};

struct DescentResult {
  QuadraticParams params;
  int iterations = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
};

/// Minimizes `population_objective_quadratic` by gradient descent with
/// Armijo backtracking, starting from A = I, K = 0, b~ = 0. Steps that
/// leave the positive definite cone are rejected by the line search.
inline DescentResult minimize_population_objective(const MomentSet& mom,
                                                   const DescentOptions& options = {}) {
  const auto n = mom.x_dim();
  const auto m = mom.y_dim();
  QuadraticParams p{Matrix::Identity(n, n), Matrix::Zero(n, m), Vector::Zero(n)};
  auto norm2 = [](const QuadraticParams& g) {
    return g.a.squaredNorm() + g.k.squaredNorm() + g.b_tilde.squaredNorm();
  };
  auto try_objective = [&](const QuadraticParams& q, double& value) {
    Eigen::LLT<Matrix> llt(q.a);
    if (llt.info() != Eigen::Success) return false;
    value = population_objective_quadratic(q, mom);
    return std::isfinite(value);
  };

  DescentResult result;
  double value = population_objective_quadratic(p, mom);
  double step = options.initial_step;
  int stalled = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const QuadraticParams g = population_objective_gradient(p, mom);
    const double gg = norm2(g);
    result.gradient_norm = std::sqrt(gg);
    result.iterations = it;
    if (result.gradient_norm < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      QuadraticParams q{p.a - step * g.a, p.k - step * g.k, p.b_tilde - step * g.b_tilde};
      double trial = 0.0;
      if (try_objective(q, trial) && trial <= value - 1e-4 * step * gg) {
        stalled = value - trial <= 1e-15 * std::abs(value) ? stalled + 1 : 0;
        p = std::move(q);
        value = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || stalled >= options.stall_limit) break;
    step *= 2.0;
  }
  result.params = std::move(p);
  result.objective = value;
  return result;
}

}  // namespace otbayes

#endif  // OTBAYES_VARIATIONAL_HPP
