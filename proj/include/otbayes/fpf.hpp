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


#ifndef OTBAYES_FPF_HPP
#define OTBAYES_FPF_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include <otbayes/common.hpp>
#include <otbayes/ensemble_stats.hpp>
#include <otbayes/models.hpp>

namespace otbayes {

using ScalarFunction = std::function<double(double)>;

/// Uniform grid x_0 < ... < x_M.
class Grid1D {
 public:
  Grid1D(double lo, double hi, Eigen::Index intervals) : lo_(lo), hi_(hi), intervals_(intervals) {
    detail::require(intervals >= 2, "grid: need at least two intervals");
    detail::require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, "grid: need finite lo < hi");
    step_ = (hi - lo) / static_cast<double>(intervals);
  }

  [[nodiscard]] Eigen::Index size() const { return intervals_ + 1; }
  [[nodiscard]] double lo() const { return lo_; }
  [[nodiscard]] double hi() const { return hi_; }
  [[nodiscard]] double step() const { return step_; }
  [[nodiscard]] double node(Eigen::Index i) const { return i == intervals_ ? hi_ : lo_ + step_ * static_cast<double>(i); }
  [[nodiscard]] bool contains(double x) const { return x >= lo_ && x <= hi_; }

  [[nodiscard]] Vector nodes() const {
    Vector v(size());
    for (Eigen::Index i = 0; i < size(); ++i) v(i) = node(i);
    return v;
  }

  [[nodiscard]] Vector evaluate(const ScalarFunction& fn) const {
    Vector v(size());
    for (Eigen::Index i = 0; i < size(); ++i) v(i) = fn(node(i));
    return v;
  }

  /// Piecewise-linear interpolation of nodal values; constant outside.
  [[nodiscard]] double interpolate(const Vector& values, double x) const {
    if (x <= lo_) return values(0);
    if (x >= hi_) return values(intervals_);
    const double s = (x - lo_) / step_;
    const auto i = std::min(static_cast<Eigen::Index>(s), intervals_ - 1);
    const double t = s - static_cast<double>(i);
    return (1.0 - t) * values(i) + t * values(i + 1);
  }

  [[nodiscard]] double trapezoid(const Vector& values) const {
    detail::require_dim(values.size(), size(), "grid quadrature");
    return step_ * (values.sum() - 0.5 * (values(0) + values(intervals_)));
  }

  [[nodiscard]] Vector cumulative_trapezoid(const Vector& values) const {
    detail::require_dim(values.size(), size(), "grid quadrature");
    Vector out(size());
    out(0) = 0.0;
    for (Eigen::Index i = 1; i < size(); ++i) out(i) = out(i - 1) + 0.5 * step_ * (values(i - 1) + values(i));
    return out;
  }

 private:
  double lo_;
  double hi_;
  Eigen::Index intervals_;
  double step_;
};

struct PoissonSolution1D {
  Grid1D grid;
  Vector p;
  Vector phi;
  Vector gain;
  double h_hat = 0.0;
  /// p * gain at the last node. Zero up to rounding when the right-hand side
  /// integrates to zero against p.
  double boundary_flux = 0.0;

  /// phi'' by central differences of the gain (one-sided at the ends).
  [[nodiscard]] Vector gain_derivative() const {
    const auto n = gain.size();
    Vector d(n);
    const double h = grid.step();
    d(0) = (gain(1) - gain(0)) / h;
    d(n - 1) = (gain(n - 1) - gain(n - 2)) / h;
    for (Eigen::Index i = 1; i + 1 < n; ++i) d(i) = (gain(i + 1) - gain(i - 1)) / (2.0 * h);
    return d;
  }
};

/// Weighted Poisson equation in one dimension,
///
///   -(1/p) (p phi')' = (h - h_hat) / sigma_w^2,   h_hat = int h p,
///
/// solved by integrating the flux from the left end:
///
///   p phi'(x) = -(1/sigma_w^2) int_{lo}^{x} (h - h_hat) p.
///
/// p is renormalized to unit mass. Where p drops below 1e-10 of its peak the
/// quotient flux / p is meaningless, so the gain there is held at the value of
/// the nearest node with usable density.
inline PoissonSolution1D solve_poisson_1d(const Grid1D& grid, const Vector& p, const Vector& h, double sigma_w) {
  detail::require_dim(p.size(), grid.size(), "poisson density");
  detail::require_dim(h.size(), grid.size(), "poisson observation function");
  detail::require(sigma_w > 0.0, "poisson: sigma_w must be positive");
  detail::require(p.allFinite() && h.allFinite(), "poisson: non-finite input");
  const Eigen::Index n = grid.size();
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    if (!(p(i) > 0.0)) throw Error("density underflow on grid at node " + std::to_string(i));
  }
  detail::require(p(0) >= 0.0 && p(n - 1) >= 0.0, "poisson: negative density");

  PoissonSolution1D sol{grid, p / grid.trapezoid(p), Vector(n), Vector(n)};
  sol.h_hat = grid.trapezoid(h.cwiseProduct(sol.p));
  const Vector rhs = (h.array() - sol.h_hat).matrix().cwiseProduct(sol.p) / (sigma_w * sigma_w);
  const Vector flux = -grid.cumulative_trapezoid(rhs);
  sol.boundary_flux = flux(n - 1);

  const double floor = 1e-10 * sol.p.maxCoeff();
  Eigen::Index first = -1;
  Eigen::Index last = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sol.p(i) > floor) {
      if (first < 0) first = i;
      last = i;
      sol.gain(i) = flux(i) / sol.p(i);
    }
  }
  // Interior holes (deep gaps between modes) take the left neighbour's value.
  for (Eigen::Index i = first + 1; i < last; ++i) {
    if (!(sol.p(i) > floor)) sol.gain(i) = sol.gain(i - 1);
  }
  for (Eigen::Index i = 0; i < first; ++i) sol.gain(i) = sol.gain(first);
  for (Eigen::Index i = last + 1; i < n; ++i) sol.gain(i) = sol.gain(last);

  sol.phi = grid.cumulative_trapezoid(sol.gain);
  sol.phi.array() -= grid.trapezoid(sol.phi.cwiseProduct(sol.p));
  return sol;
}

/// J1(phi) = int [ (sigma_w^2 / 2) phi'^2 - phi (h - h_hat) ] p.
inline double j1_objective(const Grid1D& grid, const Vector& phi, const Vector& gain, const Vector& p, const Vector& h,
                           double sigma_w) {
  for (const Vector* v : {&phi, &gain, &p, &h}) detail::require_dim(v->size(), grid.size(), "j1 grid quantities");
  detail::require(sigma_w > 0.0, "j1: sigma_w must be positive");
  const Vector pn = p / grid.trapezoid(p);
  const double h_hat = grid.trapezoid(h.cwiseProduct(pn));
  const Vector integrand = (0.5 * sigma_w * sigma_w * gain.array().square() - phi.array() * (h.array() - h_hat)).matrix();
  return grid.trapezoid(integrand.cwiseProduct(pn));
}

inline double j1_objective(const PoissonSolution1D& sol, const Vector& h, double sigma_w) {
  return j1_objective(sol.grid, sol.phi, sol.gain, sol.p, h, sigma_w);
}

/// Best constant gain k = Cov(x, h) / sigma_w^2, phi = k (x - mean).
inline PoissonSolution1D constant_gain_approximation(const Grid1D& grid, const Vector& p, const Vector& h,
                                                     double sigma_w) {
  detail::require(sigma_w > 0.0, "constant gain: sigma_w must be positive");
  PoissonSolution1D sol{grid, p / grid.trapezoid(p), Vector(grid.size()), Vector(grid.size())};
  const Vector x = grid.nodes();
  const double mean = grid.trapezoid(x.cwiseProduct(sol.p));
  sol.h_hat = grid.trapezoid(h.cwiseProduct(sol.p));
  const double k =
      grid.trapezoid(((x.array() - mean) * (h.array() - sol.h_hat)).matrix().cwiseProduct(sol.p)) /
      (sigma_w * sigma_w);
  sol.gain.setConstant(k);
  sol.phi = k * (x.array() - mean).matrix();
  return sol;
}

// ---------------------------------------------------------------------------
// Small time-step expansion of the variational objective.

struct ExpansionPoint {
  double dt = 0.0;
  double value = 0.0;
};

struct ExpansionCheck {
  std::vector<ExpansionPoint> points;
  /// Step sizes whose conjugate could not be computed reliably.
  std::vector<double> dropped;
  /// Least-squares polynomial coefficients in dt, lowest order first.
  std::vector<double> coefficients;

  [[nodiscard]] double intercept() const { return coefficients.at(0); }
  [[nodiscard]] double slope() const { return coefficients.at(1); }
};

inline std::vector<double> polynomial_fit(const std::vector<double>& t, const std::vector<double>& v, int degree) {
  detail::require(t.size() == v.size(), "polynomial fit: size mismatch");
  detail::require(degree >= 0 && static_cast<int>(t.size()) > degree, "polynomial fit: not enough points");
  Matrix design(static_cast<Eigen::Index>(t.size()), degree + 1);
  Vector rhs(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    double power = 1.0;
    for (int d = 0; d <= degree; ++d) {
      design(static_cast<Eigen::Index>(i), d) = power;
      power *= t[i];
    }
    rhs(static_cast<Eigen::Index>(i)) = v[i];
  }
  const Vector c = design.colPivHouseholderQr().solve(rhs);
  return {c.data(), c.data() + c.size()};
}

struct ExpansionProblem {
  PriorSampler prior;
  ScalarFunction h;
  double sigma_w = 1.0;
  ScalarFunction phi;
  ScalarFunction psi = [](double) { return 0.0; };
};

namespace detail {

/// sup_z [z x - (z^2/2 + phi(z) y + psi(z) dt)] by Brent's method on a bracket
/// around x. Returns NaN if the maximizer sits on the bracket edge or the
/// objective is not locally concave there.
inline double conjugate_1d(const ExpansionProblem& pb, double x, double y, double dt) {
  const auto f = [&](double z) { return 0.5 * z * z + pb.phi(z) * y + pb.psi(z) * dt; };
  const auto neg = [&](double z) { return f(z) - z * x; };
  const double width = 2.0 + 2.0 * std::abs(x) + 10.0 * std::abs(y);
  const double lo = x - width;
  const double hi = x + width;
  const auto [z, value] = boost::math::tools::brent_find_minima(neg, lo, hi, std::numeric_limits<double>::digits / 2);
  if (z - lo < 1e-6 * width || hi - z < 1e-6 * width) return std::numeric_limits<double>::quiet_NaN();
  const double e = 1e-3 * (1.0 + std::abs(z));
  if (!(neg(z + e) + neg(z - e) - 2.0 * value > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return -value;
}

}  // namespace detail

/// Monte-Carlo J(f) for f(x; y) = x^2/2 + phi(x) y + psi(x) dt with
/// Y = h(X) dt + sigma_w W_dt, at every dt in `dts`.
///
/// The same prior draws and standardized noise are reused for every dt, and
/// each draw is paired with its negated noise, so the O(sqrt(dt)) noise terms
/// cancel exactly and the fitted coefficients are smooth in dt. Since f is
/// affine in y, the product-coupling term is computed exactly over all
/// n^2 pairs as mean(x^2/2 + psi dt) + mean(phi) mean(Y).
inline ExpansionCheck prop2_expansion_check(const ExpansionProblem& pb, const std::vector<double>& dts,
                                            Eigen::Index n, std::uint64_t seed, int degree = 1) {
  detail::require(pb.prior && pb.h && pb.phi && pb.psi, "expansion check: missing function");
  detail::require(pb.sigma_w > 0.0, "expansion check: sigma_w must be positive");
  detail::require(n >= 1, "expansion check: need samples");
  RandomStream root(seed);
  RandomStream x_rng = root.split(0);
  RandomStream w_rng = root.split(1);
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<double> xi(static_cast<std::size_t>(n));
  for (auto& v : x) v = pb.prior(x_rng)(0);
  for (auto& v : xi) v = w_rng.normal();

  double mean_half_sq = 0.0;
  double mean_phi = 0.0;
  double mean_psi = 0.0;
  double mean_h = 0.0;
  for (double v : x) {
    mean_half_sq += 0.5 * v * v;
    mean_phi += pb.phi(v);
    mean_psi += pb.psi(v);
    mean_h += pb.h(v);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  mean_half_sq *= inv_n;
  mean_phi *= inv_n;
  mean_psi *= inv_n;
  mean_h *= inv_n;

  ExpansionCheck out;
  for (double dt : dts) {
    detail::require(dt > 0.0, "expansion check: dt must be positive");
    // The antithetic noise averages to zero, so mean(Y) = mean(h) dt.
    const double product = mean_half_sq + mean_psi * dt + mean_phi * mean_h * dt;
    const double scale = pb.sigma_w * std::sqrt(dt);
    double joint = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < x.size() && ok; ++i) {
      const double drift = pb.h(x[i]) * dt;
      const double a = detail::conjugate_1d(pb, x[i], drift + scale * xi[i], dt);
      const double b = detail::conjugate_1d(pb, x[i], drift - scale * xi[i], dt);
      ok = std::isfinite(a) && std::isfinite(b);
      joint += 0.5 * (a + b);
    }
    if (!ok) {
      out.dropped.push_back(dt);
      continue;
    }
    out.points.push_back({dt, product + joint * inv_n});
  }
  if (out.points.empty()) throw Error("expansion check: conjugate maximization failed at every dt");
  std::vector<double> t;
  std::vector<double> v;
  for (const auto& p : out.points) {
    t.push_back(p.dt);
    v.push_back(p.value);
  }
  out.coefficients = polynomial_fit(t, v, degree);
  return out;
}

// ---------------------------------------------------------------------------
// Feedback particle filter.

struct FpfConfig {
  double sigma_w = 1.0;
  double dt = 1e-3;
  double horizon = 1.0;
  Eigen::Index particles = 1000;
  std::uint64_t seed = 0;
  Eigen::Index grid_intervals = 1023;

  [[nodiscard]] int steps() const { return static_cast<int>(std::llround(horizon / dt)); }

  void validate() const {
    detail::require(sigma_w > 0.0, "fpf config: sigma_w must be positive");
    detail::require(dt > 0.0, "fpf config: dt must be positive");
    detail::require(horizon > 0.0 && steps() >= 1, "fpf config: horizon must cover at least one step");
    detail::require(particles >= 2, "fpf config: need at least two particles");
    detail::require(grid_intervals >= 16, "fpf config: grid too coarse");
  }
};

/// One particle update
///
///   x + K (dZ - (h(x) + h_hat) dt / 2) + (sigma_w^2 / 2) K' K dt,
///
/// with K = phi'(x) and K' = phi''(x).
inline double fpf_particle_update(double x, double gain, double gain_derivative, double h_x, double h_hat, double dz,
                                  double dt, double sigma_w) {
  return x + gain * (dz - 0.5 * (h_x + h_hat) * dt) + 0.5 * sigma_w * sigma_w * gain_derivative * gain * dt;
}

/// Silverman's rule of thumb, 0.9 min(sd, IQR / 1.34) n^(-1/5).
inline double silverman_bandwidth(const Vector& samples) {
  const auto n = samples.size();
  detail::require(n >= 2, "bandwidth: need at least two samples");
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().mean());
  std::vector<double> s(samples.data(), samples.data() + n);
  const auto quantile = [&](double q) {
    const auto k = static_cast<std::size_t>(q * static_cast<double>(n - 1));
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), s.end());
    return s[k];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) spread = std::max(1e-8, std::abs(mean) * 1e-8);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

struct DensityEstimate {
  Grid1D grid;
  Vector p;
  double bandwidth = 0.0;
};

/// Gaussian kernel density on a grid spanning the sample range plus four
/// bandwidths either side. Samples are linearly binned onto the nodes and the
/// bins are convolved with the sampled kernel. A non-positive `bandwidth`
/// selects Silverman's rule.
inline DensityEstimate kernel_density(const Vector& samples, Eigen::Index intervals, double bandwidth = 0.0) {
  detail::require(samples.size() >= 2 && samples.allFinite(), "kernel density: need finite samples");
  const double bw = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);
  const Grid1D grid(samples.minCoeff() - 4.0 * bw, samples.maxCoeff() + 4.0 * bw, intervals);
  const Eigen::Index m = grid.size();
  Vector bins = Vector::Zero(m);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double s = (samples(i) - grid.lo()) / grid.step();
    const auto j = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(s), 0, m - 2);
    const double t = s - static_cast<double>(j);
    bins(j) += 1.0 - t;
    bins(j + 1) += t;
  }
  const auto reach = std::min<Eigen::Index>(m - 1, static_cast<Eigen::Index>(std::ceil(8.0 * bw / grid.step())));
  Vector kernel(2 * reach + 1);
  for (Eigen::Index k = -reach; k <= reach; ++k) {
    const double u = static_cast<double>(k) * grid.step() / bw;
    kernel(k + reach) = std::exp(-0.5 * u * u);
  }
  kernel /= kernel.sum() * grid.step();
  Vector p = Vector::Zero(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (bins(j) == 0.0) continue;
    const Eigen::Index lo = std::max<Eigen::Index>(0, j - reach);
    const Eigen::Index hi = std::min<Eigen::Index>(m - 1, j + reach);
    for (Eigen::Index i = lo; i <= hi; ++i) p(i) += bins(j) * kernel(i - j + reach);
  }
  p /= static_cast<double>(samples.size());
  return {grid, std::move(p), bw};
}

/// Locations of interior local maxima of `p` that reach at least
/// `min_relative_height` of the global maximum.
inline std::vector<double> density_modes(const Grid1D& grid, const Vector& p, double min_relative_height = 0.05) {
  detail::require_dim(p.size(), grid.size(), "density modes");
  std::vector<double> modes;
  const double cutoff = min_relative_height * p.maxCoeff();
  for (Eigen::Index i = 1; i + 1 < p.size(); ++i) {
    if (p(i) > p(i - 1) && p(i) >= p(i + 1) && p(i) >= cutoff) modes.push_back(grid.node(i));
  }
  return modes;
}

struct FpfRun {
  std::vector<double> time;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> dz;
  double true_state = 0.0;
  Ensemble final_ensemble{Matrix::Zero(1, 1)};
  /// Gain solution from the last step.
  std::optional<PoissonSolution1D> last_gain;
};

/// Simulates the filter on a given observation increment path.
inline FpfRun fpf_simulate_path(const FpfConfig& cfg, const PriorSampler& prior, const ScalarFunction& h,
                                const std::vector<double>& dz) {
  cfg.validate();
  detail::require(prior && h, "fpf: missing prior or observation function");
  RandomStream rng = RandomStream(cfg.seed).split(0);
  Vector x(cfg.particles);
  for (Eigen::Index i = 0; i < cfg.particles; ++i) x(i) = prior(rng)(0);

  FpfRun run;
  run.dz = dz;
  const auto record = [&](double t) {
    const double m = x.mean();
    run.time.push_back(t);
    run.mean.push_back(m);
    run.variance.push_back((x.array() - m).square().mean());
  };
  record(0.0);
  Vector hx(cfg.particles);
  for (std::size_t step = 0; step < dz.size(); ++step) {
    if (!x.allFinite()) throw Error("fpf: non-finite particle at step " + std::to_string(step));
    // The grid is rebuilt from the particle range every step, so no particle
    // ever sits outside it when the gain is interpolated.
    const auto density = kernel_density(x, cfg.grid_intervals);
    auto sol = solve_poisson_1d(density.grid, density.p, density.grid.evaluate(h), cfg.sigma_w);
    const Vector dgain = sol.gain_derivative();
    for (Eigen::Index i = 0; i < cfg.particles; ++i) hx(i) = h(x(i));
    // Particle-based h_hat keeps a constant h exactly gain-free.
    const double h_hat = hx.mean();
    for (Eigen::Index i = 0; i < cfg.particles; ++i) {
      x(i) = fpf_particle_update(x(i), sol.grid.interpolate(sol.gain, x(i)), sol.grid.interpolate(dgain, x(i)), hx(i),
                                 h_hat, dz[step], cfg.dt, cfg.sigma_w);
    }
    record(static_cast<double>(step + 1) * cfg.dt);
    if (step + 1 == dz.size()) run.last_gain = std::move(sol);
  }
  run.final_ensemble = Ensemble{Matrix(x)};
  return run;
}

/// Draws a hidden state X* from `truth`, synthesizes
/// dZ = h(X*) dt + sigma_w sqrt(dt) xi, and runs the filter on that path.
inline FpfRun fpf_simulate(const FpfConfig& cfg, const PriorSampler& prior, const ScalarFunction& h,
                           const PriorSampler& truth) {
  cfg.validate();
  RandomStream rng = RandomStream(cfg.seed).split(1);
  const double x_star = truth(rng)(0);
  std::vector<double> dz(static_cast<std::size_t>(cfg.steps()));
  const double scale = cfg.sigma_w * std::sqrt(cfg.dt);
  for (auto& v : dz) v = h(x_star) * cfg.dt + scale * rng.normal();
  FpfRun run = fpf_simulate_path(cfg, prior, h, dz);
  run.true_state = x_star;
  return run;
}

}  // namespace otbayes

#endif  // OTBAYES_FPF_HPP
