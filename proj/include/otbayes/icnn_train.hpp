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

#ifndef OTBAYES_ICNN_TRAIN_HPP
#define OTBAYES_ICNN_TRAIN_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <otbayes/adam.hpp>
#include <otbayes/common.hpp>
#include <otbayes/ensemble_stats.hpp>
#include <otbayes/icnn.hpp>

namespace otbayes {

enum class ProjectionMode { kClamp, kAbsolute };

struct TrainConfig {
  Eigen::Index batch_size = 256;
  double lr_f = 1e-3;
  double lr_g = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int inner_steps = 20;
  int outer_steps = 5000;
  std::uint64_t seed = 0;
  ProjectionMode projection = ProjectionMode::kClamp;
  // Both learning rates follow a cosine from their initial value down to
  // this fraction of it at the last outer step. 1 keeps them constant.
  double final_lr_fraction = 0.01;

  [[nodiscard]] double lr_scale(int step) const {
    if (outer_steps <= 1) return 1.0;
    const double progress = static_cast<double>(step) / static_cast<double>(outer_steps - 1);
    return final_lr_fraction + (1.0 - final_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }

  void validate() const {
    detail::require(batch_size >= 1, "train config: batch size must be positive");
    detail::require(lr_f > 0.0 && lr_g > 0.0, "train config: learning rates must be positive");
    detail::require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "train config: Adam betas in [0, 1)");
    detail::require(epsilon > 0.0, "train config: epsilon must be positive");
    detail::require(inner_steps >= 1, "train config: inner steps must be positive");
    detail::require(outer_steps >= 0, "train config: outer steps must be non-negative");
    detail::require(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0,
                    "train config: final learning-rate fraction must lie in (0, 1]");
  }
};

struct LossRecord {
  int step = 0;
  double objective = 0.0;
  double lr_f = 0.0;
  double lr_g = 0.0;
};

/// Raised when the min-max objective becomes non-finite; carries the trace so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::vector<LossRecord> trace)
      : Error(what), trace_(std::move(trace)) {}
  [[nodiscard]] const std::vector<LossRecord>& trace() const { return trace_; }

 private:
  std::vector<LossRecord> trace_;
};

template <typename P>
struct TrainResult {
  P f;
  P g;
  std::vector<LossRecord> trace;
};

struct SingleLayerArchitecture {
  Eigen::Index units = 64;

  [[nodiscard]] SingleLayerIcnn make(Eigen::Index x_dim, Eigen::Index y_dim, RandomStream& rng) const {
    return SingleLayerIcnn::random(units, x_dim, y_dim, rng);
  }
};

struct GeneralArchitecture {
  std::vector<Eigen::Index> hidden{16, 16};
  std::vector<Eigen::Index> u_widths{8, 8};

  [[nodiscard]] Icnn make(Eigen::Index x_dim, Eigen::Index y_dim, RandomStream& rng) const {
    return Icnn::random(x_dim, y_dim, hidden, u_widths, rng);
  }
};

/// Keeps the sign-constrained entries (mask == 1) non-negative.
inline void project_weights(Vector& params, const Vector& mask, ProjectionMode mode) {
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (mask(i) == 0.0) continue;
    params(i) = mode == ProjectionMode::kClamp ? std::max(params(i), 0.0) : std::abs(params(i));
  }
}

namespace detail {

inline JointSamples draw_batch(const JointSamples& data, Eigen::Index batch, RandomStream& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, data.size() - 1);
  Matrix x(batch, data.x_dim());
  Matrix y(batch, data.y_dim());
  for (Eigen::Index i = 0; i < batch; ++i) {
    const auto k = pick(rng.engine());
    x.row(i) = data.x().row(k);
    y.row(i) = data.y().row(k);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace detail

/// Alternating Adam on the min-max objective. Each outer step takes
/// `inner_steps` ascent steps on g and one descent step on f; after every
/// update the non-negative weights are projected back. The product batch is
/// the joint batch with its y column shuffled. Deterministic for a given seed.
template <ConvexPotential P>
TrainResult<P> train(const JointSamples& data, P f, P g, const TrainConfig& cfg) {
  cfg.validate();
  detail::require(data.size() >= 1, "train: no data");
  detail::require(f.parameter_count() == g.parameter_count(), "train: f and g must share an architecture");
  RandomStream rng(cfg.seed, 1);

  const Vector f_mask = f.constraint_mask();
  const Vector g_mask = g.constraint_mask();
  Vector f_params = f.flat();
  Vector g_params = g.flat();
  Adam f_opt(f_params.size(), {cfg.lr_f, cfg.beta1, cfg.beta2, cfg.epsilon});
  Adam g_opt(g_params.size(), {cfg.lr_g, cfg.beta1, cfg.beta2, cfg.epsilon});

  std::vector<LossRecord> trace;
  trace.reserve(static_cast<std::size_t>(cfg.outer_steps));
  const auto batch = cfg.batch_size;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  for (int step = 0; step < cfg.outer_steps; ++step) {
    const double scale = cfg.lr_scale(step);
    f_opt.set_learning_rate(cfg.lr_f * scale);
    g_opt.set_learning_rate(cfg.lr_g * scale);
    for (int inner = 0; inner < cfg.inner_steps; ++inner) {
      const JointSamples jb = detail::draw_batch(data, batch, rng);
      Vector grad = Vector::Zero(g_params.size());
      for (Eigen::Index i = 0; i < batch; ++i) {
        const Vector x = jb.x().row(i).transpose();
        const Vector y = jb.y().row(i).transpose();
        const Vector t = g.grad_x(x, y);
        const Vector v = x - f.grad_x(t, y);
        // Ascent on g: descend along the negated gradient.
        g.accumulate_mixed_grad(x, y, v, -inv_batch, grad);
      }
      g_opt.step(g_params, grad);
      project_weights(g_params, g_mask, cfg.projection);
      g.set_flat(g_params);
    }

    const JointSamples jb = detail::draw_batch(data, batch, rng);
    const JointSamples pb = jb.product_coupling(rng);
    Vector grad = Vector::Zero(f_params.size());
    double objective = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
      const Vector xp = pb.x().row(i).transpose();
      const Vector yp = pb.y().row(i).transpose();
      objective += f.value(xp, yp);
      f.accumulate_param_grad(xp, yp, inv_batch, grad);

      const Vector x = jb.x().row(i).transpose();
      const Vector y = jb.y().row(i).transpose();
      const Vector t = g.grad_x(x, y);
      objective += t.dot(x) - f.value(t, y);
      f.accumulate_param_grad(t, y, -inv_batch, grad);
    }
    objective *= inv_batch;
    trace.push_back({step, objective, cfg.lr_f * scale, cfg.lr_g * scale});
    if (!std::isfinite(objective) || !grad.allFinite()) {
      throw TrainingDiverged("training diverged at step " + std::to_string(step), std::move(trace));
    }
    f_opt.step(f_params, grad);
    project_weights(f_params, f_mask, cfg.projection);
    f.set_flat(f_params);
  }
  return {std::move(f), std::move(g), std::move(trace)};
}

/// Initializes f and g from `arch` (independent streams) and trains.
template <typename Arch>
auto train(const JointSamples& data, const Arch& arch, const TrainConfig& cfg) {
  RandomStream init(cfg.seed, 0);
  RandomStream f_rng = init.split(0);
  RandomStream g_rng = init.split(1);
  auto f = arch.make(data.x_dim(), data.y_dim(), f_rng);
  auto g = arch.make(data.x_dim(), data.y_dim(), g_rng);
  return train(data, std::move(f), std::move(g), cfg);
}

}  // namespace otbayes

#endif  // OTBAYES_ICNN_TRAIN_HPP
