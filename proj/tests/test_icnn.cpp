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


#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include <otbayes/checkpoint.hpp>
#include <otbayes/icnn.hpp>
#include <otbayes/icnn_train.hpp>
#include <otbayes/models.hpp>
#include <otbayes/ot_enkf.hpp>
#include <otbayes/variational.hpp>

namespace {

using otbayes::Icnn;
using otbayes::JointSamples;
using otbayes::Matrix;
using otbayes::QuadraticPotential;
using otbayes::RandomStream;
using otbayes::SingleLayerIcnn;
using otbayes::Vector;

Vector v1(double v) { return Vector::Constant(1, v); }
Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const otbayes::Error& e) {
    return e.what();
  }
  return {};
}

// Quadratic potentials in the value/grad_x shape expected by minmax_objective.
struct QuadF {
  QuadraticPotential p;
  Eigen::Index x_dim() const { return p.x_dim(); }
  Eigen::Index y_dim() const { return p.y_dim(); }
  double value(const Vector& x, const Vector& y) const { return otbayes::quad_eval(p, x, y); }
  Vector grad_x(const Vector& x, const Vector& y) const { return otbayes::quad_gradient_map(p, x, y); }
};

struct QuadConj {
  QuadraticPotential p;
  double value(const Vector& x, const Vector& y) const { return otbayes::quad_conjugate(p, x, y); }
  Vector grad_x(const Vector& x, const Vector& y) const { return p.solve(x - p.k() * y - p.b()); }
};

struct ZeroGrad {
  Eigen::Index n;
  double value(const Vector&, const Vector&) const { return 0.0; }
  Vector grad_x(const Vector&, const Vector&) const { return Vector::Zero(n); }
};

SingleLayerIcnn unit_net(std::vector<double> w, std::vector<double> wx) {
  const auto k = static_cast<Eigen::Index>(w.size());
  return {Eigen::Map<Vector>(w.data(), k), Eigen::Map<Matrix>(wx.data(), k, 1), Matrix::Zero(k, 1),
          Vector::Zero(k)};
}

double fd_check(const auto& f, const Vector& x, const Vector& y) {
  const Vector g = f.grad_x(x, y);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    Vector xp = x;
    Vector xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (f.value(xp, y) - f.value(xm, y)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g(i)) / std::max(1.0, std::abs(g(i))));
  }
  return worst;
}

TEST(IcnnForward, Examples) {
  const auto f = unit_net({1.0}, {1.0});
  EXPECT_DOUBLE_EQ(otbayes::icnn_forward(f, v1(2.0), v1(0.0)), 4.0);
  EXPECT_DOUBLE_EQ(otbayes::icnn_forward(f, v1(-2.0), v1(0.0)), 0.0);
  const auto two = unit_net({1.0, 1.0}, {1.0, -1.0});
  EXPECT_DOUBLE_EQ(otbayes::icnn_forward(two, v1(3.0), v1(0.0)), 9.0);
}

TEST(IcnnForward, GeneralEmbeddingAgrees) {
  RandomStream rng(3);
  const auto s = SingleLayerIcnn::random(16, 2, 3, rng);
  const Icnn g = Icnn::from_single_layer(s);
  for (int i = 0; i < 50; ++i) {
    const Vector x = rng.normal_vector(2);
    const Vector y = rng.normal_vector(3);
    EXPECT_NEAR(g.value(x, y), s.value(x, y), 1e-12 * std::max(1.0, std::abs(s.value(x, y))));
    EXPECT_LE((g.grad_x(x, y) - s.grad_x(x, y)).norm(), 1e-12 * std::max(1.0, s.grad_x(x, y).norm()));
  }
}

TEST(IcnnForward, Errors) {
  const auto f = unit_net({1.0}, {1.0});
  EXPECT_NE(error_of([&] { otbayes::icnn_forward(f, Vector::Zero(2), v1(0.0)); }).find("dimension mismatch"),
            std::string::npos);
  EXPECT_NE(error_of([&] { otbayes::icnn_forward(unit_net({-1.0}, {1.0}), v1(1.0), v1(0.0)); })
                .find("convexity violated"),
            std::string::npos);
  RandomStream rng(4);
  auto net = Icnn::random(1, 1, {4, 4}, {2, 2}, rng);
  auto layers = net.layers();
  layers[1].w_z(0, 0) = -0.5;
  const Icnn bad(1, 1, layers);
  EXPECT_NE(error_of([&] { otbayes::icnn_grad_x(bad, v1(1.0), v1(0.0)); }).find("convexity violated"),
            std::string::npos);
}

TEST(IcnnGradX, Examples) {
  const auto f = unit_net({1.0}, {1.0});
  EXPECT_DOUBLE_EQ(otbayes::icnn_grad_x(f, v1(2.0), v1(0.0))(0), 4.0);
  // Pre-activation exactly zero.
  EXPECT_DOUBLE_EQ(otbayes::icnn_grad_x(f, v1(0.0), v1(0.0))(0), 0.0);
  EXPECT_DOUBLE_EQ(otbayes::icnn_grad_x(unit_net({1.0, 1.0}, {1.0, -1.0}), v1(3.0), v1(0.0))(0), 6.0);
}

TEST(IcnnGradX, FiniteDifferencesSingleLayer) {
  RandomStream rng(11);
  const auto f = SingleLayerIcnn::random(32, 3, 2, rng);
  for (int i = 0; i < 100; ++i) {
    EXPECT_LE(fd_check(f, rng.normal_vector(3), rng.normal_vector(2)), 1e-5);
  }
}

TEST(IcnnGradX, FiniteDifferencesGeneral) {
  RandomStream rng(12);
  const auto f = Icnn::random(3, 2, {8, 8}, {4, 4}, rng);
  for (int i = 0; i < 100; ++i) {
    EXPECT_LE(fd_check(f, rng.normal_vector(3), rng.normal_vector(2)), 1e-5);
  }
}

// Monotonicity of the gradient map follows from convexity in x.
class Monotone : public ::testing::TestWithParam<int> {};

TEST_P(Monotone, GradientMapIsMonotone) {
  RandomStream rng(1000 + GetParam());
  const auto s = SingleLayerIcnn::random(16, 2, 1, rng);
  const auto g = Icnn::random(2, 1, {8, 8}, {4, 4}, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector y = rng.normal_vector(1);
    const Vector a = 2.0 * rng.normal_vector(2);
    const Vector b = 2.0 * rng.normal_vector(2);
    EXPECT_GE((s.grad_x(a, y) - s.grad_x(b, y)).dot(a - b), -1e-9);
    EXPECT_GE((g.grad_x(a, y) - g.grad_x(b, y)).dot(a - b), -1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(RandomNetworks, Monotone, ::testing::Range(0, 100));

TEST(MinmaxObjective, QuadraticStandIns) {
  const QuadF f{QuadraticPotential::identity(1, 1)};
  const QuadConj g{QuadraticPotential::identity(1, 1)};
  const JointSamples batch{m1(1.0), m1(0.0)};
  EXPECT_DOUBLE_EQ(otbayes::minmax_objective(f, g, batch, batch), 1.0);
}

TEST(MinmaxObjective, ZeroGradientG) {
  RandomStream rng(5);
  const auto f = SingleLayerIcnn::random(8, 1, 1, rng);
  const JointSamples joint{rng.normal_matrix(20, 1), rng.normal_matrix(20, 1)};
  const JointSamples product = joint.product_coupling(rng);
  double want = 0.0;
  for (Eigen::Index i = 0; i < 20; ++i) {
    want += f.value(product.x().row(i).transpose(), product.y().row(i).transpose());
    want -= f.value(Vector::Zero(1), joint.y().row(i).transpose());
  }
  EXPECT_NEAR(otbayes::minmax_objective(f, ZeroGrad{1}, joint, product), want / 20.0, 1e-12);
}

TEST(MinmaxObjective, NonFiniteNamesIndex) {
  const QuadF f{QuadraticPotential::identity(1, 1)};
  const QuadConj g{QuadraticPotential::identity(1, 1)};
  // JointSamples rejects non-finite input, so use a potential that overflows.
  const QuadF big{QuadraticPotential(m1(1e300), m1(0.0), v1(0.0))};
  const JointSamples joint{m1(0.0), m1(0.0)};
  const JointSamples product{(Matrix(2, 1) << 0.0, 1e10).finished(), Matrix::Zero(2, 1)};
  EXPECT_NE(error_of([&] { otbayes::minmax_objective(big, g, joint, product); }).find("index 1"), std::string::npos);
}

// At the closed-form optimum for the reference model the batch objective
// matches the population dual value, and any other quadratic does worse.
TEST(MinmaxObjective, GaussianOptimumMatchesClosedForm) {
  const auto model = otbayes::gaussian_1d_model();
  RandomStream rng(21);
  const JointSamples joint = otbayes::sample_joint(model.prior, model.observation, 200000, rng);
  const JointSamples product = joint.product_coupling(rng);
  const auto moments = otbayes::moments_of(joint);
  const auto best = otbayes::solve_prop1(moments).potential;
  const double value = otbayes::minmax_objective(QuadF{best}, QuadConj{best}, joint, product);
  EXPECT_NEAR(value, otbayes::population_dual_value(best, moments), 0.01);
  const QuadraticPotential other(best.a() * 1.3, best.k() * 0.8, best.b());
  EXPECT_GT(otbayes::minmax_objective(QuadF{other}, QuadConj{other}, joint, product), value);
}

// With quadratic evaluators the outer minimization is exact and lands on the
// closed-form OT-EnKF map.
TEST(MinmaxObjective, QuadraticMinimizationRecoversClosedForm) {
  RandomStream rng(22);
  const auto model = otbayes::gaussian_nd_model();
  const JointSamples joint = otbayes::sample_joint(model.prior, model.observation, 5000, rng);
  const auto moments = otbayes::moments_of(joint);
  const auto descent = otbayes::potential_from(otbayes::minimize_population_objective(moments).params, moments);
  const auto closed = otbayes::solve_prop1(moments);
  EXPECT_LE((descent.a() - closed.a()).norm(), 1e-4);
  EXPECT_LE((descent.k() - closed.k()).norm(), 1e-4);
  EXPECT_LE((descent.b() - closed.potential.b()).norm(), 1e-4);
}

TEST(Transport, IdentityQuadraticLeavesEnsemble) {
  RandomStream rng(6);
  const otbayes::Ensemble ens{rng.normal_matrix(10, 2)};
  const auto out = otbayes::transport(QuadF{QuadraticPotential::identity(2, 1)}, ens, v1(0.3));
  EXPECT_EQ(out.particles(), ens.particles());
}

TEST(Transport, SingleParticleMatchesGradient) {
  const auto f = unit_net({1.0}, {1.0});
  const auto out = otbayes::transport(f, otbayes::Ensemble{m1(2.0)}, v1(0.0));
  EXPECT_DOUBLE_EQ(out.particles()(0, 0), 4.0);
}

TEST(Projection, ClampAndAbsolute) {
  Vector p(4);
  p << -1.0, 2.0, -3.0, -4.0;
  Vector mask(4);
  mask << 1.0, 1.0, 0.0, 1.0;
  Vector clamp = p;
  otbayes::project_weights(clamp, mask, otbayes::ProjectionMode::kClamp);
  EXPECT_EQ(clamp, (Vector(4) << 0.0, 2.0, -3.0, 0.0).finished());
  Vector abs = p;
  otbayes::project_weights(abs, mask, otbayes::ProjectionMode::kAbsolute);
  EXPECT_EQ(abs, (Vector(4) << 1.0, 2.0, -3.0, 4.0).finished());
}

JointSamples small_bimodal(std::uint64_t seed, Eigen::Index n) {
  RandomStream rng(seed);
  const auto model = otbayes::bimodal_model();
  return otbayes::sample_joint(model.prior, model.observation, n, rng);
}

TEST(Train, ZeroStepsReturnsInitialization) {
  otbayes::TrainConfig cfg;
  cfg.outer_steps = 0;
  const auto data = small_bimodal(1, 100);
  const auto result = otbayes::train(data, otbayes::SingleLayerArchitecture{8}, cfg);
  RandomStream init(cfg.seed, 0);
  RandomStream f_rng = init.split(0);
  EXPECT_EQ(result.f.flat(), SingleLayerIcnn::random(8, 1, 1, f_rng).flat());
  EXPECT_TRUE(result.trace.empty());
}

TEST(Train, ProjectionHoldsAndRunIsDeterministic) {
  otbayes::TrainConfig cfg;
  cfg.outer_steps = 50;
  cfg.inner_steps = 3;
  cfg.batch_size = 32;
  cfg.lr_f = cfg.lr_g = 5e-2;
  cfg.seed = 9;
  const auto data = small_bimodal(2, 500);
  const auto a = otbayes::train(data, otbayes::GeneralArchitecture{}, cfg);
  const auto b = otbayes::train(data, otbayes::GeneralArchitecture{}, cfg);
  ASSERT_EQ(a.trace.size(), 50u);
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].objective, b.trace[i].objective);
  EXPECT_EQ(a.f.flat(), b.f.flat());
  for (const auto* net : {&a.f, &a.g}) {
    const Vector p = net->flat();
    const Vector mask = net->constraint_mask();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (mask(i) != 0.0) {
        EXPECT_GE(p(i), 0.0);
      }
    }
  }
  EXPECT_NO_THROW(a.f.validate());
}

TEST(Train, LearningRateScheduleIsRecorded) {
  otbayes::TrainConfig cfg;
  cfg.outer_steps = 11;
  cfg.inner_steps = 1;
  cfg.batch_size = 8;
  cfg.final_lr_fraction = 0.1;
  const auto result = otbayes::train(small_bimodal(3, 50), otbayes::SingleLayerArchitecture{4}, cfg);
  EXPECT_DOUBLE_EQ(result.trace.front().lr_f, cfg.lr_f);
  EXPECT_NEAR(result.trace.back().lr_g, 0.1 * cfg.lr_g, 1e-15);
  EXPECT_NEAR(result.trace[5].lr_f, 0.55 * cfg.lr_f, 1e-15);
}

TEST(Train, InvalidConfigRejected) {
  otbayes::TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_NE(error_of([&] { cfg.validate(); }).find("batch size"), std::string::npos);
  cfg = {};
  cfg.lr_g = 0.0;
  EXPECT_NE(error_of([&] { cfg.validate(); }).find("learning rates"), std::string::npos);
}

TEST(Train, DivergenceAbortsWithTrace) {
  otbayes::TrainConfig cfg;
  cfg.outer_steps = 20;
  cfg.inner_steps = 1;
  cfg.batch_size = 4;
  // Data far out in the tails make the first objective overflow.
  const JointSamples data{Matrix::Constant(4, 1, 1e200), Matrix::Constant(4, 1, 1e200)};
  try {
    otbayes::train(data, otbayes::SingleLayerArchitecture{4}, cfg);
    FAIL() << "expected divergence";
  } catch (const otbayes::TrainingDiverged& e) {
    EXPECT_FALSE(e.trace().empty());
    EXPECT_NE(std::string(e.what()).find("diverged"), std::string::npos);
  }
}

TEST(Train, GaussianModelMatchesKalman) {
  RandomStream rng(31);
  const auto model = otbayes::gaussian_1d_model();
  const JointSamples data = otbayes::sample_joint(model.prior, model.observation, 10000, rng);
  const auto result = otbayes::train(data, otbayes::SingleLayerArchitecture{}, otbayes::TrainConfig{});
  const otbayes::Ensemble prior{otbayes::sample_prior(model.prior, 20000, rng)};
  for (double y : {-1.0, 1.0, 2.0}) {
    const auto post = otbayes::transport(result.f, prior, v1(y));
    const double mean = post.particles().mean();
    const double var = otbayes::empirical_cov(post.particles())(0, 0);
    EXPECT_NEAR(mean, 0.5 * y, 0.1 * std::abs(0.5 * y)) << "y=" << y;
    EXPECT_NEAR(var, 0.5, 0.05) << "y=" << y;
  }
}

TEST(Checkpoint, SingleLayerRoundTrip) {
  RandomStream rng(41);
  const auto f = SingleLayerIcnn::random(5, 2, 3, rng);
  std::stringstream ss;
  otbayes::write_checkpoint(ss, f);
  const auto back = otbayes::read_single_layer_checkpoint(ss);
  EXPECT_EQ(back.flat(), f.flat());
  EXPECT_EQ(back.wx().rows(), 5);
  EXPECT_EQ(back.wy().cols(), 3);
}

TEST(Checkpoint, GeneralRoundTrip) {
  RandomStream rng(42);
  const auto f = Icnn::random(2, 1, {6, 4}, {3, 2}, rng);
  std::stringstream ss;
  otbayes::write_checkpoint(ss, f);
  const auto back = otbayes::read_icnn_checkpoint(ss);
  EXPECT_EQ(back.flat(), f.flat());
  ASSERT_EQ(back.layers().size(), f.layers().size());
  for (std::size_t l = 0; l < f.layers().size(); ++l) {
    EXPECT_EQ(back.layers()[l].activation, f.layers()[l].activation);
  }
  const Vector x = rng.normal_vector(2);
  EXPECT_EQ(back.value(x, v1(0.4)), f.value(x, v1(0.4)));
}

TEST(Checkpoint, MalformedInputRejected) {
  std::stringstream wrong_kind("otbayes-icnn 1\nkind general\n");
  EXPECT_NE(error_of([&] { otbayes::read_single_layer_checkpoint(wrong_kind); }).find("expected"),
            std::string::npos);
  std::stringstream truncated("otbayes-icnn 1\nkind single_layer\ndims 1 1\ntensor w 2 1\n0.5\n");
  EXPECT_NE(error_of([&] { otbayes::read_single_layer_checkpoint(truncated); }).find("truncated"),
            std::string::npos);
}

TEST(Checkpoint, LossTraceCsv) {
  std::stringstream ss;
  otbayes::write_loss_trace(ss, {{0, 1.5, 1e-3, 1e-2}, {1, 0.25, 1e-3, 1e-2}});
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "step,objective,f-lr,g-lr");
  std::string row;
  std::getline(ss, row);
  EXPECT_EQ(row, "0,1.5,0.001,0.01");
}

}  // namespace
