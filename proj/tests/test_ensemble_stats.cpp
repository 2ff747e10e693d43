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

#include <algorithm>
#include <numeric>

#include <otbayes/ensemble_stats.hpp>

namespace {

using otbayes::Matrix;
using otbayes::Vector;

Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

TEST(EmpiricalMean, SymmetricPair) {
  EXPECT_DOUBLE_EQ(otbayes::empirical_mean(column({1.0, -1.0}))(0), 0.0);
}

TEST(EmpiricalMean, SingleParticle) {
  EXPECT_DOUBLE_EQ(otbayes::empirical_mean(column({2.0}))(0), 2.0);
}

TEST(EmpiricalMean, StandardNormalDraws) {
  otbayes::RandomStream rng(0);
  const Matrix draws = rng.normal_matrix(100000, 1);
  // CLT bound 3 / sqrt(N) ~ 1e-2; the stated tolerance is 3e-2.
  EXPECT_NEAR(otbayes::empirical_mean(draws)(0), 0.0, 3e-2);
}

TEST(EmpiricalMean, EmptyInputThrows) {
  EXPECT_THROW(otbayes::empirical_mean(Matrix(0, 1)), otbayes::Error);
  try {
    otbayes::empirical_mean(Matrix(0, 1));
  } catch (const otbayes::Error& e) {
    EXPECT_STREQ(e.what(), "empty ensemble");
  }
}

TEST(EmpiricalCov, VarianceOfPlusMinusOne) {
  EXPECT_DOUBLE_EQ(otbayes::empirical_cov(column({1.0, -1.0}))(0, 0), 1.0);
}

TEST(EmpiricalCov, IdenticalPairingCrossCovariance) {
  EXPECT_DOUBLE_EQ(otbayes::empirical_cov(column({1.0, -1.0}), column({1.0, -1.0}))(0, 0), 1.0);
}

TEST(EmpiricalCov, DiagonalGaussianDraws) {
  otbayes::RandomStream rng(1);
  Matrix draws = rng.normal_matrix(100000, 2);
  draws.col(0) *= 2.0;
  draws.col(1) *= 3.0;
  const Matrix c = otbayes::empirical_cov(draws);
  EXPECT_NEAR(c(0, 0), 4.0, 0.05 * 4.0);
  EXPECT_NEAR(c(1, 1), 9.0, 0.05 * 9.0);
}

TEST(EmpiricalCov, Errors) {
  EXPECT_THROW(otbayes::empirical_cov(column({1.0, 2.0}), column({1.0})), otbayes::Error);
  EXPECT_THROW(otbayes::empirical_cov(column({1.0})), otbayes::Error);
}

TEST(EmpiricalCov, UsesOneOverNNormalization) {
  // Brute-force double loop over the definition.
  otbayes::RandomStream rng(2);
  const Matrix a = rng.normal_matrix(7, 2);
  const Matrix b = rng.normal_matrix(7, 3);
  Matrix expected = Matrix::Zero(2, 3);
  const Vector ma = a.colwise().mean().transpose();
  const Vector mb = b.colwise().mean().transpose();
  for (Eigen::Index i = 0; i < 7; ++i) {
    expected += (a.row(i).transpose() - ma) * (b.row(i).transpose() - mb).transpose();
  }
  expected /= 7.0;
  EXPECT_TRUE(otbayes::empirical_cov(a, b).isApprox(expected, 1e-12));
}

TEST(MomentsOf, PerfectlyCorrelatedPairs) {
  const otbayes::JointSamples joint(column({1.0, -1.0}), column({1.0, -1.0}));
  const auto mom = otbayes::moments_of(joint);
  EXPECT_DOUBLE_EQ(mom.m_x(0), 0.0);
  EXPECT_DOUBLE_EQ(mom.m_y(0), 0.0);
  EXPECT_DOUBLE_EQ(mom.sigma_x(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(mom.sigma_y(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(mom.sigma_xy(0, 0), 1.0);
}

TEST(MomentsOf, AntiCorrelatedPairs) {
  const otbayes::JointSamples joint(column({1.0, -1.0}), column({-1.0, 1.0}));
  EXPECT_DOUBLE_EQ(otbayes::moments_of(joint).sigma_xy(0, 0), -1.0);
}

TEST(MomentsOf, AdditiveNoiseModel) {
  // X ~ N(0,1), Y = X + W: sigma_y = 2, sigma_xy = 1.
  otbayes::RandomStream rng(3);
  const Matrix x = rng.normal_matrix(100000, 1);
  const Matrix y = x + rng.normal_matrix(100000, 1);
  const auto mom = otbayes::moments_of(otbayes::JointSamples(x, y));
  EXPECT_NEAR(mom.sigma_y(0, 0), 2.0, 0.05 * 2.0);
  EXPECT_NEAR(mom.sigma_xy(0, 0), 1.0, 0.05);
}

TEST(JointSamples, RejectsMismatchedRows) {
  EXPECT_THROW(otbayes::JointSamples(Matrix::Zero(3, 1), Matrix::Zero(2, 1)), otbayes::Error);
}

TEST(JointSamples, RejectsNonFinite) {
  Matrix x = Matrix::Zero(2, 1);
  x(1, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(otbayes::JointSamples(x, Matrix::Zero(2, 1)), otbayes::Error);
  EXPECT_THROW(otbayes::Ensemble{x}, otbayes::Error);
}

TEST(JointSamples, ProductCouplingKeepsMarginals) {
  otbayes::RandomStream rng(4);
  const otbayes::JointSamples joint(rng.normal_matrix(50, 2), rng.normal_matrix(50, 1));
  const auto product = joint.product_coupling(rng);
  EXPECT_EQ(product.x(), joint.x());
  std::vector<double> a(joint.y().data(), joint.y().data() + 50);
  std::vector<double> b(product.y().data(), product.y().data() + 50);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

// Property checks over random inputs.
class CovarianceProperties : public ::testing::TestWithParam<int> {};

TEST_P(CovarianceProperties, SymmetricPsd) {
  otbayes::RandomStream rng(100 + static_cast<std::uint64_t>(GetParam()));
  const auto n = 2 + static_cast<Eigen::Index>(rng.uniform() * 20);
  const auto p = 1 + static_cast<Eigen::Index>(rng.uniform() * 5);
  const Matrix a = rng.normal_matrix(n, p);
  const Matrix c = otbayes::empirical_cov(a, a);
  EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c + c.transpose()));
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
}

TEST_P(CovarianceProperties, BilinearUnderScaling) {
  otbayes::RandomStream rng(200 + static_cast<std::uint64_t>(GetParam()));
  const Matrix a = rng.normal_matrix(12, 2);
  const Matrix b = rng.normal_matrix(12, 3);
  const double s = rng.normal();
  const double t = rng.normal();
  const Matrix lhs = otbayes::empirical_cov(s * a, t * b);
  const Matrix rhs = s * t * otbayes::empirical_cov(a, b);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
}

TEST_P(CovarianceProperties, PermutationInvariant) {
  otbayes::RandomStream rng(300 + static_cast<std::uint64_t>(GetParam()));
  const Matrix x = rng.normal_matrix(15, 2);
  const Matrix y = rng.normal_matrix(15, 1);
  std::vector<Eigen::Index> order(15);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  Matrix xp(15, 2), yp(15, 1);
  for (Eigen::Index i = 0; i < 15; ++i) {
    xp.row(i) = x.row(order[static_cast<std::size_t>(i)]);
    yp.row(i) = y.row(order[static_cast<std::size_t>(i)]);
  }
  const auto m1 = otbayes::moments_of({x, y});
  const auto m2 = otbayes::moments_of({xp, yp});
  EXPECT_TRUE(m1.m_x.isApprox(m2.m_x, 1e-12));
  EXPECT_TRUE(m1.sigma_x.isApprox(m2.sigma_x, 1e-12));
  EXPECT_TRUE(m1.sigma_xy.isApprox(m2.sigma_xy, 1e-12));
}

INSTANTIATE_TEST_SUITE_P(Random, CovarianceProperties, ::testing::Range(0, 100));

}  // namespace
