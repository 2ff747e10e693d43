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

#ifndef OTBAYES_ADAM_HPP
#define OTBAYES_ADAM_HPP

#include <cmath>

#include <otbayes/common.hpp>

namespace otbayes {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moment estimates. `step` descends along `grad`.
class Adam {
 public:
  Adam(Eigen::Index size, AdamOptions options)
      : options_(options), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

  void step(Vector& params, const Vector& grad) {
    detail::require_dim(grad.size(), m_.size(), "adam gradient");
    ++t_;
    m_ = options_.beta1 * m_ + (1.0 - options_.beta1) * grad;
    v_ = options_.beta2 * v_ + (1.0 - options_.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    params.array() -= options_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + options_.epsilon);
  }

  void set_learning_rate(double lr) { options_.learning_rate = lr; }

  [[nodiscard]] long steps() const { return t_; }
  [[nodiscard]] const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  Vector m_;
  Vector v_;
  long t_ = 0;
};

}  // namespace otbayes

#endif  // OTBAYES_ADAM_HPP
