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


#ifndef OTBAYES_CHECKPOINT_HPP
#define OTBAYES_CHECKPOINT_HPP

// Plain-text checkpoints. Layout, one token group per line:
//
//   otbayes-icnn 1
//   kind single_layer | general
//   dims <x_dim> <y_dim>
//   [layers <L>]                              (general only)
//   [layer <l> <activation> <u_activation>]   (general only, before its tensors)
//   tensor <name> <rows> <cols>
//   <rows*cols values, row-major, whitespace separated>
//   ...
//   end
//
// Values are written with 17 significant digits so a round trip is exact.

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <otbayes/common.hpp>
#include <otbayes/icnn.hpp>
#include <otbayes/icnn_train.hpp>

namespace otbayes {

namespace detail {

inline void write_tensor(std::ostream& os, const std::string& name, const Matrix& m) {
  os << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j == 0 ? "" : " ") << m(i, j);
    os << '\n';
  }
}

inline std::string expect_word(std::istream& is, const std::string& want) {
  std::string got;
  if (!(is >> got) || (!want.empty() && got != want)) {
    throw Error("checkpoint: expected '" + want + "', got '" + got + "'");
  }
  return got;
}

inline Matrix read_tensor(std::istream& is, const std::string& name) {
  expect_word(is, "tensor");
  expect_word(is, name);
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (!(is >> rows >> cols) || rows < 0 || cols < 0) throw Error("checkpoint: bad shape for tensor " + name);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(is >> m(i, j))) throw Error("checkpoint: truncated tensor " + name);
    }
  }
  return m;
}

inline void write_header(std::ostream& os, const char* kind, Eigen::Index x_dim, Eigen::Index y_dim) {
  os << "otbayes-icnn 1\nkind " << kind << "\ndims " << x_dim << ' ' << y_dim << '\n';
  os << std::setprecision(17);
}

inline void read_header(std::istream& is, const std::string& kind, Eigen::Index& x_dim, Eigen::Index& y_dim) {
  expect_word(is, "otbayes-icnn");
  int version = 0;
  if (!(is >> version) || version != 1) throw Error("checkpoint: unsupported version");
  expect_word(is, "kind");
  expect_word(is, kind);
  expect_word(is, "dims");
  if (!(is >> x_dim >> y_dim) || x_dim < 1 || y_dim < 1) throw Error("checkpoint: bad dims");
}

inline Vector as_vector(const Matrix& m, const std::string& name) {
  if (m.cols() != 1) throw Error("checkpoint: tensor " + name + " must be a column");
  return m.col(0);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const SingleLayerIcnn& f) {
  detail::write_header(os, "single_layer", f.x_dim(), f.y_dim());
  detail::write_tensor(os, "w", f.w());
  detail::write_tensor(os, "wx", f.wx());
  detail::write_tensor(os, "wy", f.wy());
  detail::write_tensor(os, "bias", f.bias());
  os << "end\n";
}

inline void write_checkpoint(std::ostream& os, const Icnn& f) {
  detail::write_header(os, "general", f.x_dim(), f.y_dim());
  os << "layers " << f.layers().size() << '\n';
  for (std::size_t l = 0; l < f.layers().size(); ++l) {
    const auto& layer = f.layers()[l];
    os << "layer " << l << ' ' << to_string(layer.activation) << ' ' << to_string(layer.u_activation) << '\n';
    detail::write_tensor(os, "w_z", layer.w_z);
    detail::write_tensor(os, "w_u", layer.w_u);
    detail::write_tensor(os, "w_x", layer.w_x);
    detail::write_tensor(os, "bias", layer.bias);
    detail::write_tensor(os, "w_tilde", layer.w_tilde);
    detail::write_tensor(os, "bias_tilde", layer.bias_tilde);
  }
  os << "end\n";
}

inline SingleLayerIcnn read_single_layer_checkpoint(std::istream& is) {
  Eigen::Index x_dim = 0;
  Eigen::Index y_dim = 0;
  detail::read_header(is, "single_layer", x_dim, y_dim);
  Vector w = detail::as_vector(detail::read_tensor(is, "w"), "w");
  Matrix wx = detail::read_tensor(is, "wx");
  Matrix wy = detail::read_tensor(is, "wy");
  Vector bias = detail::as_vector(detail::read_tensor(is, "bias"), "bias");
  detail::expect_word(is, "end");
  detail::require_dim(wx.cols(), x_dim, "checkpoint wx");
  detail::require_dim(wy.cols(), y_dim, "checkpoint wy");
  return {std::move(w), std::move(wx), std::move(wy), std::move(bias)};
}

inline Icnn read_icnn_checkpoint(std::istream& is) {
  Eigen::Index x_dim = 0;
  Eigen::Index y_dim = 0;
  detail::read_header(is, "general", x_dim, y_dim);
  detail::expect_word(is, "layers");
  std::size_t count = 0;
  if (!(is >> count) || count == 0) throw Error("checkpoint: bad layer count");
  std::vector<IcnnLayer> layers(count);
  for (std::size_t l = 0; l < count; ++l) {
    detail::expect_word(is, "layer");
    std::size_t index = 0;
    if (!(is >> index) || index != l) throw Error("checkpoint: layers out of order");
    auto& layer = layers[l];
    layer.activation = activation_from_string(detail::expect_word(is, ""));
    layer.u_activation = activation_from_string(detail::expect_word(is, ""));
    layer.w_z = detail::read_tensor(is, "w_z");
    layer.w_u = detail::read_tensor(is, "w_u");
    layer.w_x = detail::read_tensor(is, "w_x");
    layer.bias = detail::as_vector(detail::read_tensor(is, "bias"), "bias");
    layer.w_tilde = detail::read_tensor(is, "w_tilde");
    const Matrix bt = detail::read_tensor(is, "bias_tilde");
    layer.bias_tilde = bt.size() == 0 ? Vector(0) : detail::as_vector(bt, "bias_tilde");
  }
  detail::expect_word(is, "end");
  return {x_dim, y_dim, std::move(layers)};
}

template <typename P>
void save_checkpoint(const std::string& path, const P& f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_checkpoint(os, f);
}

/// CSV columns: step, objective, f-lr, g-lr.
inline void write_loss_trace(std::ostream& os, const std::vector<LossRecord>& trace) {
  os << "step,objective,f-lr,g-lr\n" << std::setprecision(17);
  for (const auto& r : trace) os << r.step << ',' << r.objective << ',' << r.lr_f << ',' << r.lr_g << '\n';
}

}  // namespace otbayes

#endif  // OTBAYES_CHECKPOINT_HPP
