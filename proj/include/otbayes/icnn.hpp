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

#ifndef OTBAYES_ICNN_HPP
#define OTBAYES_ICNN_HPP

#include <cmath>
#include <concepts>
#include <string>
#include <utility>
#include <vector>

#include <otbayes/common.hpp>
#include <otbayes/ensemble_stats.hpp>

namespace otbayes {

/// Entry-wise activations. All three are convex and non-decreasing.
enum class Activation { kIdentity, kRelu, kReluSquared };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kReluSquared: return "relu_squared";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "relu") return Activation::kRelu;
  if (s == "relu_squared") return Activation::kReluSquared;
  throw Error("unknown activation '" + s + "'");
}

/// Forward-mode dual number, used to differentiate parameter gradients
/// along a direction in x.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value, double tangent = 0.0) : v(value), d(tangent) {}  // NOLINT(google-explicit-constructor)

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
  friend Dual operator*(double s, const Dual& a) { return {s * a.v, s * a.d}; }
};

inline double value_of(double t) { return t; }
inline double value_of(const Dual& t) { return t.v; }

// The kink of relu at 0 takes the zero branch.
template <typename T>
T activate(Activation a, const T& t) {
  switch (a) {
    case Activation::kIdentity: return t;
    case Activation::kRelu: return value_of(t) > 0.0 ? t : T{0.0};
    case Activation::kReluSquared: return value_of(t) > 0.0 ? t * t : T{0.0};
  }
  return t;
}

template <typename T>
T activate_derivative(Activation a, const T& t) {
  switch (a) {
    case Activation::kIdentity: return T{1.0};
    case Activation::kRelu: return T{value_of(t) > 0.0 ? 1.0 : 0.0};
    case Activation::kReluSquared: return value_of(t) > 0.0 ? 2.0 * t : T{0.0};
  }
  return T{1.0};
}

/// f(x, y) = sum_k w_k (wx_k . x + wy_k . y + bias_k)_+^2 with w_k >= 0.
class SingleLayerIcnn {
 public:
  SingleLayerIcnn() = default;

  SingleLayerIcnn(Vector w, Matrix wx, Matrix wy, Vector bias)
      : w_(std::move(w)), wx_(std::move(wx)), wy_(std::move(wy)), bias_(std::move(bias)) {
    const auto k = w_.size();
    detail::require(k >= 1, "single-layer ICNN needs at least one unit");
    detail::require(wx_.rows() == k && wy_.rows() == k && bias_.size() == k,
                    "single-layer ICNN: parameter shapes disagree");
  }

  /// wx, wy, bias ~ N(0, 1) / sqrt(K); w ~ |N(0, 1)| / K.
  static SingleLayerIcnn random(Eigen::Index units, Eigen::Index x_dim, Eigen::Index y_dim, RandomStream& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(units));
    Vector w = rng.normal_vector(units).cwiseAbs() / static_cast<double>(units);
    Matrix wx = s * rng.normal_matrix(units, x_dim);
    Matrix wy = s * rng.normal_matrix(units, y_dim);
    Vector bias = s * rng.normal_vector(units);
    return {std::move(w), std::move(wx), std::move(wy), std::move(bias)};
  }

  [[nodiscard]] Eigen::Index units() const { return w_.size(); }
  [[nodiscard]] Eigen::Index x_dim() const { return wx_.cols(); }
  [[nodiscard]] Eigen::Index y_dim() const { return wy_.cols(); }
  [[nodiscard]] const Vector& w() const { return w_; }
  [[nodiscard]] const Matrix& wx() const { return wx_; }
  [[nodiscard]] const Matrix& wy() const { return wy_; }
  [[nodiscard]] const Vector& bias() const { return bias_; }

  void validate() const {
    if ((w_.array() < 0.0).any()) throw Error("convexity violated: negative output weight");
  }

  [[nodiscard]] double value(const Vector& x, const Vector& y) const {
    const Vector s = (wx_ * x + wy_ * y + bias_).cwiseMax(0.0);
    return w_.dot(s.cwiseProduct(s));
  }

  [[nodiscard]] Vector grad_x(const Vector& x, const Vector& y) const {
    const Vector s = (wx_ * x + wy_ * y + bias_).cwiseMax(0.0);
    return 2.0 * wx_.transpose() * w_.cwiseProduct(s);
  }

  // Flat layout: w, wx (column-major), wy (column-major), bias.
  [[nodiscard]] Eigen::Index parameter_count() const { return units() * (2 + x_dim() + y_dim()); }

  [[nodiscard]] Vector flat() const {
    Vector out(parameter_count());
    out << w_, wx_.reshaped(), wy_.reshaped(), bias_;
    return out;
  }

  void set_flat(const Vector& p) {
    detail::require_dim(p.size(), parameter_count(), "single-layer ICNN parameters");
    const auto k = units();
    Eigen::Index o = 0;
    w_ = p.segment(o, k);
    o += k;
    wx_ = p.segment(o, k * x_dim()).reshaped(k, x_dim());
    o += k * x_dim();
    wy_ = p.segment(o, k * y_dim()).reshaped(k, y_dim());
    o += k * y_dim();
    bias_ = p.segment(o, k);
  }

  /// 1 for entries that must stay non-negative.
  [[nodiscard]] Vector constraint_mask() const {
    Vector mask = Vector::Zero(parameter_count());
    mask.head(units()).setOnes();
    return mask;
  }

  /// out += weight * d f(x, y) / d theta.
  void accumulate_param_grad(const Vector& x, const Vector& y, double weight, Vector& out) const {
    const auto k = units();
    const Vector s = (wx_ * x + wy_ * y + bias_).cwiseMax(0.0);
    const Vector ws = 2.0 * weight * w_.cwiseProduct(s);
    Eigen::Index o = 0;
    out.segment(o, k) += weight * s.cwiseProduct(s);
    o += k;
    out.segment(o, k * x_dim()) += (ws * x.transpose()).reshaped();
    o += k * x_dim();
    out.segment(o, k * y_dim()) += (ws * y.transpose()).reshaped();
    o += k * y_dim();
    out.segment(o, k) += ws;
  }

  /// out += weight * d [v . grad_x f(x, y)] / d theta.
  void accumulate_mixed_grad(const Vector& x, const Vector& y, const Vector& v, double weight, Vector& out) const {
    const auto k = units();
    const Vector pre = wx_ * x + wy_ * y + bias_;
    const Vector s = pre.cwiseMax(0.0);
    const Vector ind = (pre.array() > 0.0).cast<double>().matrix();
    const Vector av = wx_ * v;
    const Vector c = 2.0 * weight * w_.cwiseProduct(ind).cwiseProduct(av);
    Eigen::Index o = 0;
    out.segment(o, k) += 2.0 * weight * s.cwiseProduct(av);
    o += k;
    out.segment(o, k * x_dim()) +=
        (c * x.transpose() + 2.0 * weight * w_.cwiseProduct(s) * v.transpose()).reshaped();
    o += k * x_dim();
    out.segment(o, k * y_dim()) += (c * y.transpose()).reshaped();
    o += k * y_dim();
    out.segment(o, k) += c;
  }

 private:
  Vector w_;
  Matrix wx_;
  Matrix wy_;
  Vector bias_;
};

/// One layer of the two-track recursion
///
///   z_{l+1} = act_l(W^z_l z_l + W^u_l u_l + W^x_l x + b_l),   z_0 = 0,
///   u_{l+1} = act~_l(W~_l u_l + b~_l),                       u_0 = y.
///
/// The u-track weights of the last layer are empty.
struct IcnnLayer {
  Matrix w_z;
  Matrix w_u;
  Matrix w_x;
  Vector bias;
  Activation activation = Activation::kRelu;
  Matrix w_tilde;
  Vector bias_tilde;
  Activation u_activation = Activation::kRelu;
};

/// General input convex network, convex in x for every y.
class Icnn {
 public:
  Icnn() = default;

  Icnn(Eigen::Index x_dim, Eigen::Index y_dim, std::vector<IcnnLayer> layers)
      : x_dim_(x_dim), y_dim_(y_dim), layers_(std::move(layers)) {
    check_shapes();
  }

  /// Builds a network with z-track widths `hidden` (the scalar output layer is
  /// appended) and u-track widths `u_widths` (one per non-final layer).
  /// Activations: squared ReLU in layer 0, ReLU in hidden layers, identity at
  /// the output.
  static Icnn random(Eigen::Index x_dim, Eigen::Index y_dim, const std::vector<Eigen::Index>& hidden,
                     const std::vector<Eigen::Index>& u_widths, RandomStream& rng) {
    detail::require(u_widths.size() == hidden.size(), "ICNN: need one u-track width per hidden layer");
    std::vector<Eigen::Index> z_out(hidden);
    z_out.push_back(1);
    std::vector<IcnnLayer> layers;
    Eigen::Index z_in = 0;
    Eigen::Index u_in = y_dim;
    for (std::size_t l = 0; l < z_out.size(); ++l) {
      const Eigen::Index h = z_out[l];
      const double s = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(h, 1)));
      IcnnLayer layer;
      layer.w_z = z_in == 0 ? Matrix(h, 0) : Matrix(rng.normal_matrix(h, z_in).cwiseAbs() / static_cast<double>(z_in));
      layer.w_u = s * rng.normal_matrix(h, u_in);
      layer.w_x = s * rng.normal_matrix(h, x_dim);
      layer.bias = s * rng.normal_vector(h);
      layer.activation = l == 0 ? Activation::kReluSquared
                                : (l + 1 == z_out.size() ? Activation::kIdentity : Activation::kRelu);
      const Eigen::Index u_out = l < u_widths.size() ? u_widths[l] : 0;
      layer.w_tilde = s * rng.normal_matrix(u_out, u_in);
      layer.bias_tilde = s * rng.normal_vector(u_out);
      layer.u_activation = Activation::kRelu;
      layers.push_back(std::move(layer));
      z_in = h;
      u_in = u_out;
    }
    return {x_dim, y_dim, std::move(layers)};
  }

  /// Exact embedding of a single-layer network: a squared-ReLU layer
  /// followed by a linear read-out with non-negative weights.
  static Icnn from_single_layer(const SingleLayerIcnn& s) {
    const auto k = s.units();
    IcnnLayer first;
    first.w_z = Matrix(k, 0);
    first.w_u = s.wy();
    first.w_x = s.wx();
    first.bias = s.bias();
    first.activation = Activation::kReluSquared;
    first.w_tilde = Matrix(0, s.y_dim());
    first.bias_tilde = Vector(0);
    IcnnLayer out;
    out.w_z = s.w().transpose();
    out.w_u = Matrix(1, 0);
    out.w_x = Matrix::Zero(1, s.x_dim());
    out.bias = Vector::Zero(1);
    out.activation = Activation::kIdentity;
    out.w_tilde = Matrix(0, 0);
    out.bias_tilde = Vector(0);
    return {s.x_dim(), s.y_dim(), {std::move(first), std::move(out)}};
  }

  [[nodiscard]] Eigen::Index x_dim() const { return x_dim_; }
  [[nodiscard]] Eigen::Index y_dim() const { return y_dim_; }
  [[nodiscard]] const std::vector<IcnnLayer>& layers() const { return layers_; }

  /// Throws unless the network is convex in x: non-negative W^z, and
  /// activations convex (and non-decreasing past layer 0).
  void validate() const {
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      if (layers_[l].w_z.size() > 0 && layers_[l].w_z.minCoeff() < 0.0) {
        throw Error("convexity violated: negative W^z in layer " + std::to_string(l));
      }
    }
  }

  [[nodiscard]] double value(const Vector& x, const Vector& y) const {
    return run<double>(to_std(x), to_std(y), nullptr, nullptr);
  }

  [[nodiscard]] Vector grad_x(const Vector& x, const Vector& y) const {
    std::vector<double> gx(static_cast<std::size_t>(x_dim_), 0.0);
    run<double>(to_std(x), to_std(y), &gx, nullptr);
    return Eigen::Map<const Vector>(gx.data(), x_dim_);
  }

  [[nodiscard]] Eigen::Index parameter_count() const {
    Eigen::Index total = 0;
    for (const auto& l : layers_) {
      total += l.w_z.size() + l.w_u.size() + l.w_x.size() + l.bias.size() + l.w_tilde.size() + l.bias_tilde.size();
    }
    return total;
  }

  // Flat layout: per layer w_z, w_u, w_x, bias, w_tilde, bias_tilde (matrices column-major).
  [[nodiscard]] Vector flat() const {
    Vector out(parameter_count());
    Eigen::Index o = 0;
    auto put = [&](const auto& m) {
      out.segment(o, m.size()) = m.reshaped();
      o += m.size();
    };
    for (const auto& l : layers_) {
      put(l.w_z);
      put(l.w_u);
      put(l.w_x);
      put(l.bias);
      put(l.w_tilde);
      put(l.bias_tilde);
    }
    return out;
  }

  void set_flat(const Vector& p) {
    detail::require_dim(p.size(), parameter_count(), "ICNN parameters");
    Eigen::Index o = 0;
    auto take = [&](auto& m) {
      m = p.segment(o, m.size()).reshaped(m.rows(), m.cols());
      o += m.size();
    };
    for (auto& l : layers_) {
      take(l.w_z);
      take(l.w_u);
      take(l.w_x);
      take(l.bias);
      take(l.w_tilde);
      take(l.bias_tilde);
    }
  }

  [[nodiscard]] Vector constraint_mask() const {
    Vector mask = Vector::Zero(parameter_count());
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      if (l >= 1) mask.segment(o, layer.w_z.size()).setOnes();
      o += layer.w_z.size() + layer.w_u.size() + layer.w_x.size() + layer.bias.size() + layer.w_tilde.size() +
           layer.bias_tilde.size();
    }
    return mask;
  }

  void accumulate_param_grad(const Vector& x, const Vector& y, double weight, Vector& out) const {
    std::vector<double> grad(static_cast<std::size_t>(parameter_count()), 0.0);
    run<double>(to_std(x), to_std(y), nullptr, &grad);
    out += weight * Eigen::Map<const Vector>(grad.data(), parameter_count());
  }

  /// d/dtheta [v . grad_x f(x, y)] equals d/de [d/dtheta f(x + e v, y)] at e = 0,
  /// so one reverse sweep over dual numbers seeded with (x, v) yields it.
  void accumulate_mixed_grad(const Vector& x, const Vector& y, const Vector& v, double weight, Vector& out) const {
    std::vector<Dual> xd(static_cast<std::size_t>(x_dim_));
    for (Eigen::Index i = 0; i < x_dim_; ++i) xd[static_cast<std::size_t>(i)] = Dual{x(i), v(i)};
    std::vector<Dual> yd(static_cast<std::size_t>(y_dim_));
    for (Eigen::Index i = 0; i < y_dim_; ++i) yd[static_cast<std::size_t>(i)] = Dual{y(i), 0.0};
    std::vector<Dual> grad(static_cast<std::size_t>(parameter_count()));
    run<Dual>(xd, yd, nullptr, &grad);
    for (Eigen::Index i = 0; i < parameter_count(); ++i) out(i) += weight * grad[static_cast<std::size_t>(i)].d;
  }

 private:
  static std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

  void check_shapes() const {
    detail::require(!layers_.empty(), "ICNN needs at least one layer");
    Eigen::Index z_in = 0;
    Eigen::Index u_in = y_dim_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      const auto h = layer.bias.size();
      detail::require(layer.w_z.rows() == h && layer.w_z.cols() == z_in, "ICNN: W^z shape in layer " + std::to_string(l));
      detail::require(layer.w_u.rows() == h && layer.w_u.cols() == u_in, "ICNN: W^u shape in layer " + std::to_string(l));
      detail::require(layer.w_x.rows() == h && layer.w_x.cols() == x_dim_, "ICNN: W^x shape in layer " + std::to_string(l));
      detail::require(layer.w_tilde.cols() == u_in && layer.w_tilde.rows() == layer.bias_tilde.size(),
                      "ICNN: u-track shape in layer " + std::to_string(l));
      z_in = h;
      u_in = layer.bias_tilde.size();
    }
    detail::require(z_in == 1, "ICNN: output layer must be scalar");
  }

  // Forward pass, then (optionally) a reverse sweep seeded with d out = 1.
  template <typename T>
  double run(const std::vector<T>& x, const std::vector<T>& y, std::vector<T>* grad_x,
             std::vector<T>* grad_params) const {
    using Vec = std::vector<T>;
    const std::size_t depth = layers_.size();
    std::vector<Vec> z(depth + 1), pre(depth), u(depth + 1), pre_u(depth);
    u[0] = y;
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& L = layers_[l];
      const auto h = static_cast<std::size_t>(L.bias.size());
      pre[l].assign(h, T{0.0});
      z[l + 1].resize(h);
      for (std::size_t i = 0; i < h; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        T acc{L.bias(r)};
        for (std::size_t j = 0; j < z[l].size(); ++j) acc += L.w_z(r, static_cast<Eigen::Index>(j)) * z[l][j];
        for (std::size_t j = 0; j < u[l].size(); ++j) acc += L.w_u(r, static_cast<Eigen::Index>(j)) * u[l][j];
        for (std::size_t j = 0; j < x.size(); ++j) acc += L.w_x(r, static_cast<Eigen::Index>(j)) * x[j];
        pre[l][i] = acc;
        z[l + 1][i] = activate(L.activation, acc);
      }
      const auto hu = static_cast<std::size_t>(L.bias_tilde.size());
      pre_u[l].resize(hu);
      u[l + 1].resize(hu);
      for (std::size_t i = 0; i < hu; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        T acc{L.bias_tilde(r)};
        for (std::size_t j = 0; j < u[l].size(); ++j) acc += L.w_tilde(r, static_cast<Eigen::Index>(j)) * u[l][j];
        pre_u[l][i] = acc;
        u[l + 1][i] = activate(L.u_activation, acc);
      }
    }
    const double out = value_of(z[depth][0]);
    if (grad_x == nullptr && grad_params == nullptr) return out;

    // Offsets of each layer's block in the flat layout.
    std::vector<Eigen::Index> offset(depth);
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < depth; ++l) {
      offset[l] = o;
      const auto& L = layers_[l];
      o += L.w_z.size() + L.w_u.size() + L.w_x.size() + L.bias.size() + L.w_tilde.size() + L.bias_tilde.size();
    }

    std::vector<Vec> dz(depth + 1), du(depth + 1);
    for (std::size_t l = 0; l <= depth; ++l) {
      dz[l].assign(z[l].size(), T{0.0});
      du[l].assign(u[l].size(), T{0.0});
    }
    dz[depth][0] = T{1.0};
    Vec dx(x.size(), T{0.0});
    for (std::size_t l = depth; l-- > 0;) {
      const auto& L = layers_[l];
      const auto h = static_cast<std::size_t>(L.bias.size());
      const Eigen::Index rows = L.bias.size();
      Eigen::Index base = offset[l];
      const Eigen::Index o_wz = base;
      const Eigen::Index o_wu = o_wz + L.w_z.size();
      const Eigen::Index o_wx = o_wu + L.w_u.size();
      const Eigen::Index o_b = o_wx + L.w_x.size();
      const Eigen::Index o_wt = o_b + L.bias.size();
      const Eigen::Index o_bt = o_wt + L.w_tilde.size();

      // u-track of this layer feeds u[l + 1]; its adjoint is complete here.
      const auto hu = static_cast<std::size_t>(L.bias_tilde.size());
      const Eigen::Index rows_u = L.bias_tilde.size();
      for (std::size_t i = 0; i < hu; ++i) {
        const T g = du[l + 1][i] * activate_derivative(L.u_activation, pre_u[l][i]);
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < u[l].size(); ++j) {
          const auto c = static_cast<Eigen::Index>(j);
          du[l][j] += L.w_tilde(r, c) * g;
          if (grad_params) (*grad_params)[static_cast<std::size_t>(o_wt + c * rows_u + r)] += g * u[l][j];
        }
        if (grad_params) (*grad_params)[static_cast<std::size_t>(o_bt + r)] += g;
      }

      for (std::size_t i = 0; i < h; ++i) {
        const T g = dz[l + 1][i] * activate_derivative(L.activation, pre[l][i]);
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < z[l].size(); ++j) {
          const auto c = static_cast<Eigen::Index>(j);
          dz[l][j] += L.w_z(r, c) * g;
          if (grad_params) (*grad_params)[static_cast<std::size_t>(o_wz + c * rows + r)] += g * z[l][j];
        }
        for (std::size_t j = 0; j < u[l].size(); ++j) {
          const auto c = static_cast<Eigen::Index>(j);
          du[l][j] += L.w_u(r, c) * g;
          if (grad_params) (*grad_params)[static_cast<std::size_t>(o_wu + c * rows + r)] += g * u[l][j];
        }
        for (std::size_t j = 0; j < x.size(); ++j) {
          const auto c = static_cast<Eigen::Index>(j);
          dx[j] += L.w_x(r, c) * g;
          if (grad_params) (*grad_params)[static_cast<std::size_t>(o_wx + c * rows + r)] += g * x[j];
        }
        if (grad_params) (*grad_params)[static_cast<std::size_t>(o_b + r)] += g;
      }
    }
    if (grad_x) *grad_x = std::move(dx);
    return out;
  }

  Eigen::Index x_dim_ = 0;
  Eigen::Index y_dim_ = 0;
  std::vector<IcnnLayer> layers_;
};

/// What the trainer needs from a convex-in-x potential.
template <typename P>
concept ConvexPotential = requires(const P& p, P& q, const Vector& x, const Vector& v, Vector& out) {
  { p.value(x, x) } -> std::convertible_to<double>;
  { p.grad_x(x, x) } -> std::convertible_to<Vector>;
  { p.parameter_count() } -> std::convertible_to<Eigen::Index>;
  { p.flat() } -> std::convertible_to<Vector>;
  { p.constraint_mask() } -> std::convertible_to<Vector>;
  q.set_flat(x);
  p.accumulate_param_grad(x, x, 1.0, out);
  p.accumulate_mixed_grad(x, x, v, 1.0, out);
  p.validate();
};

template <ConvexPotential P>
double icnn_forward(const P& f, const Vector& x, const Vector& y) {
  detail::require_dim(x.size(), f.x_dim(), "ICNN input (x)");
  detail::require_dim(y.size(), f.y_dim(), "ICNN input (y)");
  f.validate();
  return f.value(x, y);
}

/// Exact gradient in x (reverse mode); zero branch at ReLU kinks.
template <ConvexPotential P>
Vector icnn_grad_x(const P& f, const Vector& x, const Vector& y) {
  detail::require_dim(x.size(), f.x_dim(), "ICNN input (x)");
  detail::require_dim(y.size(), f.y_dim(), "ICNN input (y)");
  f.validate();
  return f.grad_x(x, y);
}

/// Min-max objective
///
///   mean_{product} f(X, Y) + mean_{joint} [grad_x g(X, Y) . X - f(grad_x g(X, Y), Y)].
///
/// `F` and `G` need `value` and `grad_x` (any potential with that shape,
/// including quadratic stand-ins in tests).
template <typename F, typename G>
double minmax_objective(const F& f, const G& g, const JointSamples& joint_batch, const JointSamples& product_batch) {
  double product = 0.0;
  for (Eigen::Index i = 0; i < product_batch.size(); ++i) {
    const double v = f.value(product_batch.x().row(i).transpose(), product_batch.y().row(i).transpose());
    if (!std::isfinite(v)) throw Error("non-finite potential in product batch at index " + std::to_string(i));
    product += v;
  }
  double joint = 0.0;
  for (Eigen::Index i = 0; i < joint_batch.size(); ++i) {
    const Vector x = joint_batch.x().row(i).transpose();
    const Vector y = joint_batch.y().row(i).transpose();
    const Vector t = g.grad_x(x, y);
    const double v = t.dot(x) - f.value(t, y);
    if (!std::isfinite(v)) throw Error("non-finite conjugate term in joint batch at index " + std::to_string(i));
    joint += v;
  }
  return product / static_cast<double>(product_batch.size()) + joint / static_cast<double>(joint_batch.size());
}

/// X^i_1 = grad_x f(X^i_0, y) for every particle.
template <typename F>
Ensemble transport(const F& f, const Ensemble& ens, const Vector& y) {
  detail::require_dim(ens.dim(), f.x_dim(), "ensemble");
  detail::require_dim(y.size(), f.y_dim(), "observation");
  Matrix out(ens.size(), ens.dim());
  for (Eigen::Index i = 0; i < ens.size(); ++i) out.row(i) = f.grad_x(ens.particle(i).transpose(), y).transpose();
  return Ensemble{std::move(out)};
}

}  // namespace otbayes

#endif  // OTBAYES_ICNN_HPP
