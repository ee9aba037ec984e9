#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <unsupported/Eigen/SpecialFunctions>

#include "common.hpp"

namespace tabdar::nn {

// Visitor signature for parameter walks: f(name, tensor, apply_weight_decay).
template <typename T>
struct ParamRef {
  std::string name;
  Mat<T>* tensor;
  bool decay;
};

template <typename T>
Mat<T> normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(stddev * standard_normal(rng));
  return m;
}

template <typename T>
Mat<T> xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Mat<T> m(fan_in, fan_out);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(a * (2.0 * uniform01(rng) - 1.0));
  return m;
}

// y = x W + b with W stored (in x out).
template <typename T>
struct Linear {
  Mat<T> w;
  Mat<T> b;  // 1 x out, or empty when bias-free

  Linear() = default;
  Linear(Mat<T> weight, bool bias) : w(std::move(weight)) {
    if (bias) b = Mat<T>::Zero(1, w.cols());
  }

  Eigen::Index in() const { return w.rows(); }
  Eigen::Index out() const { return w.cols(); }
  bool has_bias() const { return b.size() != 0; }

  Linear zeros_like() const {
    Linear g;
    g.w = Mat<T>::Zero(w.rows(), w.cols());
    g.b = Mat<T>::Zero(b.rows(), b.cols());
    return g;
  }

  Mat<T> forward(const Mat<T>& x) const {
    Mat<T> y = x * w;
    if (has_bias()) y.rowwise() += b.row(0);
    return y;
  }

  // Accumulates parameter gradients into grad; returns dL/dx.
  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy, Linear& grad) const {
    accumulate(x, dy, grad);
    return dy * w.transpose();
  }

  void accumulate(const Mat<T>& x, const Mat<T>& dy, Linear& grad) const {
    grad.w.noalias() += x.transpose() * dy;
    if (has_bias()) grad.b += dy.colwise().sum();
  }

  void params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".w", &w, true});
    if (has_bias()) out.push_back({prefix + ".b", &b, true});
  }
};

enum class Activation { ReLU, SiLU };

template <typename T>
Mat<T> activate(const Mat<T>& x, Activation act) {
  if (act == Activation::ReLU) return x.cwiseMax(T(0));
  return (x.array() / (T(1) + (-x.array()).exp())).matrix();
}

template <typename T>
Mat<T> activate_backward(const Mat<T>& pre, const Mat<T>& dy, Activation act) {
  if (act == Activation::ReLU) return (pre.array() > T(0)).select(dy, T(0));
  const auto s = (T(1) / (T(1) + (-pre.array()).exp())).eval();
  return (dy.array() * (s * (T(1) + pre.array() * (T(1) - s)))).matrix();
}

// Exact (erf) GELU.
template <typename T>
Mat<T> gelu(const Mat<T>& x) {
  const T inv_sqrt2 = T(0.70710678118654752440);
  return (T(0.5) * x.array() * (T(1) + (x.array() * inv_sqrt2).erf())).matrix();
}

template <typename T>
Mat<T> gelu_backward(const Mat<T>& x, const Mat<T>& dy) {
  const T inv_sqrt2 = T(0.70710678118654752440);
  const T inv_sqrt2pi = T(0.39894228040143267794);
  const auto cdf = (T(0.5) * (T(1) + (x.array() * inv_sqrt2).erf())).eval();
  const auto pdf = (inv_sqrt2pi * (T(-0.5) * x.array().square()).exp()).eval();
  return (dy.array() * (cdf + x.array() * pdf)).matrix();
}

// Fully connected stack; activation between layers, none after the last.
template <typename T>
struct Mlp {
  std::vector<Linear<T>> layers;
  Activation act = Activation::ReLU;

  struct Cache {
    std::vector<Mat<T>> inputs;  // input to each layer
    std::vector<Mat<T>> pre;     // pre-activation output of each hidden layer
  };

  static Mlp make(const std::vector<Eigen::Index>& widths, Activation act, double init_std, Rng& rng) {
    Mlp m;
    m.act = act;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      m.layers.emplace_back(normal_init<T>(widths[i], widths[i + 1], init_std, rng), true);
    return m;
  }

  Mlp zeros_like() const {
    Mlp g;
    g.act = act;
    for (const auto& l : layers) g.layers.push_back(l.zeros_like());
    return g;
  }

  Eigen::Index out_width() const { return layers.back().out(); }

  Mat<T> forward(const Mat<T>& x, Cache* cache = nullptr) const {
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    Mat<T> h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (cache) cache->inputs.push_back(h);
      Mat<T> y = layers[i].forward(h);
      if (i + 1 == layers.size()) return y;
      if (cache) cache->pre.push_back(y);
      h = activate(y, act);
    }
    return h;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy, Mlp& grad) const {
    Mat<T> g = dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (i + 1 < layers.size()) g = activate_backward(cache.pre[i], g, act);
      g = layers[i].backward(cache.inputs[i], g, grad.layers[i]);
    }
    return g;
  }

  void params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].params(prefix + ".l" + std::to_string(i), out);
  }
};

// Row-wise layer normalization with learnable gain and bias (1 x d each).
template <typename T>
struct LayerNorm {
  static constexpr double kEps = 1e-5;
  Mat<T> gain;
  Mat<T> bias;

  struct Cache {
    Mat<T> xhat;
    ColVec<T> rstd;
  };

  static LayerNorm make(Eigen::Index d) { return {Mat<T>::Ones(1, d), Mat<T>::Zero(1, d)}; }
  LayerNorm zeros_like() const { return {Mat<T>::Zero(1, gain.cols()), Mat<T>::Zero(1, bias.cols())}; }

  Mat<T> forward(const Mat<T>& x, Cache& cache) const {
    const Eigen::Index d = x.cols();
    const ColVec<T> mean = x.rowwise().mean();
    Mat<T> centered = x.colwise() - mean;
    const ColVec<T> var = centered.array().square().rowwise().sum() / static_cast<T>(d);
    cache.rstd = (var.array() + static_cast<T>(kEps)).rsqrt();
    cache.xhat = centered.array().colwise() * cache.rstd.array();
    Mat<T> y = cache.xhat.array().rowwise() * gain.row(0).array();
    y.rowwise() += bias.row(0);
    return y;
  }

  Mat<T> backward(const Cache& cache, const Mat<T>& dy, LayerNorm& grad) const {
    grad.gain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    grad.bias += dy.colwise().sum();
    const Mat<T> dxhat = dy.array().rowwise() * gain.row(0).array();
    const T inv_d = T(1) / static_cast<T>(dy.cols());
    const ColVec<T> mean_dxhat = dxhat.rowwise().sum() * inv_d;
    const ColVec<T> mean_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() * inv_d;
    Mat<T> dx = dxhat;
    dx.colwise() -= mean_dxhat;
    dx -= (cache.xhat.array().colwise() * mean_dxhat_xhat.array()).matrix();
    return dx.array().colwise() * cache.rstd.array();
  }

  void params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".gain", &gain, false});
    out.push_back({prefix + ".bias", &bias, false});
  }
};

}  // namespace tabdar::nn
