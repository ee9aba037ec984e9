#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "nn.hpp"

namespace tabdar {

inline constexpr double kHeadInitStd = 0.02;

// VE noise levels with sigma(t) = t. Training draws ln(sigma) ~ N(p_mean, p_std^2),
// clamped to [sigma_min, sigma_max].
struct NoiseSchedule {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double p_mean = -1.2;
  double p_std = 1.2;

  double sigma(double t) const { return t; }

  double sample_sigma(Rng& rng) const {
    return std::clamp(std::exp(p_mean + p_std * standard_normal(rng)), sigma_min, sigma_max);
  }
};

// Forward VE perturbation x_t = x_0 + sigma * eps.
inline double perturb(double x0, double sigma, double eps) { return x0 + sigma * eps; }

// Sinusoidal embedding: first half sin(t f_k), second half cos(t f_k),
// f_k = 10000^(-2k/d).
template <typename T>
Mat<T> sinusoidal_embedding(std::span<const double> t, Eigen::Index d) {
  const Eigen::Index half = d / 2;
  Mat<T> pe = Mat<T>::Zero(static_cast<Eigen::Index>(t.size()), d);
  for (Eigen::Index k = 0; k < half; ++k) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d));
    for (std::size_t r = 0; r < t.size(); ++r) {
      pe(static_cast<Eigen::Index>(r), k) = static_cast<T>(std::sin(t[r] * freq));
      pe(static_cast<Eigen::Index>(r), k + half) = static_cast<T>(std::cos(t[r] * freq));
    }
  }
  return pe;
}

// f_i: d -> d -> d -> d -> |C_i| with ReLU.
template <typename T>
using DiscreteHead = nn::Mlp<T>;

template <typename T>
DiscreteHead<T> make_discrete_head(Eigen::Index d, std::size_t categories, Rng& rng) {
  return DiscreteHead<T>::make({d, d, d, d, static_cast<Eigen::Index>(categories)}, nn::Activation::ReLU,
                               kHeadInitStd, rng);
}

// Row-wise cross-entropy -log softmax(logits)[label] with the max shift.
// Writes d(loss)/d(logits) scaled by `scale` into dlogits when non-null.
template <typename T>
ColVec<double> cross_entropy(const Mat<T>& logits, std::span<const std::size_t> labels, Mat<T>* dlogits = nullptr,
                             double scale = 1.0) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index k = logits.cols();
  ColVec<double> loss(n);
  if (dlogits) dlogits->resize(n, k);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t label = labels[static_cast<std::size_t>(r)];
    if (label >= static_cast<std::size_t>(k))
      throw SchemaError("label " + std::to_string(label) + " out of range for " + std::to_string(k) + " classes");
    const double mx = static_cast<double>(logits.row(r).maxCoeff());
    double sum = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) sum += std::exp(static_cast<double>(logits(r, c)) - mx);
    const double lse = mx + std::log(sum);
    loss(r) = lse - static_cast<double>(logits(r, static_cast<Eigen::Index>(label)));
    if (dlogits) {
      for (Eigen::Index c = 0; c < k; ++c) {
        const double p = std::exp(static_cast<double>(logits(r, c)) - lse);
        (*dlogits)(r, c) = static_cast<T>(scale * (p - (c == static_cast<Eigen::Index>(label) ? 1.0 : 0.0)));
      }
    }
  }
  return loss;
}

inline double discrete_loss(std::span<const double> logits, std::size_t label) {
  Mat<double> m(1, static_cast<Eigen::Index>(logits.size()));
  for (std::size_t i = 0; i < logits.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = logits[i];
  const std::size_t labels[1] = {label};
  return cross_entropy<double>(m, labels)(0);
}

// Noise predictor built around F = trunk(in_proj(c_in * x_t) + mlp_t(PE(sigma)) + mlp_z(z)).
template <typename T>
struct Denoiser {
  nn::Linear<T> in_proj;  // 1 -> d
  nn::Mlp<T> mlp_t;       // d -> d -> d, SiLU
  nn::Mlp<T> mlp_z;       // d -> d -> d, SiLU
  nn::Mlp<T> trunk;       // d -> d -> d -> d -> 1, SiLU

  struct Cache {
    Mat<T> xt;  // scaled network input
    ColVec<T> out_scale;
    typename nn::Mlp<T>::Cache t, z, trunk;
  };

  static Denoiser make(Eigen::Index d, Rng& rng) {
    Denoiser m;
    m.in_proj = nn::Linear<T>(nn::normal_init<T>(1, d, kHeadInitStd, rng), true);
    m.mlp_t = nn::Mlp<T>::make({d, d, d}, nn::Activation::SiLU, kHeadInitStd, rng);
    m.mlp_z = nn::Mlp<T>::make({d, d, d}, nn::Activation::SiLU, kHeadInitStd, rng);
    m.trunk = nn::Mlp<T>::make({d, d, d, d, 1}, nn::Activation::SiLU, kHeadInitStd, rng);
    return m;
  }

  Denoiser zeros_like() const {
    return {in_proj.zeros_like(), mlp_t.zeros_like(), mlp_z.zeros_like(), trunk.zeros_like()};
  }

  Eigen::Index width() const { return in_proj.out(); }

  // Preconditioning: the network F sees c_in * x_t and its output enters
  //   eps_hat = sigma * c_in^2 * x_t - s * c_in * F,  c_in = 1 / sqrt(sigma^2 + s^2),
  // where s^2 is the variance of the encoded data. The first term is the
  // optimal prediction for Gaussian data, so F only models the residual.
  static constexpr double kDataVariance = 0.5;

  static double input_scale(double sigma) { return 1.0 / std::sqrt(sigma * sigma + kDataVariance); }
  static double skip_scale(double sigma) { return sigma / (sigma * sigma + kDataVariance); }
  static double output_scale(double sigma) { return -std::sqrt(kDataVariance) * input_scale(sigma); }
  static double noise_feature(double sigma) { return sigma; }

  static Mat<T> time_features(std::span<const double> sigma, Eigen::Index d) {
    std::vector<double> t(sigma.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = noise_feature(sigma[i]);
    return sinusoidal_embedding<T>(t, d);
  }

  static Mat<T> scaled_input(std::span<const double> xt, std::span<const double> sigma) {
    Mat<T> x(static_cast<Eigen::Index>(xt.size()), 1);
    for (std::size_t i = 0; i < xt.size(); ++i)
      x(static_cast<Eigen::Index>(i), 0) = static_cast<T>(xt[i] * input_scale(sigma[i]));
    return x;
  }

  static ColVec<T> combine(std::span<const double> xt, std::span<const double> sigma, const Mat<T>& f) {
    ColVec<T> eps(f.rows());
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      eps(i) = static_cast<T>(skip_scale(sigma[k]) * xt[k] + output_scale(sigma[k]) * static_cast<double>(f(i, 0)));
    }
    return eps;
  }

  Mat<T> embed_latent(const Mat<T>& z) const { return mlp_z.forward(z); }

  RowVec<T> embed_time(double sigma) const {
    const double s[1] = {sigma};
    return mlp_t.forward(time_features(s, width())).row(0);
  }

  // Condition embedding e* = mlp_t(PE(sigma)) + mlp_z(z), one row per sample.
  Mat<T> condition(std::span<const double> sigma, const Mat<T>& z) const {
    return mlp_t.forward(time_features(sigma, width())) + mlp_z.forward(z);
  }

  ColVec<T> predict(std::span<const double> xt, std::span<const double> sigma, const Mat<T>& cond) const {
    return combine(xt, sigma, trunk.forward(in_proj.forward(scaled_input(xt, sigma)) + cond));
  }

  ColVec<T> forward(std::span<const double> xt, std::span<const double> sigma, const Mat<T>& z,
                    Cache* cache = nullptr) const {
    const Mat<T> x = scaled_input(xt, sigma);
    const Mat<T> pe = time_features(sigma, width());
    Mat<T> u = in_proj.forward(x) + mlp_t.forward(pe, cache ? &cache->t : nullptr) +
               mlp_z.forward(z, cache ? &cache->z : nullptr);
    if (cache) {
      cache->xt = x;
      cache->out_scale.resize(x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        cache->out_scale(i) = static_cast<T>(output_scale(sigma[static_cast<std::size_t>(i)]));
    }
    return combine(xt, sigma, trunk.forward(u, cache ? &cache->trunk : nullptr));
  }

  // Accumulates parameter gradients; returns d(loss)/dz.
  Mat<T> backward(const Cache& cache, const ColVec<T>& deps, Denoiser& grad) const {
    const Mat<T> df = deps.cwiseProduct(cache.out_scale);
    const Mat<T> du = trunk.backward(cache.trunk, df, grad.trunk);
    in_proj.accumulate(cache.xt, du, grad.in_proj);
    mlp_t.backward(cache.t, du, grad.mlp_t);
    return mlp_z.backward(cache.z, du, grad.mlp_z);
  }

  void params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    in_proj.params(prefix + ".in", out);
    mlp_t.params(prefix + ".mlp_t", out);
    mlp_z.params(prefix + ".mlp_z", out);
    trunk.params(prefix + ".trunk", out);
  }
};

// Single-sample ||eps_hat - eps||^2 at a noise level drawn from the schedule.
// predict(x_t, sigma) -> eps_hat.
template <typename Predict>
double diffusion_loss_with(Predict&& predict, double x0, const NoiseSchedule& schedule, Rng& rng) {
  const double sigma = schedule.sample_sigma(rng);
  const double eps = standard_normal(rng);
  const double err = static_cast<double>(predict(perturb(x0, sigma, eps), sigma)) - eps;
  return err * err;
}

template <typename T>
double diffusion_loss(const Denoiser<T>& denoiser, double x0, const RowVec<T>& z, const NoiseSchedule& schedule,
                      Rng& rng) {
  const Mat<T> zm = z;
  return diffusion_loss_with(
      [&](double xt, double sigma) {
        const double x[1] = {xt};
        const double s[1] = {sigma};
        return denoiser.forward(x, s, zm)(0);
      },
      x0, schedule, rng);
}

}  // namespace tabdar
