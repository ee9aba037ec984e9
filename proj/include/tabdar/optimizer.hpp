#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "common.hpp"
#include "nn.hpp"

namespace tabdar {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;  // decoupled, skipped for tensors with decay = false
};

template <typename T>
struct OptimizerState {
  std::vector<Mat<T>> first_moment;
  std::vector<Mat<T>> second_moment;
  std::uint64_t step = 0;

  static OptimizerState for_params(const std::vector<nn::ParamRef<T>>& params) {
    OptimizerState s;
    for (const auto& p : params) {
      s.first_moment.push_back(Mat<T>::Zero(p.tensor->rows(), p.tensor->cols()));
      s.second_moment.push_back(Mat<T>::Zero(p.tensor->rows(), p.tensor->cols()));
    }
    return s;
  }
};

// One Adam step with bias correction; weight decay multiplies the parameter
// by (1 - lr * wd) before the moment update, outside the moments.
template <typename T>
void adam_step(const std::vector<nn::ParamRef<T>>& params, const std::vector<nn::ParamRef<T>>& grads,
               OptimizerState<T>& state, double lr, const AdamConfig& cfg) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Mat<T>& p = *params[i].tensor;
    const Mat<T>& g = *grads[i].tensor;
    Mat<T>& m = state.first_moment[i];
    Mat<T>& v = state.second_moment[i];
    if (params[i].decay && cfg.weight_decay != 0.0) p *= static_cast<T>(1.0 - lr * cfg.weight_decay);
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    p.array() -= step_size * m.array() / ((v.array().sqrt() * inv_sqrt_bc2) + static_cast<T>(cfg.eps));
  }
}

// Scales gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
template <typename T>
double clip_grad_norm(const std::vector<nn::ParamRef<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.tensor->squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-6));
    for (const auto& g : grads) *g.tensor *= scale;
  }
  return norm;
}

// Reduce-on-plateau in "min" mode with a relative improvement threshold.
// After more than `patience` epochs without improvement the rate is
// multiplied by `factor` (floored at min_lr) and the counter resets.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience, double min_lr, double threshold = 1e-4)
      : lr_(lr), factor_(factor), patience_(patience), min_lr_(min_lr), threshold_(threshold) {}

  double lr() const { return lr_; }

  // Returns true when the rate was reduced.
  bool step(double metric) {
    if (metric < best_ * (1.0 - threshold_)) {
      best_ = metric;
      bad_epochs_ = 0;
      return false;
    }
    if (++bad_epochs_ <= patience_) return false;
    bad_epochs_ = 0;
    const double next = std::max(lr_ * factor_, min_lr_);
    const bool reduced = next < lr_;
    lr_ = next;
    return reduced;
  }

 private:
  double lr_;
  double factor_;
  int patience_;
  double min_lr_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

}  // namespace tabdar
