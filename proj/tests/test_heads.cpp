#include <gtest/gtest.h>

#include <cmath>

#include "tabdar/heads.hpp"

namespace tabdar {
namespace {

template <typename T>
void randomize(std::vector<nn::ParamRef<T>> ps, Rng& rng, double scale) {
  for (auto& p : ps)
    for (Eigen::Index i = 0; i < p.tensor->size(); ++i) p.tensor->data()[i] = static_cast<T>(scale * standard_normal(rng));
}

template <typename T>
std::vector<nn::ParamRef<T>> params_of(Denoiser<T>& m) {
  std::vector<nn::ParamRef<T>> out;
  m.params("p", out);
  return out;
}

TEST(DiscreteHead, ShapesFollowWidths) {
  Rng rng(1);
  const auto head = make_discrete_head<float>(8, 5, rng);
  ASSERT_EQ(head.layers.size(), 4u);
  EXPECT_EQ(head.layers[0].w.rows(), 8);
  EXPECT_EQ(head.layers[3].w.cols(), 5);
  EXPECT_EQ(head.act, nn::Activation::ReLU);
}

TEST(DiscreteHead, ZeroWeightsGiveEqualLogits) {
  Rng rng(2);
  auto head = make_discrete_head<double>(8, 4, rng);
  for (auto& l : head.layers) l.w.setZero();
  const Mat<double> z = Mat<double>::Random(3, 8);
  const Mat<double> logits = head.forward(z);
  for (Eigen::Index r = 0; r < 3; ++r) EXPECT_EQ(logits.row(r).maxCoeff(), logits.row(r).minCoeff());
}

TEST(DiscreteHead, ZeroInputWithZeroBiasesGivesZeroLogits) {
  Rng rng(3);
  const auto head = make_discrete_head<double>(8, 3, rng);
  EXPECT_TRUE(head.forward(Mat<double>::Zero(2, 8)).isZero(0.0));
}

TEST(DiscreteHead, SingleCategory) {
  Rng rng(4);
  const auto head = make_discrete_head<double>(8, 1, rng);
  const Mat<double> logits = head.forward(Mat<double>::Random(1, 8));
  ASSERT_EQ(logits.cols(), 1);
  const std::vector<double> l{logits(0, 0)};
  EXPECT_NEAR(discrete_loss(l, 0), 0.0, 1e-15);
}

TEST(CrossEntropy, ClosedForms) {
  EXPECT_NEAR(discrete_loss(std::vector<double>{0.3, 0.3, 0.3, 0.3}, 2), 1.3862944, 1e-7);
  EXPECT_NEAR(discrete_loss(std::vector<double>{10, -10}, 0), std::log1p(std::exp(-20.0)), 1e-15);
  EXPECT_NEAR(discrete_loss(std::vector<double>{10, -10}, 0), 2.06e-9, 1e-11);
  EXPECT_NEAR(discrete_loss(std::vector<double>{1000, 0}, 1), 1000.0, 1e-9);
}

TEST(CrossEntropy, ShiftInvariantInSinglePrecision) {
  Mat<float> a(1, 3), b(1, 3);
  a << 0.5f, -1.25f, 2.0f;
  b = a.array() + 100.0f;
  const std::size_t label[1] = {1};
  EXPECT_NEAR(cross_entropy<float>(a, label)(0), cross_entropy<float>(b, label)(0), 1e-5);
  const std::vector<double> da{0.5, -1.25, 2.0}, db{100.5, 98.75, 102.0};
  EXPECT_NEAR(discrete_loss(da, 1), discrete_loss(db, 1), 1e-12);
}

TEST(CrossEntropy, LabelOutOfRange) {
  EXPECT_THROW(discrete_loss(std::vector<double>{1, 2}, 2), SchemaError);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Mat<double> logits(2, 3);
  logits << 1, 2, 3, -1, 0, 4;
  const std::size_t labels[2] = {0, 2};
  Mat<double> d;
  cross_entropy<double>(logits, labels, &d, 0.5);
  for (Eigen::Index r = 0; r < 2; ++r) {
    const RowVec<double> p = logits.row(r).array().exp() / logits.row(r).array().exp().sum();
    for (Eigen::Index c = 0; c < 3; ++c)
      EXPECT_NEAR(d(r, c), 0.5 * (p(c) - (c == static_cast<Eigen::Index>(labels[r]) ? 1 : 0)), 1e-15);
  }
}

TEST(Perturb, Examples) {
  EXPECT_NEAR(perturb(0.3, 1.0, -0.2), 0.1, 1e-15);
  EXPECT_EQ(perturb(0.7, 0.0, 5.0), 0.7);
}

TEST(Perturb, MonteCarloMoments) {
  Rng rng(5);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = perturb(0.4, 2.0, standard_normal(rng));
    s += x;
    s2 += x * x;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.4, 0.02);
  EXPECT_NEAR(var, 4.0, 0.1);
}

TEST(NoiseSchedule, LogNormalClampedToRange) {
  NoiseSchedule sched;
  Rng rng(6);
  double sum = 0, sum2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double s = sched.sample_sigma(rng);
    ASSERT_GE(s, sched.sigma_min);
    ASSERT_LE(s, sched.sigma_max);
    sum += std::log(s);
    sum2 += std::log(s) * std::log(s);
  }
  const double m = sum / n;
  EXPECT_NEAR(m, -1.2, 0.02);
  EXPECT_NEAR(std::sqrt(sum2 / n - m * m), 1.2, 0.02);
  EXPECT_EQ(sched.sigma(0.37), 0.37);
}

TEST(Sinusoidal, ZeroTimeAndUnitPairs) {
  const std::vector<double> t{0.0, 0.37, 80.0};
  const Mat<double> pe = sinusoidal_embedding<double>(t, 8);
  for (Eigen::Index k = 0; k < 4; ++k) {
    EXPECT_EQ(pe(0, k), 0.0);
    EXPECT_EQ(pe(0, k + 4), 1.0);
    for (Eigen::Index r = 0; r < 3; ++r) EXPECT_NEAR(pe(r, k) * pe(r, k) + pe(r, k + 4) * pe(r, k + 4), 1.0, 1e-12);
  }
  EXPECT_NEAR(pe(1, 1), std::sin(0.37 * std::pow(10000.0, -2.0 / 8)), 1e-15);
}

TEST(Denoiser, ZeroTrunkWeightsLeaveOnlyTheAnalyticTerm) {
  Rng rng(7);
  auto den = Denoiser<double>::make(8, rng);
  for (auto& l : den.trunk.layers) l.w.setZero();
  den.trunk.layers.back().b(0, 0) = 0.25;
  const std::vector<double> xt{0.0, 1.5}, sigma{0.5, 2.0};
  const ColVec<double> eps = den.forward(xt, sigma, Mat<double>::Random(2, 8));
  for (int i = 0; i < 2; ++i) {
    const double c_in = 1.0 / std::sqrt(sigma[i] * sigma[i] + 0.5);
    EXPECT_NEAR(eps(i), sigma[i] * c_in * c_in * xt[i] - std::sqrt(0.5) * c_in * 0.25, 1e-14);
  }
}

TEST(Denoiser, FreshInitIsCloseToGaussianOptimum) {
  Rng rng(8);
  const auto den = Denoiser<double>::make(8, rng);
  const std::vector<double> xt{0.8}, sigma{1.0};
  EXPECT_NEAR(den.forward(xt, sigma, Mat<double>::Zero(1, 8))(0), 0.8 / 1.5, 1e-4);
}

TEST(Denoiser, OutputDependsOnLatent) {
  Rng rng(9);
  auto den = Denoiser<double>::make(8, rng);
  randomize(params_of(den), rng, 0.3);
  const std::vector<double> xt{0.2}, sigma{0.7};
  const Mat<double> z1 = Mat<double>::Random(1, 8);
  const Mat<double> z2 = z1.array() + 0.1;
  EXPECT_NE(den.forward(xt, sigma, z1)(0), den.forward(xt, sigma, z2)(0));
}

TEST(Denoiser, BatchedPredictMatchesForward) {
  Rng rng(10);
  auto den = Denoiser<double>::make(8, rng);
  randomize(params_of(den), rng, 0.3);
  const std::vector<double> xt{0.2, -1.0, 3.0}, sigma{0.01, 0.7, 30.0};
  const Mat<double> z = Mat<double>::Random(3, 8);
  EXPECT_TRUE(den.predict(xt, sigma, den.condition(sigma, z)).isApprox(den.forward(xt, sigma, z), 1e-12));
}

TEST(Denoiser, GradientsMatchFiniteDifferences) {
  Rng rng(11);
  auto den = Denoiser<double>::make(8, rng);
  randomize(params_of(den), rng, 0.4);
  const std::vector<double> xt{0.2, -1.0, 3.0}, sigma{0.05, 0.7, 12.0};
  Mat<double> z = Mat<double>::Random(3, 8);
  const ColVec<double> w = ColVec<double>::Random(3);
  auto loss = [&] { return den.forward(xt, sigma, z).dot(w); };
  Denoiser<double>::Cache cache;
  den.forward(xt, sigma, z, &cache);
  auto grad = den.zeros_like();
  const Mat<double> dz = den.backward(cache, w, grad);
  auto ps = params_of(den);
  auto gs = params_of(grad);
  const double h = 1e-5;
  auto check = [&](double& v, double analytic, const std::string& what) {
    const double v0 = v;
    v = v0 + h;
    const double up = loss();
    v = v0 - h;
    const double down = loss();
    v = v0;
    const double fd = (up - down) / (2 * h);
    EXPECT_LE(std::fabs(analytic - fd) / (std::fabs(fd) + 1e-8), 1e-4) << what << " analytic " << analytic << " fd " << fd;
  };
  for (std::size_t k = 0; k < ps.size(); ++k)
    for (Eigen::Index i = 0; i < ps[k].tensor->size(); ++i)
      check(ps[k].tensor->data()[i], gs[k].tensor->data()[i], ps[k].name + "[" + std::to_string(i) + "]");
  for (Eigen::Index i = 0; i < z.size(); ++i) check(z.data()[i], dz.data()[i], "z[" + std::to_string(i) + "]");
}

TEST(DiffusionLoss, StubPredictors) {
  NoiseSchedule sched;
  Rng rng(12);
  // A stub that recovers eps exactly from x_t and the known x0.
  const double x0 = 0.3;
  for (int i = 0; i < 100; ++i)
    EXPECT_NEAR(diffusion_loss_with([&](double xt, double s) { return (xt - x0) / s; }, x0, sched, rng), 0.0, 1e-18);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double l = diffusion_loss_with([](double, double) { return 0.0; }, x0, sched, rng);
    ASSERT_GE(l, 0.0);
    sum += l;
  }
  EXPECT_NEAR(sum / n, 1.0, 0.02);
}

TEST(DiffusionLoss, ModelLossIsNonNegative) {
  Rng rng(13);
  auto den = Denoiser<float>::make(8, rng);
  const RowVec<float> z = RowVec<float>::Random(8);
  for (int i = 0; i < 50; ++i) EXPECT_GE(diffusion_loss(den, standard_normal(rng), z, NoiseSchedule{}, rng), 0.0);
}

}  // namespace
}  // namespace tabdar
