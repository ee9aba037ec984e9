#include <gtest/gtest.h>

#include <cmath>

#include "tabdar/trainer.hpp"

namespace tabdar {
namespace {

TableSchema mixed_schema() {
  TableSchema s;
  s.columns = {{"a", ColumnType::Continuous, {}}, {"b", ColumnType::Continuous, {}},
               {"c", ColumnType::Categorical, {"x", "y", "z"}}};
  return s;
}

Mat<double> mixed_values(Eigen::Index n, Rng& rng) {
  Mat<double> v(n, 3);
  for (Eigen::Index r = 0; r < n; ++r) {
    v(r, 2) = static_cast<double>(uniform_index(rng, 3));
    v(r, 0) = 0.5 * (v(r, 2) - 1.0) + 0.3 * standard_normal(rng);
    v(r, 1) = 0.7 * standard_normal(rng);
  }
  return v;
}

EncodedTable mixed_table(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  const TableSchema s = mixed_schema();
  std::vector<ColumnTransform> tr{fit_quantile_transform({0.0, 1.0}), fit_quantile_transform({0.0, 1.0}),
                                  OrdinalTransform{s[2].vocabulary}};
  return {s, tr, mixed_values(n, rng)};
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.width = 8;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.batch_size = 32;
  cfg.epochs = 3;
  cfg.seed = 11;
  return cfg;
}

TEST(SampleMask, SingleColumnAlwaysMasked) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_mask(1, rng), std::vector<std::uint8_t>{1});
}

TEST(SampleMask, CountIsBetweenOneAndD) {
  Rng rng(2);
  std::vector<int> hist(8, 0);
  for (int i = 0; i < 20000; ++i) {
    const auto m = sample_mask(7, rng);
    int sum = 0;
    for (auto b : m) sum += b;
    ASSERT_GE(sum, 1);
    ASSERT_LE(sum, 7);
    ++hist[static_cast<std::size_t>(sum)];
  }
  for (int k = 1; k <= 7; ++k) EXPECT_NEAR(hist[static_cast<std::size_t>(k)] / 20000.0, 1.0 / 7, 0.015) << k;
}

TEST(SampleMask, MarginalProbabilityMatchesClosedForm) {
  Rng rng(3);
  const int n = 100000;
  std::vector<int> count(5, 0);
  for (int i = 0; i < n; ++i) {
    const auto m = sample_mask(5, rng);
    for (std::size_t c = 0; c < 5; ++c) count[c] += m[c];
  }
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(count[c] / static_cast<double>(n), 6.0 / 10.0, 0.01);
}

TEST(MaskedLoss, UnmaskedHeadsGetZeroGradient) {
  Rng rng(4);
  const auto s = mixed_schema();
  auto model = Model<double>::make(s, {8, 1, 2}, rng);
  const Mat<double> v = mixed_values(16, rng);
  auto draws = draw_batch(s, 16, NoiseSchedule{}, rng);
  draws.mask.col(0).setZero();
  draws.mask.col(2).setZero();
  draws.mask.col(1).setOnes();
  auto grads = model.zeros_like();
  const double loss = masked_loss(model, v, draws, 1.0 / 16, &grads).total;
  std::vector<nn::ParamRef<double>> g0, g2, g1;
  grads.denoiser(0).params("a", g0);
  grads.discrete_head(2).params("c", g2);
  grads.denoiser(1).params("b", g1);
  for (const auto& p : g0) EXPECT_TRUE(p.tensor->isZero(0.0)) << p.name;
  for (const auto& p : g2) EXPECT_TRUE(p.tensor->isZero(0.0)) << p.name;
  double masked_norm = 0;
  for (const auto& p : g1) masked_norm += p.tensor->squaredNorm();
  EXPECT_GT(masked_norm, 0.0);

  // Perturbing unmasked heads leaves the loss unchanged.
  std::vector<nn::ParamRef<double>> p0, p2;
  model.denoiser(0).params("a", p0);
  model.discrete_head(2).params("c", p2);
  for (auto& p : p0) p.tensor->array() += 0.5;
  for (auto& p : p2) p.tensor->array() -= 0.5;
  EXPECT_EQ(masked_loss<double>(model, v, draws, 1.0 / 16, nullptr).total, loss);
}

TEST(MaskedLoss, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  const auto s = mixed_schema();
  auto m = Model<double>::make(s, {8, 1, 2}, rng);
  for (auto& p : m.params())
    for (Eigen::Index i = 0; i < p.tensor->size(); ++i) p.tensor->data()[i] = 0.4 * standard_normal(rng);
  const Mat<double> v = mixed_values(12, rng);
  const auto draws = draw_batch(s, 12, NoiseSchedule{}, rng);
  auto g = m.zeros_like();
  masked_loss(m, v, draws, 1.0 / 12, &g);
  auto ps = m.params();
  auto gs = g.params();
  const double h = 1e-5;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    for (Eigen::Index i = 0; i < ps[k].tensor->size(); ++i) {
      double& w = ps[k].tensor->data()[i];
      const double w0 = w;
      w = w0 + h;
      const double up = masked_loss<double>(m, v, draws, 1.0 / 12, nullptr).total;
      w = w0 - h;
      const double down = masked_loss<double>(m, v, draws, 1.0 / 12, nullptr).total;
      w = w0;
      const double fd = (up - down) / (2 * h), an = gs[k].tensor->data()[i];
      EXPECT_LE(std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-7}), 1e-4)
          << ps[k].name << "[" << i << "] analytic " << an << " fd " << fd;
    }
  }
}

TEST(MaskedLoss, NonFiniteLossNamesTheColumn) {
  Rng rng(5);
  const auto s = mixed_schema();
  const auto model = Model<double>::make(s, {8, 1, 2}, rng);
  Mat<double> v = mixed_values(4, rng);
  v(2, 1) = std::numeric_limits<double>::quiet_NaN();
  auto draws = draw_batch(s, 4, NoiseSchedule{}, rng);
  draws.mask.setOnes();
  draws.sigma.setConstant(1.0);
  try {
    masked_loss<double>(model, v, draws, 0.25, nullptr);
    FAIL() << "expected ComputeError";
  } catch (const ComputeError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
}

TEST(MaskedLoss, WorkerThreadsAgreeWithSingleThread) {
  Rng rng(6);
  const auto s = mixed_schema();
  const auto model = Model<double>::make(s, {8, 1, 2}, rng);
  const Mat<double> v = mixed_values(40, rng);
  const auto draws = draw_batch(s, 40, NoiseSchedule{}, rng);
  auto g1 = model.zeros_like(), g3 = model.zeros_like();
  const double l1 = batch_loss_and_grad(model, v, draws, g1, 1);
  const double l3 = batch_loss_and_grad(model, v, draws, g3, 3);
  EXPECT_NEAR(l1, l3, 1e-12);
  auto a = g1.params(), b = g3.params();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(a[i].tensor->isApprox(*b[i].tensor, 1e-10)) << a[i].name;
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  const auto data = mixed_table(50, 1);
  auto cfg = small_config();
  cfg.epochs = 0;
  auto result = train(data, cfg);
  auto init = init_model(data.schema, cfg);
  auto a = result.checkpoint.model.params(), b = init.params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].tensor, *b[i].tensor) << a[i].name;
  EXPECT_TRUE(result.history.empty());
  EXPECT_EQ(result.checkpoint.final_epoch, 0);
}

TEST(Train, SameSeedGivesIdenticalLossTrace) {
  const auto data = mixed_table(100, 2);
  const auto cfg = small_config();
  const auto r1 = train(data, cfg), r2 = train(data, cfg);
  ASSERT_EQ(r1.history.size(), 3u);
  for (std::size_t e = 0; e < r1.history.size(); ++e) EXPECT_EQ(r1.history[e].mean_loss, r2.history[e].mean_loss);
  auto third = cfg;
  third.seed = 12;
  EXPECT_NE(train(data, third).history[0].mean_loss, r1.history[0].mean_loss);
}

TEST(Train, ProgressCallbackSeesEveryEpoch) {
  const auto data = mixed_table(40, 3);
  std::vector<int> epochs;
  train(data, small_config(), [&](const EpochRecord& r) {
    epochs.push_back(r.epoch);
    EXPECT_DOUBLE_EQ(r.lr, 1e-3);
    EXPECT_TRUE(std::isfinite(r.mean_loss));
  });
  EXPECT_EQ(epochs, (std::vector<int>{1, 2, 3}));
}

// Epoch means are dominated by mask and noise draws, so progress is measured
// on one fixed set of draws.
TEST(Train, FixedDrawLossDecreases) {
  const auto data = mixed_table(400, 4);
  auto cfg = small_config();
  cfg.epochs = 60;
  cfg.initial_lr = 3e-3;
  Mat<double> eval(4000, 3);
  for (Eigen::Index i = 0; i < 10; ++i) eval.middleRows(400 * i, 400) = data.values;
  Rng rng(99);
  const auto draws = draw_batch(data.schema, eval.rows(), NoiseSchedule{}, rng);
  const auto before = masked_loss<float>(init_model(data.schema, cfg), eval, draws, 1.0 / 4000, nullptr);
  const auto after = masked_loss<float>(train(data, cfg).checkpoint.model, eval, draws, 1.0 / 4000, nullptr);
  EXPECT_LT(after.total, 0.95 * before.total);
  EXPECT_NEAR(before.column_sums[2] / static_cast<double>(before.column_counts[2]), std::log(3.0), 1e-6);
  EXPECT_LT(after.column_sums[2] / static_cast<double>(after.column_counts[2]), 0.9 * std::log(3.0));
}

TEST(Train, EmptyTableRejected) {
  auto data = mixed_table(0, 5);
  EXPECT_THROW(train(data, small_config()), ComputeError);
}

TEST(TrainConfigJson, RoundTripAndOverlay) {
  auto cfg = small_config();
  cfg.weight_decay = 3e-4;
  const auto back = train_config_from_json(to_json(cfg));
  EXPECT_EQ(back.width, 8);
  EXPECT_EQ(back.depth, 1);
  EXPECT_EQ(back.heads, 2);
  EXPECT_EQ(back.batch_size, 32u);
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(back.weight_decay, 3e-4);
  const auto overlay = train_config_from_json({{"training_epochs", 7}}, cfg);
  EXPECT_EQ(overlay.epochs, 7);
  EXPECT_EQ(overlay.width, 8);
}

TEST(TrainConfigJson, Defaults) {
  const TrainConfig d;
  EXPECT_EQ(d.initial_lr, 1e-3);
  EXPECT_EQ(d.epochs, 5000);
  EXPECT_EQ(d.batch_size, 4096u);
  EXPECT_EQ(d.depth, 6);
  EXPECT_EQ(d.width, 32);
  EXPECT_EQ(d.heads, 4);
  EXPECT_EQ(d.plateau_factor, 0.5);
  EXPECT_EQ(d.plateau_patience, 100);
  EXPECT_EQ(d.min_lr, 1e-5);
  EXPECT_EQ(d.grad_clip, 1.0);
}

TEST(TrainConfigJson, RejectsUnknownKeysAndOptimizers) {
  EXPECT_THROW(train_config_from_json({{"learning_rate", 1}}), ParseError);
  EXPECT_THROW(train_config_from_json({{"optimizer", "SGD"}}), ParseError);
  EXPECT_THROW(train_config_from_json(nlohmann::json::array()), ParseError);
}

}  // namespace
}  // namespace tabdar
