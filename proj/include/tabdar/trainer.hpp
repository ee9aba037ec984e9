#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "data_pipeline.hpp"
#include "model.hpp"
#include "optimizer.hpp"

namespace tabdar {

// Defaults follow the published hyperparameter table; the plateau, clipping
// and noise-level settings are this library's choices.
struct TrainConfig {
  double initial_lr = 1e-3;
  double weight_decay = 1e-6;
  int epochs = 5000;
  std::size_t batch_size = 4096;
  int depth = 6;
  Eigen::Index width = 32;
  int heads = 4;
  std::uint64_t seed = 0;
  double plateau_factor = 0.5;
  int plateau_patience = 100;
  double min_lr = 1e-5;
  double grad_clip = 1.0;
  int threads = 1;

  ModelConfig model() const { return {width, depth, heads}; }
};

// Key names mirror the published hyperparameter table.
inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"optimizer", "Adam"},
          {"initial_learning_rate", c.initial_lr},
          {"weight_decay", c.weight_decay},
          {"lr_scheduler", "ReduceLROnPlateau"},
          {"training_epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"transformer_blocks", c.depth},
          {"embedding_dim", c.width},
          {"heads", c.heads},
          {"seed", c.seed},
          {"plateau_factor", c.plateau_factor},
          {"plateau_patience", c.plateau_patience},
          {"min_lr", c.min_lr},
          {"grad_clip", c.grad_clip}};
}

// Missing keys keep the values already in `base`.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {}) {
  if (!j.is_object()) throw ParseError("config JSON must be an object");
  static const char* known[] = {"optimizer",    "initial_learning_rate", "weight_decay", "lr_scheduler",
                                "training_epochs", "batch_size",        "transformer_blocks", "embedding_dim",
                                "heads",        "seed",                  "plateau_factor", "plateau_patience",
                                "min_lr",       "grad_clip",             "threads"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      throw ParseError("unknown config key '" + key + "'");
  }
  if (j.contains("optimizer") && j["optimizer"] != "Adam") throw ParseError("only the Adam optimizer is supported");
  if (j.contains("lr_scheduler") && j["lr_scheduler"] != "ReduceLROnPlateau")
    throw ParseError("only the ReduceLROnPlateau scheduler is supported");
  base.initial_lr = j.value("initial_learning_rate", base.initial_lr);
  base.weight_decay = j.value("weight_decay", base.weight_decay);
  base.epochs = j.value("training_epochs", base.epochs);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.depth = j.value("transformer_blocks", base.depth);
  base.width = j.value("embedding_dim", base.width);
  base.heads = j.value("heads", base.heads);
  base.seed = j.value("seed", base.seed);
  base.plateau_factor = j.value("plateau_factor", base.plateau_factor);
  base.plateau_patience = j.value("plateau_patience", base.plateau_patience);
  base.min_lr = j.value("min_lr", base.min_lr);
  base.grad_clip = j.value("grad_clip", base.grad_clip);
  base.threads = j.value("threads", base.threads);
  return base;
}

// M ~ U{1..D}, then a uniformly random size-M subset.
inline std::vector<std::uint8_t> sample_mask(std::size_t num_columns, Rng& rng) {
  std::vector<std::uint8_t> mask(num_columns, 0);
  const std::size_t m = 1 + uniform_index(rng, num_columns);
  std::vector<std::size_t> idx(num_columns);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {  // partial Fisher-Yates
    const std::size_t j = i + uniform_index(rng, num_columns - i);
    std::swap(idx[i], idx[j]);
    mask[idx[i]] = 1;
  }
  return mask;
}

// Randomness of one training batch, drawn up front so that the loss is a
// deterministic function of the parameters.
struct BatchDraws {
  MaskMatrix mask;       // B x D
  Mat<double> sigma;     // B x D, used at masked continuous cells
  Mat<double> noise;     // B x D, standard normal
};

inline BatchDraws draw_batch(const TableSchema& schema, Eigen::Index batch, const NoiseSchedule& schedule, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(schema.size());
  BatchDraws out{MaskMatrix::Zero(batch, d), Mat<double>::Zero(batch, d), Mat<double>::Zero(batch, d)};
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto m = sample_mask(schema.size(), rng);
    for (Eigen::Index i = 0; i < d; ++i) {
      out.mask(b, i) = m[static_cast<std::size_t>(i)];
      if (m[static_cast<std::size_t>(i)] && schema[static_cast<std::size_t>(i)].is_continuous()) {
        out.sigma(b, i) = schedule.sample_sigma(rng);
        out.noise(b, i) = standard_normal(rng);
      }
    }
  }
  return out;
}

struct LossBreakdown {
  double total = 0.0;                 // sum over rows and masked columns, times `scale`
  std::vector<double> column_sums;    // unscaled per-column sums
  std::vector<std::size_t> column_counts;
};

// Sum over rows of the masked-column losses, times `scale`. When grads is
// non-null, accumulates d(total)/d(params) into it. Unmasked columns never
// reach a head, so their head parameters get exactly zero gradient.
template <typename T>
LossBreakdown masked_loss(const Model<T>& model, const Mat<double>& values, const BatchDraws& draws, double scale,
                          Model<T>* grads) {
  const auto d = static_cast<Eigen::Index>(model.num_columns());
  const Eigen::Index batch = values.rows();
  const Eigen::Index width = model.config.width;
  LossBreakdown out;
  out.column_sums.assign(model.num_columns(), 0.0);
  out.column_counts.assign(model.num_columns(), 0);

  const Mat<T> tokens = model.embedder.embed(values, draws.mask);
  typename Transformer<T>::Trace trace;
  const Mat<T> seq = model.transformer.forward(tokens, d + 1, grads ? &trace : nullptr);
  Mat<T> dseq;
  if (grads) dseq = Mat<T>::Zero(seq.rows(), width);

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < d; ++i) {
    rows.clear();
    for (Eigen::Index b = 0; b < batch; ++b)
      if (draws.mask(b, i)) rows.push_back(b);
    if (rows.empty()) continue;
    const auto n = static_cast<Eigen::Index>(rows.size());
    Mat<T> z(n, width);
    for (Eigen::Index r = 0; r < n; ++r) z.row(r) = seq.row(rows[static_cast<std::size_t>(r)] * (d + 1) + 1 + i);

    Mat<T> dz;
    double col_sum = 0.0;
    const auto col = static_cast<std::size_t>(i);
    if (model.schema[col].is_categorical()) {
      const auto& head = model.discrete_head(col);
      typename nn::Mlp<T>::Cache cache;
      const Mat<T> logits = head.forward(z, grads ? &cache : nullptr);
      std::vector<std::size_t> labels(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) labels[r] = static_cast<std::size_t>(values(rows[r], i));
      Mat<T> dlogits;
      const ColVec<double> losses = cross_entropy(logits, labels, grads ? &dlogits : nullptr, scale);
      col_sum = losses.sum();
      if (std::isfinite(col_sum) && grads) dz = head.backward(cache, dlogits, std::get<DiscreteHead<T>>(grads->heads[col]));
    } else {
      const auto& den = model.denoiser(col);
      std::vector<double> xt(rows.size()), sig(rows.size()), eps(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        sig[r] = draws.sigma(rows[r], i);
        eps[r] = draws.noise(rows[r], i);
        xt[r] = perturb(values(rows[r], i), sig[r], eps[r]);
      }
      typename Denoiser<T>::Cache cache;
      const ColVec<T> pred = den.forward(xt, sig, z, grads ? &cache : nullptr);
      ColVec<T> deps(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const double err = static_cast<double>(pred(r)) - eps[static_cast<std::size_t>(r)];
        col_sum += err * err;
        deps(r) = static_cast<T>(2.0 * err * scale);
      }
      if (std::isfinite(col_sum) && grads) dz = den.backward(cache, deps, std::get<Denoiser<T>>(grads->heads[col]));
    }
    if (!std::isfinite(col_sum)) throw ComputeError("non-finite loss at column '" + model.schema[col].name + "'");
    out.column_sums[col] = col_sum;
    out.column_counts[col] = rows.size();
    out.total += col_sum * scale;
    if (grads)
      for (Eigen::Index r = 0; r < n; ++r) dseq.row(rows[static_cast<std::size_t>(r)] * (d + 1) + 1 + i) += dz.row(r);
  }

  if (grads) {
    const Mat<T> dtokens = model.transformer.backward(trace, dseq, grads->transformer);
    model.embedder.embed_backward(values, draws.mask, dtokens, grads->embedder);
  }
  return out;
}

// Batch loss (mean over rows of the masked-column sum) and its gradient,
// optionally split across worker threads. Worker gradients are reduced in a
// fixed order by the calling thread.
template <typename T>
double batch_loss_and_grad(const Model<T>& model, const Mat<double>& values, const BatchDraws& draws, Model<T>& grads,
                           int threads) {
  const Eigen::Index batch = values.rows();
  const double scale = 1.0 / static_cast<double>(batch);
  const auto workers = static_cast<Eigen::Index>(std::clamp<Eigen::Index>(threads, 1, batch));
  if (workers == 1) return masked_loss(model, values, draws, scale, &grads).total;

  std::vector<Model<T>> worker_grads(static_cast<std::size_t>(workers), grads);
  std::vector<double> losses(static_cast<std::size_t>(workers), 0.0);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  {
    std::vector<std::jthread> pool;
    for (Eigen::Index w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        const Eigen::Index lo = batch * w / workers, hi = batch * (w + 1) / workers;
        BatchDraws part{draws.mask.middleRows(lo, hi - lo), draws.sigma.middleRows(lo, hi - lo),
                        draws.noise.middleRows(lo, hi - lo)};
        auto& g = worker_grads[static_cast<std::size_t>(w)];
        for (auto& p : g.params()) p.tensor->setZero();
        try {
          losses[static_cast<std::size_t>(w)] =
              masked_loss(model, Mat<double>(values.middleRows(lo, hi - lo)), part, scale, &g).total;
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  auto dst = grads.params();
  double total = 0.0;
  for (std::size_t w = 0; w < worker_grads.size(); ++w) {
    auto src = worker_grads[w].params();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i].tensor += *src[i].tensor;
    total += losses[w];
  }
  return total;
}

// Model plus the optimizer, scheduler and RNG that advance it.
template <typename T>
struct TrainerState {
  Model<T> model;
  Model<T> grads;
  OptimizerState<T> opt;
  AdamConfig adam;
  NoiseSchedule schedule;
  double grad_clip = 1.0;
  int threads = 1;
  Rng rng;

  TrainerState(Model<T> m, const TrainConfig& cfg)
      : model(std::move(m)), grads(model.zeros_like()), rng(derive_rng(cfg.seed, 0, 1)) {
    opt = OptimizerState<T>::for_params(model.params());
    adam.weight_decay = cfg.weight_decay;
    grad_clip = cfg.grad_clip;
    threads = cfg.threads;
  }
};

// One optimization step on a batch of encoded rows. Returns the batch loss.
template <typename T>
double train_step(TrainerState<T>& st, const Mat<double>& batch, double lr) {
  if (batch.rows() == 0) throw ComputeError("empty training batch");
  const BatchDraws draws = draw_batch(st.model.schema, batch.rows(), st.schedule, st.rng);
  auto grads = st.grads.params();
  for (auto& g : grads) g.tensor->setZero();
  const double loss = batch_loss_and_grad(st.model, batch, draws, st.grads, st.threads);
  if (!std::isfinite(loss)) throw ComputeError("non-finite batch loss");
  clip_grad_norm(grads, st.grad_clip);
  adam_step(st.model.params(), grads, st.opt, lr, st.adam);
  return loss;
}

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

// Everything needed to sample: schema, fitted transforms, config and weights.
struct Checkpoint {
  TableSchema schema;
  std::vector<ColumnTransform> transforms;
  TrainConfig config;
  Model<float> model;
  int final_epoch = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

inline Model<float> init_model(const TableSchema& schema, const TrainConfig& config) {
  Rng rng = derive_rng(config.seed, 0, 0);
  return Model<float>::make(schema, config.model(), rng);
}

// Epoch loop: shuffle, ceil(N / batch) steps, plateau schedule on the
// row-weighted epoch-mean loss.
inline TrainResult train(const EncodedTable& data, const TrainConfig& config,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  const std::size_t n = data.num_rows();
  if (n == 0) throw ComputeError("cannot train on an empty table");
  TrainerState<float> st(init_model(data.schema, config), config);
  PlateauScheduler scheduler(config.initial_lr, config.plateau_factor, config.plateau_patience, config.min_lr);
  const std::size_t batch = std::clamp<std::size_t>(config.batch_size, 1, n);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  TrainResult result{{data.schema, data.transforms, config, {}, 0}, {}};
  Mat<double> rows;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), st.rng);
    const double lr = scheduler.lr();
    double weighted = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      rows.resize(static_cast<Eigen::Index>(len), data.values.cols());
      for (std::size_t r = 0; r < len; ++r) rows.row(static_cast<Eigen::Index>(r)) = data.values.row(order[start + r]);
      weighted += train_step(st, rows, lr) * static_cast<double>(len);
    }
    const EpochRecord rec{epoch, weighted / static_cast<double>(n), lr};
    scheduler.step(rec.mean_loss);
    result.history.push_back(rec);
    result.checkpoint.final_epoch = epoch;
    if (on_epoch) on_epoch(rec);
  }
  result.checkpoint.model = std::move(st.model);
  return result;
}

}  // namespace tabdar
