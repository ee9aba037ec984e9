#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "data_pipeline.hpp"
#include "model.hpp"

namespace tabdar {

// Euler takes one denoiser evaluation per level; Heun adds a trapezoidal
// correction on every step that does not end at sigma = 0.
enum class Solver { Euler, Heun };

struct SamplerConfig {
  Solver solver = Solver::Heun;
  int steps = 50;
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  int impute_k = 10;
};

// sigma_i = (smax^(1/rho) + i/(N-1) (smin^(1/rho) - smax^(1/rho)))^rho for
// i < N, followed by a terminal 0. Returns N+1 levels.
inline std::vector<double> sigma_ladder(const SamplerConfig& cfg) {
  if (cfg.steps < 2) throw SchemaError("sampler needs at least 2 steps");
  const double a = std::pow(cfg.sigma_max, 1.0 / cfg.rho);
  const double b = std::pow(cfg.sigma_min, 1.0 / cfg.rho);
  std::vector<double> out(static_cast<std::size_t>(cfg.steps) + 1, 0.0);
  for (int i = 0; i < cfg.steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(cfg.steps - 1);
    out[static_cast<std::size_t>(i)] = std::pow(a + frac * (b - a), cfg.rho);
  }
  out.front() = cfg.sigma_max;
  out[static_cast<std::size_t>(cfg.steps) - 1] = cfg.sigma_min;
  return out;
}

// Probability-flow integration of the reverse VE process: start from
// N(0, sigma_0^2) and follow dx/dsigma = eps_hat(x, sigma) down the ladder.
template <typename Predict>
double sample_continuous(Predict&& predict, Rng& rng, const SamplerConfig& cfg) {
  const auto ladder = sigma_ladder(cfg);
  double x = ladder.front() * standard_normal(rng);
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    const double h = ladder[i + 1] - ladder[i];
    const double d = static_cast<double>(predict(x, ladder[i]));
    double next = x + h * d;
    if (cfg.solver == Solver::Heun && ladder[i + 1] > 0.0)
      next = x + 0.5 * h * (d + static_cast<double>(predict(next, ladder[i + 1])));
    x = next;
    if (!std::isfinite(x)) throw ComputeError("non-finite state in diffusion sampler");
  }
  return x;
}

// Batched sampler for one denoiser: row r of z conditions sample r, drawn
// with rngs[r].
template <typename T>
std::vector<double> sample_continuous_batch(const Denoiser<T>& den, const Mat<T>& z, std::span<Rng* const> rngs,
                                            const SamplerConfig& cfg) {
  const auto ladder = sigma_ladder(cfg);
  const std::size_t n = rngs.size();
  std::vector<double> x(n), next(n);
  for (std::size_t r = 0; r < n; ++r) x[r] = ladder.front() * standard_normal(*rngs[r]);
  const Mat<T> ez = den.embed_latent(z);
  auto predict = [&](const std::vector<double>& at, double level) {
    Mat<T> cond = ez;
    cond.rowwise() += den.embed_time(level);
    return ColVec<T>(den.predict(at, std::vector<double>(n, level), cond));
  };
  for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
    const double h = ladder[i + 1] - ladder[i];
    const ColVec<T> d = predict(x, ladder[i]);
    for (std::size_t r = 0; r < n; ++r) next[r] = x[r] + h * static_cast<double>(d(static_cast<Eigen::Index>(r)));
    if (cfg.solver == Solver::Heun && ladder[i + 1] > 0.0) {
      const ColVec<T> d2 = predict(next, ladder[i + 1]);
      for (std::size_t r = 0; r < n; ++r) {
        const auto k = static_cast<Eigen::Index>(r);
        next[r] = x[r] + 0.5 * h * (static_cast<double>(d(k)) + static_cast<double>(d2(k)));
      }
    }
    x.swap(next);
    for (double v : x)
      if (!std::isfinite(v)) throw ComputeError("non-finite state in diffusion sampler");
  }
  return x;
}

template <typename T>
double sample_continuous(const Denoiser<T>& den, const RowVec<T>& z, Rng& rng, const SamplerConfig& cfg) {
  Rng* r[1] = {&rng};
  return sample_continuous_batch(den, Mat<T>(z), std::span<Rng* const>(r, 1), cfg).front();
}

// Multinomial draw from softmax(logits).
template <typename Vector>
std::size_t sample_discrete(const Vector& logits, Rng& rng) {
  const auto k = static_cast<std::size_t>(logits.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(logits[c]));
  std::vector<double> p(k);
  double sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) sum += (p[c] = std::exp(static_cast<double>(logits[c]) - mx));
  double u = uniform01(rng) * sum;
  for (std::size_t c = 0; c < k; ++c) {
    if (u < p[c]) return c;
    u -= p[c];
  }
  return k - 1;
}

// One row being completed: `order` lists the target columns in the order
// they are generated; mask[c] stays 1 until column c has a value.
struct GenerationTask {
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> order;
  Rng rng;
};

// Autoregressive completion of all tasks. Each round runs the masked
// encoder over the rows that still have targets, samples the next column of
// every such row from its head, writes the value and unmasks it. Rows are
// batched for speed but each consumes only its own RNG stream.
template <typename T>
void run_generation(const Model<T>& model, std::vector<GenerationTask>& tasks, const SamplerConfig& cfg,
                    const std::function<void(std::size_t, const std::vector<GenerationTask>&)>& on_round = {}) {
  const std::size_t d = model.num_columns();
  const auto di = static_cast<Eigen::Index>(d);
  std::size_t rounds = 0;
  for (const auto& t : tasks) {
    if (t.values.size() != d || t.mask.size() != d) throw SchemaError("generation task width does not match model");
    rounds = std::max(rounds, t.order.size());
  }
  std::vector<std::size_t> active;
  for (std::size_t round = 0; round < rounds; ++round) {
    active.clear();
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].order.size() > round) active.push_back(i);
    const auto na = static_cast<Eigen::Index>(active.size());
    Mat<double> values(na, di);
    MaskMatrix mask(na, di);
    for (Eigen::Index a = 0; a < na; ++a) {
      const auto& t = tasks[active[static_cast<std::size_t>(a)]];
      for (Eigen::Index c = 0; c < di; ++c) {
        values(a, c) = t.values[static_cast<std::size_t>(c)];
        mask(a, c) = t.mask[static_cast<std::size_t>(c)];
      }
    }
    const Mat<T> seq = model.transformer.forward(model.embedder.embed(values, mask), di + 1);

    for (std::size_t col = 0; col < d; ++col) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index a = 0; a < na; ++a)
        if (tasks[active[static_cast<std::size_t>(a)]].order[round] == col) rows.push_back(a);
      if (rows.empty()) continue;
      Mat<T> z(static_cast<Eigen::Index>(rows.size()), seq.cols());
      for (std::size_t r = 0; r < rows.size(); ++r)
        z.row(static_cast<Eigen::Index>(r)) = seq.row(rows[r] * (di + 1) + 1 + static_cast<Eigen::Index>(col));
      std::vector<double> sampled(rows.size());
      if (model.schema[col].is_categorical()) {
        const Mat<T> logits = model.discrete_head(col).forward(z);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          auto& t = tasks[active[static_cast<std::size_t>(rows[r])]];
          sampled[r] = static_cast<double>(sample_discrete(logits.row(static_cast<Eigen::Index>(r)), t.rng));
        }
      } else {
        std::vector<Rng*> rngs;
        for (auto a : rows) rngs.push_back(&tasks[active[static_cast<std::size_t>(a)]].rng);
        sampled = sample_continuous_batch(model.denoiser(col), z, rngs, cfg);
      }
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto& t = tasks[active[static_cast<std::size_t>(rows[r])]];
        t.values[col] = sampled[r];
        t.mask[col] = 0;
      }
    }
    if (on_round) on_round(round, tasks);
  }
}

enum class OrderMode { Random, Fixed };

template <typename T>
std::vector<GenerationTask> unconditional_tasks(const Model<T>& model, std::size_t n, std::uint64_t seed,
                                                OrderMode mode) {
  const std::size_t d = model.num_columns();
  std::vector<GenerationTask> tasks;
  tasks.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    GenerationTask t{std::vector<double>(d, 0.0), std::vector<std::uint8_t>(d, 1), {}, derive_rng(seed, r, 0)};
    t.order.resize(d);
    std::iota(t.order.begin(), t.order.end(), 0);
    if (mode == OrderMode::Random) shuffle(t.order.begin(), t.order.end(), t.rng);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

// n x D encoded synthetic rows.
template <typename T>
Mat<double> generate_unconditional_encoded(const Model<T>& model, std::size_t n, std::uint64_t seed,
                                           OrderMode mode = OrderMode::Random, const SamplerConfig& cfg = {}) {
  auto tasks = unconditional_tasks(model, n, seed, mode);
  run_generation(model, tasks, cfg);
  Mat<double> out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.num_columns()));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < model.num_columns(); ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = tasks[r].values[c];
  return out;
}

template <typename T>
RawTable generate_unconditional(const Model<T>& model, const std::vector<ColumnTransform>& transforms, std::size_t n,
                                std::uint64_t seed, OrderMode mode = OrderMode::Random,
                                const SamplerConfig& cfg = {}) {
  return decode(generate_unconditional_encoded(model, n, seed, mode, cfg), model.schema, transforms);
}

namespace detail {

// Tasks for rows of `raw` whose empty cells are targets; replicate j of row r
// uses stream (seed, r, j). Target order is a uniform shuffle.
template <typename T>
std::vector<GenerationTask> conditional_tasks(const Model<T>& model, const PartialEncoding& enc, std::uint64_t seed,
                                              std::size_t replicates) {
  const std::size_t d = model.num_columns();
  std::vector<GenerationTask> tasks;
  tasks.reserve(static_cast<std::size_t>(enc.values.rows()) * replicates);
  for (Eigen::Index r = 0; r < enc.values.rows(); ++r) {
    for (std::size_t j = 0; j < replicates; ++j) {
      GenerationTask t{std::vector<double>(d), std::vector<std::uint8_t>(d), {},
                       derive_rng(seed, static_cast<std::uint64_t>(r), j)};
      for (std::size_t c = 0; c < d; ++c) {
        t.values[c] = enc.values(r, static_cast<Eigen::Index>(c));
        t.mask[c] = enc.targets(r, static_cast<Eigen::Index>(c));
        if (t.mask[c]) t.order.push_back(c);
      }
      shuffle(t.order.begin(), t.order.end(), t.rng);
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

}  // namespace detail

// Fills the empty cells of every row; non-empty cells are copied verbatim.
template <typename T>
RawTable generate_conditional(const Model<T>& model, const std::vector<ColumnTransform>& transforms,
                              const RawTable& partial, std::uint64_t seed, const SamplerConfig& cfg = {}) {
  const PartialEncoding enc = encode_partial(partial, model.schema, transforms);
  auto tasks = detail::conditional_tasks(model, enc, seed, 1);
  run_generation(model, tasks, cfg);
  RawTable out = partial;
  for (std::size_t r = 0; r < out.rows.size(); ++r)
    for (std::size_t c = 0; c < model.num_columns(); ++c)
      if (enc.targets(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)))
        out.rows[r][c] = decode_cell(tasks[r].values[c], transforms[c]);
  return out;
}

// Expected-a-posteriori imputation from k conditional draws per row: mean of
// the decoded values for continuous cells, majority vote (ties to the lowest
// category index) for categorical cells.
template <typename T>
RawTable impute(const Model<T>& model, const std::vector<ColumnTransform>& transforms, const RawTable& table,
                std::size_t k, std::uint64_t seed, const SamplerConfig& cfg = {}) {
  if (k == 0) throw SchemaError("imputation needs k >= 1");
  const PartialEncoding enc = encode_partial(table, model.schema, transforms);
  auto tasks = detail::conditional_tasks(model, enc, seed, k);
  run_generation(model, tasks, cfg);
  RawTable out = table;
  const std::size_t d = model.num_columns();
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      if (!enc.targets(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) continue;
      if (const auto* q = std::get_if<QuantileTransform>(&transforms[c])) {
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += q->decode(tasks[r * k + j].values[c]);
        out.rows[r][c] = format_real(sum / static_cast<double>(k));
      } else {
        std::vector<std::size_t> votes(model.schema[c].cardinality(), 0);
        for (std::size_t j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(tasks[r * k + j].values[c])];
        const auto& ord = std::get<OrdinalTransform>(transforms[c]);
        // The missing-value sentinel only wins when it is the sole outcome.
        const auto sentinel = ord.find(kMissingCategory);
        if (sentinel && votes[*sentinel] < k) votes[*sentinel] = 0;
        const auto best = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
        out.rows[r][c] = ord.decode(best);
      }
    }
  }
  return out;
}

}  // namespace tabdar
