#pragma once

#include <string>
#include <variant>
#include <vector>

#include "common.hpp"
#include "heads.hpp"
#include "nn.hpp"
#include "schema.hpp"
#include "tokenizer.hpp"
#include "transformer.hpp"

namespace tabdar {

struct ModelConfig {
  Eigen::Index width = 32;
  int depth = 6;
  int heads = 4;
};

// Every learnable tensor: tokenizer, transformer, one head per column
// (classifier for categorical, denoiser for continuous).
template <typename T>
struct Model {
  using Head = std::variant<DiscreteHead<T>, Denoiser<T>>;

  TableSchema schema;
  ModelConfig config;
  TokenEmbedder<T> embedder;
  Transformer<T> transformer;
  std::vector<Head> heads;

  static Model make(const TableSchema& schema, const ModelConfig& config, Rng& rng) {
    schema.validate();
    Model m;
    m.schema = schema;
    m.config = config;
    m.embedder = TokenEmbedder<T>::make(schema, config.width, rng);
    m.transformer = Transformer<T>::make(config.width, config.depth, config.heads, rng);
    for (const auto& c : schema.columns) {
      if (c.is_categorical())
        m.heads.emplace_back(make_discrete_head<T>(config.width, c.cardinality(), rng));
      else
        m.heads.emplace_back(Denoiser<T>::make(config.width, rng));
    }
    return m;
  }

  Model zeros_like() const {
    Model g;
    g.schema = schema;
    g.config = config;
    g.embedder = embedder.zeros_like();
    g.transformer = transformer.zeros_like();
    for (const auto& h : heads) g.heads.push_back(std::visit([](const auto& x) -> Head { return x.zeros_like(); }, h));
    return g;
  }

  std::size_t num_columns() const { return schema.size(); }

  const DiscreteHead<T>& discrete_head(std::size_t i) const { return std::get<DiscreteHead<T>>(heads[i]); }
  const Denoiser<T>& denoiser(std::size_t i) const { return std::get<Denoiser<T>>(heads[i]); }
  DiscreteHead<T>& discrete_head(std::size_t i) { return std::get<DiscreteHead<T>>(heads[i]); }
  Denoiser<T>& denoiser(std::size_t i) { return std::get<Denoiser<T>>(heads[i]); }

  // Stable, named enumeration of all tensors; the order defines optimizer
  // state layout and checkpoint payload order.
  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    embedder.params("embed", out);
    transformer.params("blocks", out);
    for (std::size_t i = 0; i < heads.size(); ++i) {
      const std::string prefix = "head." + std::to_string(i);
      std::visit([&](auto& h) { h.params(prefix, out); }, heads[i]);
    }
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : params()) n += static_cast<std::size_t>(p.tensor->size());
    return n;
  }

  template <typename U>
  Model<U> cast() const {
    Rng rng(0);
    Model<U> out = Model<U>::make(schema, config, rng);
    Model copy = *this;
    auto src = copy.params();
    auto dst = out.params();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
    return out;
  }
};

}  // namespace tabdar
