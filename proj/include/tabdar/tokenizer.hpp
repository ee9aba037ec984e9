#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "common.hpp"
#include "nn.hpp"
#include "schema.hpp"

namespace tabdar {

// m[i] = 1 marks column i as masked (target), 0 as observed.
using MaskMatrix = Mat<std::uint8_t>;

template <typename T>
struct TokenEmbedder {
  static constexpr double kInitStd = 0.02;

  std::vector<std::size_t> cardinality;  // 0 for continuous columns
  std::vector<Mat<T>> weights;           // 1 x d or |C_i| x d
  Mat<T> positional;                     // D x d
  Mat<T> pad;                            // 1 x d

  static TokenEmbedder make(const TableSchema& schema, Eigen::Index d, Rng& rng) {
    TokenEmbedder e;
    for (const auto& c : schema.columns) {
      const std::size_t k = c.is_categorical() ? c.cardinality() : 0;
      e.cardinality.push_back(k);
      e.weights.push_back(nn::normal_init<T>(k == 0 ? 1 : static_cast<Eigen::Index>(k), d, kInitStd, rng));
    }
    e.positional = nn::normal_init<T>(static_cast<Eigen::Index>(schema.size()), d, kInitStd, rng);
    e.pad = nn::normal_init<T>(1, d, kInitStd, rng);
    return e;
  }

  TokenEmbedder zeros_like() const {
    TokenEmbedder g;
    g.cardinality = cardinality;
    for (const auto& w : weights) g.weights.push_back(Mat<T>::Zero(w.rows(), w.cols()));
    g.positional = Mat<T>::Zero(positional.rows(), positional.cols());
    g.pad = Mat<T>::Zero(1, pad.cols());
    return g;
  }

  std::size_t num_columns() const { return cardinality.size(); }
  Eigen::Index width() const { return pad.cols(); }
  bool is_categorical(std::size_t i) const { return cardinality[i] != 0; }

  // Value-embedding of column i, without the positional vector.
  RowVec<T> embed_value(std::size_t i, double value) const {
    if (is_categorical(i)) return weights[i].row(static_cast<Eigen::Index>(value));
    return weights[i].row(0) * static_cast<T>(value);
  }

  // D x d: value embedding plus positional vector per column.
  Mat<T> tokenize(std::span<const double> row) const {
    Mat<T> h(static_cast<Eigen::Index>(num_columns()), width());
    for (std::size_t i = 0; i < num_columns(); ++i)
      h.row(static_cast<Eigen::Index>(i)) = embed_value(i, row[i]) + positional.row(static_cast<Eigen::Index>(i));
    return h;
  }

  static Mat<T> apply_mask(const Mat<T>& h, std::span<const std::uint8_t> mask) {
    Mat<T> out = h;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if (mask[static_cast<std::size_t>(i)]) out.row(i).setZero();
    return out;
  }

  Mat<T> prepend_pad(const Mat<T>& h) const {
    Mat<T> out(h.rows() + 1, h.cols());
    out.row(0) = pad.row(0);
    out.bottomRows(h.rows()) = h;
    return out;
  }

  // Batched tokenize -> apply_mask -> prepend_pad. Output is (B*(D+1)) x d,
  // one sequence of D+1 rows per input row.
  Mat<T> embed(const Mat<double>& values, const MaskMatrix& mask) const {
    const auto d_cols = static_cast<Eigen::Index>(num_columns());
    const Eigen::Index seq = d_cols + 1;
    Mat<T> out = Mat<T>::Zero(values.rows() * seq, width());
    for (Eigen::Index b = 0; b < values.rows(); ++b) {
      out.row(b * seq) = pad.row(0);
      for (Eigen::Index i = 0; i < d_cols; ++i) {
        if (mask(b, i)) continue;
        out.row(b * seq + 1 + i) = embed_value(static_cast<std::size_t>(i), values(b, i)) + positional.row(i);
      }
    }
    return out;
  }

  void embed_backward(const Mat<double>& values, const MaskMatrix& mask, const Mat<T>& dtokens,
                      TokenEmbedder& grad) const {
    const auto d_cols = static_cast<Eigen::Index>(num_columns());
    const Eigen::Index seq = d_cols + 1;
    for (Eigen::Index b = 0; b < values.rows(); ++b) {
      grad.pad.row(0) += dtokens.row(b * seq);
      for (Eigen::Index i = 0; i < d_cols; ++i) {
        if (mask(b, i)) continue;
        const auto g = dtokens.row(b * seq + 1 + i);
        grad.positional.row(i) += g;
        if (is_categorical(static_cast<std::size_t>(i))) {
          grad.weights[static_cast<std::size_t>(i)].row(static_cast<Eigen::Index>(values(b, i))) += g;
        } else {
          grad.weights[static_cast<std::size_t>(i)].row(0) += g * static_cast<T>(values(b, i));
        }
      }
    }
  }

  void params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      out.push_back({prefix + ".w" + std::to_string(i), &weights[i], true});
    out.push_back({prefix + ".pos", &positional, true});
    out.push_back({prefix + ".pad", &pad, false});
  }
};

}  // namespace tabdar
