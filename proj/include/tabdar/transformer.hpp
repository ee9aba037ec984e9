#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "common.hpp"
#include "nn.hpp"

namespace tabdar {

// Pre-LN encoder block: x += MHSA(LN(x)); x += FFN(LN(x)), FFN = GELU MLP of width 4d.
template <typename T>
struct TransformerBlock {
  nn::LayerNorm<T> ln1, ln2;
  nn::Linear<T> wq, wk, wv, wo;
  nn::Linear<T> fc1, fc2;

  static TransformerBlock make(Eigen::Index d, Rng& rng) {
    TransformerBlock b;
    b.ln1 = nn::LayerNorm<T>::make(d);
    b.ln2 = nn::LayerNorm<T>::make(d);
    b.wq = nn::Linear<T>(nn::xavier_uniform<T>(d, d, rng), false);
    b.wk = nn::Linear<T>(nn::xavier_uniform<T>(d, d, rng), false);
    b.wv = nn::Linear<T>(nn::xavier_uniform<T>(d, d, rng), false);
    b.wo = nn::Linear<T>(nn::xavier_uniform<T>(d, d, rng), false);
    b.fc1 = nn::Linear<T>(nn::xavier_uniform<T>(d, 4 * d, rng), true);
    b.fc2 = nn::Linear<T>(nn::xavier_uniform<T>(4 * d, d, rng), true);
    return b;
  }

  TransformerBlock zeros_like() const {
    return {ln1.zeros_like(), ln2.zeros_like(), wq.zeros_like(), wk.zeros_like(),
            wv.zeros_like(),  wo.zeros_like(),  fc1.zeros_like(), fc2.zeros_like()};
  }

  void params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    ln1.params(prefix + ".ln1", out);
    wq.params(prefix + ".wq", out);
    wk.params(prefix + ".wk", out);
    wv.params(prefix + ".wv", out);
    wo.params(prefix + ".wo", out);
    ln2.params(prefix + ".ln2", out);
    fc1.params(prefix + ".fc1", out);
    fc2.params(prefix + ".fc2", out);
  }
};

template <typename T>
struct Transformer {
  std::vector<TransformerBlock<T>> blocks;
  int num_heads = 1;
  Eigen::Index width = 0;

  struct BlockTrace {
    typename nn::LayerNorm<T>::Cache ln1;
    Mat<T> a, q, k, v;
    Mat<T> probs;  // (B * heads * S) x S, softmax rows
    Mat<T> attn;   // concatenated head outputs, before wo
    Mat<T> x_mid;
    typename nn::LayerNorm<T>::Cache ln2;
    Mat<T> b, h;
  };

  // Activations retained by forward() for backward().
  struct Trace {
    Eigen::Index seq_len = 0;
    Eigen::Index batch = 0;
    std::vector<BlockTrace> blocks;
  };

  static Transformer make(Eigen::Index d, int depth, int heads, Rng& rng) {
    if (heads <= 0 || d % heads != 0)
      throw SchemaError("embedding width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                        " heads");
    Transformer t;
    t.num_heads = heads;
    t.width = d;
    for (int i = 0; i < depth; ++i) t.blocks.push_back(TransformerBlock<T>::make(d, rng));
    return t;
  }

  Transformer zeros_like() const {
    Transformer g;
    g.num_heads = num_heads;
    g.width = width;
    for (const auto& b : blocks) g.blocks.push_back(b.zeros_like());
    return g;
  }

  Eigen::Index head_width() const { return width / num_heads; }

  // tokens: (B * seq_len) x d. Returns the full output sequence, same shape.
  Mat<T> forward(const Mat<T>& tokens, Eigen::Index seq_len, Trace* trace = nullptr) const {
    if (tokens.cols() != width || seq_len <= 0 || tokens.rows() % seq_len != 0)
      throw SchemaError("transformer input has shape " + std::to_string(tokens.rows()) + "x" +
                        std::to_string(tokens.cols()) + ", expected (B*" + std::to_string(seq_len) + ")x" +
                        std::to_string(width));
    const Eigen::Index batch = tokens.rows() / seq_len;
    if (trace) {
      trace->seq_len = seq_len;
      trace->batch = batch;
      trace->blocks.assign(blocks.size(), BlockTrace{});
    }
    Mat<T> x = tokens;
    BlockTrace scratch;
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const auto& blk = blocks[l];
      BlockTrace& bt = trace ? trace->blocks[l] : scratch;
      bt.a = blk.ln1.forward(x, bt.ln1);
      bt.q = blk.wq.forward(bt.a);
      bt.k = blk.wk.forward(bt.a);
      bt.v = blk.wv.forward(bt.a);
      attention_forward(bt, batch, seq_len);
      bt.x_mid = x + blk.wo.forward(bt.attn);
      bt.b = blk.ln2.forward(bt.x_mid, bt.ln2);
      bt.h = blk.fc1.forward(bt.b);
      x = bt.x_mid + blk.fc2.forward(nn::gelu(bt.h));
    }
    return x;
  }

  // dout: gradient w.r.t. the full output sequence. Accumulates into grad,
  // returns gradient w.r.t. the input tokens.
  Mat<T> backward(const Trace& trace, const Mat<T>& dout, Transformer& grad) const {
    if (trace.blocks.size() != blocks.size() || grad.blocks.size() != blocks.size())
      throw SchemaError("transformer trace/parameter depth mismatch");
    if (dout.rows() != trace.batch * trace.seq_len || dout.cols() != width)
      throw SchemaError("transformer output gradient has the wrong shape");
    Mat<T> dx = dout;
    for (std::size_t l = blocks.size(); l-- > 0;) {
      const auto& blk = blocks[l];
      auto& g = grad.blocks[l];
      const BlockTrace& bt = trace.blocks[l];
      // feed-forward branch
      const Mat<T> act = nn::gelu(bt.h);
      Mat<T> dact = blk.fc2.backward(act, dx, g.fc2);
      Mat<T> dh = nn::gelu_backward(bt.h, dact);
      Mat<T> db = blk.fc1.backward(bt.b, dh, g.fc1);
      dx += blk.ln2.backward(bt.ln2, db, g.ln2);
      // attention branch
      Mat<T> dattn = blk.wo.backward(bt.attn, dx, g.wo);
      Mat<T> dq, dk, dv;
      attention_backward(bt, dattn, trace.batch, trace.seq_len, dq, dk, dv);
      Mat<T> da = blk.wq.backward(bt.a, dq, g.wq);
      da += blk.wk.backward(bt.a, dk, g.wk);
      da += blk.wv.backward(bt.a, dv, g.wv);
      dx += blk.ln1.backward(bt.ln1, da, g.ln1);
    }
    return dx;
  }

  void params(const std::string& prefix, std::vector<nn::ParamRef<T>>& out) {
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].params(prefix + "." + std::to_string(i), out);
  }

 private:
  void attention_forward(BlockTrace& bt, Eigen::Index batch, Eigen::Index seq) const {
    const Eigen::Index dh = head_width();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    bt.probs.resize(batch * num_heads * seq, seq);
    bt.attn.resize(bt.q.rows(), width);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index h = 0; h < num_heads; ++h) {
        const auto qb = bt.q.block(b * seq, h * dh, seq, dh);
        const auto kb = bt.k.block(b * seq, h * dh, seq, dh);
        const auto vb = bt.v.block(b * seq, h * dh, seq, dh);
        auto p = bt.probs.block((b * num_heads + h) * seq, 0, seq, seq);
        // Coefficient-wise products give every query row identical arithmetic.
        p.noalias() = qb.lazyProduct(kb.transpose()) * scale;
        for (Eigen::Index r = 0; r < seq; ++r) {
          const T mx = p.row(r).maxCoeff();
          p.row(r) = (p.row(r).array() - mx).exp();
          p.row(r) /= p.row(r).sum();
        }
        bt.attn.block(b * seq, h * dh, seq, dh).noalias() = p.lazyProduct(vb);
      }
    }
  }

  void attention_backward(const BlockTrace& bt, const Mat<T>& dattn, Eigen::Index batch, Eigen::Index seq,
                          Mat<T>& dq, Mat<T>& dk, Mat<T>& dv) const {
    const Eigen::Index dh = head_width();
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    dq.resize(bt.q.rows(), width);
    dk.resize(bt.k.rows(), width);
    dv.resize(bt.v.rows(), width);
    Mat<T> dp(seq, seq), ds(seq, seq);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index h = 0; h < num_heads; ++h) {
        const auto qb = bt.q.block(b * seq, h * dh, seq, dh);
        const auto kb = bt.k.block(b * seq, h * dh, seq, dh);
        const auto vb = bt.v.block(b * seq, h * dh, seq, dh);
        const auto p = bt.probs.block((b * num_heads + h) * seq, 0, seq, seq);
        const auto dob = dattn.block(b * seq, h * dh, seq, dh);
        dp.noalias() = dob * vb.transpose();
        dv.block(b * seq, h * dh, seq, dh).noalias() = p.transpose() * dob;
        const ColVec<T> rowdot = (dp.array() * p.array()).rowwise().sum();
        ds = (p.array() * (dp.array().colwise() - rowdot.array())).matrix() * scale;
        dq.block(b * seq, h * dh, seq, dh).noalias() = ds * kb;
        dk.block(b * seq, h * dh, seq, dh).noalias() = ds.transpose() * qb;
      }
    }
  }
};

// Rows 1..D of each (D+1)-row sequence: the per-column latents z^i.
template <typename T>
Mat<T> column_latents(const Mat<T>& sequence_out, Eigen::Index num_columns) {
  const Eigen::Index seq = num_columns + 1;
  const Eigen::Index batch = sequence_out.rows() / seq;
  Mat<T> z(batch * num_columns, sequence_out.cols());
  for (Eigen::Index b = 0; b < batch; ++b) z.middleRows(b * num_columns, num_columns) = sequence_out.middleRows(b * seq + 1, num_columns);
  return z;
}

// Inverse of column_latents for gradients: pad rows receive zero.
template <typename T>
Mat<T> scatter_latent_grad(const Mat<T>& dz, Eigen::Index num_columns) {
  const Eigen::Index seq = num_columns + 1;
  const Eigen::Index batch = dz.rows() / num_columns;
  Mat<T> out = Mat<T>::Zero(batch * seq, dz.cols());
  for (Eigen::Index b = 0; b < batch; ++b) out.middleRows(b * seq + 1, num_columns) = dz.middleRows(b * num_columns, num_columns);
  return out;
}

}  // namespace tabdar
