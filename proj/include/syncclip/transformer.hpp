#ifndef SYNCCLIP_TRANSFORMER_HPP_
#define SYNCCLIP_TRANSFORMER_HPP_

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "syncclip/common.hpp"

namespace syncclip {

struct EncoderSpec {
  int n_layers = 2;
  int embed_dim = 32;
  int n_heads = 4;
  int max_tokens = 9;  // patch count (visual) or token budget (text)
  int output_dim = 16;
  int mlp_ratio = 4;

  void validate() const;
  bool operator==(const EncoderSpec&) const = default;
  std::string describe() const;
};

/// Frozen parameters of one pre-LN transformer block. Vectors are stored as
/// [1 x D] matrices so every weight can be visited uniformly.
template <typename T>
struct BlockWeights {
  Matrix<T> ln1_g, ln1_b;
  Matrix<T> wq, wk, wv, wo;  // [D x D], applied as X * W
  Matrix<T> bq, bk, bv, bo;
  Matrix<T> ln2_g, ln2_b;
  Matrix<T> w1, b1;  // [D x F]
  Matrix<T> w2, b2;  // [F x D]
};

template <typename T>
struct TransformerWeights {
  EncoderSpec spec;
  Matrix<T> pos;  // [max_tokens x D], added to content tokens only
  std::vector<BlockWeights<T>> blocks;
  Matrix<T> lnf_g, lnf_b;
  Matrix<T> proj;  // [D x output_dim]

  static TransformerWeights random(const EncoderSpec& spec, std::mt19937_64& rng);

  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  template <typename U>
  TransformerWeights<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f(std::string("pos"), self.pos);
    for (std::size_t i = 0; i < self.blocks.size(); ++i) {
      auto& b = self.blocks[i];
      const std::string p = "block" + std::to_string(i) + ".";
      f(p + "ln1_g", b.ln1_g);
      f(p + "ln1_b", b.ln1_b);
      f(p + "wq", b.wq);
      f(p + "wk", b.wk);
      f(p + "wv", b.wv);
      f(p + "wo", b.wo);
      f(p + "bq", b.bq);
      f(p + "bk", b.bk);
      f(p + "bv", b.bv);
      f(p + "bo", b.bo);
      f(p + "ln2_g", b.ln2_g);
      f(p + "ln2_b", b.ln2_b);
      f(p + "w1", b.w1);
      f(p + "b1", b.b1);
      f(p + "w2", b.w2);
      f(p + "b2", b.b2);
    }
    f(std::string("lnf_g"), self.lnf_g);
    f(std::string("lnf_b"), self.lnf_b);
    f(std::string("proj"), self.proj);
  }
};

template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  Vector<T> inv_std;
};

template <typename T>
struct BlockTape {
  LayerNormCache<T> ln1;
  Matrix<T> q, k, v;
  std::vector<Matrix<T>> attn;  // per head, [L x L] row-stochastic
  LayerNormCache<T> ln2;
  Matrix<T> u;  // MLP pre-activation
};

/// Activations kept by a forward pass so the gradient w.r.t. every injected
/// prompt can be recovered without touching the frozen weights.
template <typename T>
struct EncoderTape {
  Eigen::Index prompt_count = 0;
  int prompted_layers = 0;
  Eigen::Index readout_row = 0;
  std::vector<BlockTape<T>> blocks;
  LayerNormCache<T> lnf;
};

/// Frozen multi-head self-attention stack with deep prompt injection.
///
/// The input to block 0 is [prompts[0]; content + pos]. Before every later
/// block l < prompts.size(), the P prompt rows of the running sequence are
/// discarded and replaced by prompts[l]. Blocks past the prompted depth carry
/// the previous prompt outputs through. The readout is one content row after
/// a final LayerNorm, projected into the joint space.
template <typename T>
class Transformer {
 public:
  explicit Transformer(TransformerWeights<T> weights);

  const EncoderSpec& spec() const { return weights_.spec; }
  const TransformerWeights<T>& weights() const { return weights_; }
  TransformerWeights<T>& mutable_weights() { return weights_; }

  RowVector<T> forward(const Matrix<T>& content, std::span<const Matrix<T>> layer_prompts, Eigen::Index readout,
                       EncoderTape<T>* tape = nullptr) const;

  /// Returns d(output)/d(prompts[l]) contracted with grad_out, one matrix per
  /// prompted layer.
  std::vector<Matrix<T>> backward(const EncoderTape<T>& tape, const RowVector<T>& grad_out) const;

 private:
  Matrix<T> block_forward(const BlockWeights<T>& w, const Matrix<T>& x, BlockTape<T>* tape) const;
  Matrix<T> block_backward(const BlockWeights<T>& w, const BlockTape<T>& tape, const Matrix<T>& grad_y) const;

  TransformerWeights<T> weights_;
};

}  // namespace syncclip

#include "syncclip/transformer_impl.hpp"

#endif  // SYNCCLIP_TRANSFORMER_HPP_
