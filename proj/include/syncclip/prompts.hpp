#ifndef SYNCCLIP_PROMPTS_HPP_
#define SYNCCLIP_PROMPTS_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "syncclip/common.hpp"

namespace syncclip {

/// Training/inference variants. All of them run through the same prompted
/// encoders; they differ only in how per-layer prompts are produced.
enum class Method { kSyncClip, kIvlp, kCoCoOp, kMaPLe };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct PromptConfig {
  int m1 = 2;  // real-domain visual prompts per layer
  int m2 = 2;  // synthetic-domain visual prompts per layer
  int n = 2;   // shared visual prompts per layer
  int k = 2;   // textual prompts per layer
  int depth = 2;
  int embed_dim_v = 32;
  int embed_dim_t = 32;
  double init_scale = 0.02;

  void validate() const;
  /// Depth must fit inside both encoder stacks.
  void validate_against(int visual_layers, int text_layers) const;
  bool operator==(const PromptConfig&) const = default;
};

/// Default prompted depth for an encoder of the given height: 9 of 12 for
/// ViT-B/16-sized stacks, three quarters (rounded) otherwise.
int default_prompt_depth(int n_layers);

/// Learnable prompt tokens, one matrix per prompted layer and group.
template <typename T>
struct PromptBank {
  PromptConfig config;
  std::vector<Matrix<T>> real_v;    // depth x [m1 x embed_dim_v]
  std::vector<Matrix<T>> synth_v;   // depth x [m2 x embed_dim_v]
  std::vector<Matrix<T>> shared_v;  // depth x [n x embed_dim_v]
  std::vector<Matrix<T>> textual;   // depth x [k x embed_dim_t]

  static PromptBank zeros(const PromptConfig& config);

  int depth() const { return static_cast<int>(shared_v.size()); }
  bool all_finite() const;

  template <typename F>
  void for_each(F&& f) {
    visit_groups(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit_groups(*this, f);
  }

  template <typename U>
  PromptBank<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit_groups(Self& self, F& f) {
    auto group = [&](std::string_view name, auto& layers) {
      for (std::size_t l = 0; l < layers.size(); ++l) f(std::string(name) + "." + std::to_string(l), layers[l]);
    };
    group("real_v", self.real_v);
    group("synth_v", self.synth_v);
    group("shared_v", self.shared_v);
    group("textual", self.textual);
  }
};

PromptBank<double> init_prompt_bank(const PromptConfig& config, std::uint64_t seed);

/// Light-weight conditioning network: Linear -> ReLU -> Linear, mapping an
/// image feature to a shift applied to every input-layer textual prompt.
template <typename T>
struct MetaNet {
  Matrix<T> w1;  // [in x hidden]
  Matrix<T> b1;  // [1 x hidden]
  Matrix<T> w2;  // [hidden x out]
  Matrix<T> b2;  // [1 x out]

  static MetaNet random(int in_dim, int hidden, int out_dim, double scale, std::mt19937_64& rng);
  static MetaNet zeros(int in_dim, int hidden, int out_dim);

  int in_dim() const { return static_cast<int>(w1.rows()); }
  int out_dim() const { return static_cast<int>(w2.cols()); }

  RowVector<T> forward(const RowVector<T>& feature) const;
  /// Accumulates parameter gradients for d(loss)/d(output) into `grad`.
  void backward(const RowVector<T>& feature, const RowVector<T>& grad_out, MetaNet& grad) const;
};

/// Everything the optimizer touches: the prompt bank plus the optional
/// CoCoOp meta-network or MaPLe text-to-vision projector.
template <typename T>
struct Learnables {
  PromptBank<T> bank;
  std::optional<MetaNet<T>> metanet;
  std::optional<Matrix<T>> projector;  // [embed_dim_t x embed_dim_v]

  Learnables zeros_like() const;

  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  bool all_finite() const;

  template <typename U>
  Learnables<U> cast() const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    self.bank.for_each(f);
    if (self.metanet) {
      f(std::string("metanet.w1"), self.metanet->w1);
      f(std::string("metanet.b1"), self.metanet->b1);
      f(std::string("metanet.w2"), self.metanet->w2);
      f(std::string("metanet.b2"), self.metanet->b2);
    }
    if (self.projector) f(std::string("projector"), *self.projector);
  }
};

enum class Segment : std::uint8_t { kPromptReal, kPromptSynth, kPromptShared, kContent };

template <typename T>
struct TokenSequence {
  Matrix<T> tokens;
  std::vector<Segment> segments;

  Eigen::Index size() const { return tokens.rows(); }
  Eigen::Index prompt_count() const;
  /// Rows tagged kContent, in order.
  Matrix<T> content() const;
  void check_invariants() const;
};

/// [domain prompts, shared prompts, content] for one layer.
template <typename T>
TokenSequence<T> assemble_visual_input(const Matrix<T>& patches, const PromptBank<T>& bank, int layer,
                                       Domain domain);

/// [shared prompts, content]: one undivided visual prompt group.
template <typename T>
TokenSequence<T> assemble_ivlp_visual_input(const Matrix<T>& patches, const PromptBank<T>& bank, int layer);

/// [textual prompts, class tokens].
template <typename T>
TokenSequence<T> assemble_text_input(const Matrix<T>& class_tokens, const PromptBank<T>& bank, int layer);

/// Deep prompting: keeps the content rows of the previous layer's output and
/// swaps every prompt row for the supplied fresh prompts.
template <typename T>
TokenSequence<T> reinject_prompts(const TokenSequence<T>& previous_output, const Matrix<T>& fresh_prompts,
                                  const std::vector<Segment>& prompt_segments);

/// Image-conditioned textual prompts: every row shifted by metanet(feature).
template <typename T>
Matrix<T> cocoop_condition(const RowVector<T>& image_feature, const Matrix<T>& base_prompts,
                           const MetaNet<T>& metanet);

/// Row-wise linear map of textual prompts into visual prompt space.
template <typename T>
Matrix<T> maple_project(const Matrix<T>& textual_prompts, const Matrix<T>& projector);

}  // namespace syncclip

#include "syncclip/prompts_impl.hpp"

#endif  // SYNCCLIP_PROMPTS_HPP_
