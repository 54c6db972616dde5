#ifndef SYNCCLIP_ENCODERS_HPP_
#define SYNCCLIP_ENCODERS_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "syncclip/archive.hpp"
#include "syncclip/tokenizer.hpp"
#include "syncclip/transformer.hpp"

namespace syncclip {

/// A joint-space feature with its cached L2 norm.
template <typename T>
struct Embedding {
  RowVector<T> vector;
  T norm = T(0);

  static Embedding of(RowVector<T> v) {
    if (!v.allFinite()) throw Error(ErrorKind::kNumeric, "embedding has non-finite entries");
    Embedding e;
    e.norm = v.norm();
    e.vector = std::move(v);
    return e;
  }
  Eigen::Index dim() const { return vector.size(); }
  RowVector<T> normalized() const;
};

struct ToyEncoderOptions {
  EncoderSpec visual{2, 32, 4, 9, 16, 4};
  EncoderSpec text{2, 32, 4, 16, 16, 4};
  bool strict_tokenizer = false;
};

/// Frozen visual and text stacks sharing one joint space.
///
/// Weights are never modified by training. A pretrained backbone is bound by
/// converting its tensors into the archive layout produced by to_archive()
/// (any EncoderSpec is accepted, e.g. 12 layers / 768 wide / 12 heads).
template <typename T>
class DualEncoder {
 public:
  DualEncoder(TransformerWeights<T> visual, TransformerWeights<T> text, Matrix<T> token_embedding,
              Tokenizer tokenizer);

  static DualEncoder toy(std::uint64_t seed, const ToyEncoderOptions& options = {});

  const EncoderSpec& visual_spec() const { return visual_.spec(); }
  const EncoderSpec& text_spec() const { return text_.spec(); }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const Transformer<T>& visual() const { return visual_; }
  const Transformer<T>& text() const { return text_; }
  const Matrix<T>& token_embedding() const { return token_embedding_; }
  int output_dim() const { return visual_spec().output_dim; }

  /// Class readout is the first content (patch) token.
  RowVector<T> encode_patches(const Matrix<T>& patches, std::span<const Matrix<T>> layer_prompts,
                              EncoderTape<T>* tape = nullptr) const;

  std::vector<int> tokenize_class(const std::string& class_name, const std::string& prompt_template) const;
  Matrix<T> embed_tokens(const std::vector<int>& ids) const;
  /// Readout is the final (end-of-text) token.
  RowVector<T> encode_token_ids(const std::vector<int>& ids, std::span<const Matrix<T>> layer_prompts,
                                EncoderTape<T>* tape = nullptr) const;

  /// CRC32 over the exact bytes of every frozen weight.
  std::uint32_t backbone_checksum() const;

  Archive to_archive() const;
  static DualEncoder from_archive(const Archive& archive);

  template <typename U>
  DualEncoder<U> cast() const;

  // Test hook: lets freeze checks perturb a frozen weight on purpose.
  TransformerWeights<T>& mutable_visual_weights() { return visual_.mutable_weights(); }

 private:
  Transformer<T> visual_;
  Transformer<T> text_;
  Matrix<T> token_embedding_;  // [vocab x embed_dim_t]
  Tokenizer tokenizer_;
};

/// True iff the backbone is bit-identical to the one that produced
/// `checksum_before`.
template <typename T>
bool freeze_check(const DualEncoder<T>& model, std::uint32_t checksum_before) {
  return model.backbone_checksum() == checksum_before;
}

std::string describe_spec_metadata(const EncoderSpec& visual, const EncoderSpec& text);

}  // namespace syncclip

#include "syncclip/encoders_impl.hpp"

#endif  // SYNCCLIP_ENCODERS_HPP_
