// Template definitions for encoders.hpp.
#ifndef SYNCCLIP_ENCODERS_IMPL_HPP_
#define SYNCCLIP_ENCODERS_IMPL_HPP_

#include "syncclip/text_config.hpp"

namespace syncclip {

EncoderSpec encoder_spec_from(const TextConfig& cfg, const std::string& prefix);
void encoder_spec_into(TextConfig& cfg, const std::string& prefix, const EncoderSpec& spec);

template <typename T>
RowVector<T> Embedding<T>::normalized() const {
  if (norm == T(0)) throw Error(ErrorKind::kNumeric, "cannot normalize a zero embedding");
  return vector / norm;
}

template <typename T>
DualEncoder<T>::DualEncoder(TransformerWeights<T> visual, TransformerWeights<T> text, Matrix<T> token_embedding,
                            Tokenizer tokenizer)
    : visual_(std::move(visual)),
      text_(std::move(text)),
      token_embedding_(std::move(token_embedding)),
      tokenizer_(std::move(tokenizer)) {
  if (visual_spec().output_dim != text_spec().output_dim)
    throw Error(ErrorKind::kConfig, "visual and text encoders must share output_dim");
  if (token_embedding_.rows() != tokenizer_.vocab_size() || token_embedding_.cols() != text_spec().embed_dim)
    throw Error(ErrorKind::kShape, "token embedding table does not match tokenizer vocabulary / text width");
}

template <typename T>
DualEncoder<T> DualEncoder<T>::toy(std::uint64_t seed, const ToyEncoderOptions& options) {
  std::mt19937_64 rng(seed);
  auto visual = TransformerWeights<T>::random(options.visual, rng);
  auto text = TransformerWeights<T>::random(options.text, rng);
  Tokenizer tok = Tokenizer::toy(options.strict_tokenizer);
  Matrix<T> table(tok.vocab_size(), options.text.embed_dim);
  detail::fill_normal(table, 1.0, rng);
  return DualEncoder<T>(std::move(visual), std::move(text), std::move(table), std::move(tok));
}

template <typename T>
RowVector<T> DualEncoder<T>::encode_patches(const Matrix<T>& patches, std::span<const Matrix<T>> layer_prompts,
                                            EncoderTape<T>* tape) const {
  return visual_.forward(patches, layer_prompts, 0, tape);
}

template <typename T>
std::vector<int> DualEncoder<T>::tokenize_class(const std::string& class_name,
                                                const std::string& prompt_template) const {
  std::vector<int> ids = tokenizer_.encode(fill_template(prompt_template, class_name));
  const auto budget = static_cast<std::size_t>(text_spec().max_tokens);
  if (ids.size() > budget) {
    ids.resize(budget);
    ids.back() = Tokenizer::kEnd;
  }
  return ids;
}

template <typename T>
Matrix<T> DualEncoder<T>::embed_tokens(const std::vector<int>& ids) const {
  if (ids.empty()) throw Error(ErrorKind::kInput, "class token sequence is empty");
  Matrix<T> out(static_cast<Eigen::Index>(ids.size()), token_embedding_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= token_embedding_.rows()) throw Error(ErrorKind::kTokenizer, "token id out of range");
    out.row(static_cast<Eigen::Index>(i)) = token_embedding_.row(ids[i]);
  }
  return out;
}

template <typename T>
RowVector<T> DualEncoder<T>::encode_token_ids(const std::vector<int>& ids, std::span<const Matrix<T>> layer_prompts,
                                              EncoderTape<T>* tape) const {
  const Matrix<T> tokens = embed_tokens(ids);
  return text_.forward(tokens, layer_prompts, tokens.rows() - 1, tape);
}

template <typename T>
std::uint32_t DualEncoder<T>::backbone_checksum() const {
  // The serialized form ends with its own CRC; hashing that trailer too would
  // give the same residue for every backbone.
  const auto bytes = to_archive().serialize();
  return crc32_of(std::span<const std::byte>(bytes).first(bytes.size() - 4));
}

template <typename T>
Archive DualEncoder<T>::to_archive() const {
  Archive ar;
  TextConfig meta;
  encoder_spec_into(meta, "visual", visual_spec());
  encoder_spec_into(meta, "text", text_spec());
  meta.set("tokenizer.oov_buckets", std::to_string(tokenizer_.oov_buckets()));
  meta.set("tokenizer.strict", tokenizer_.strict() ? "true" : "false");
  std::string vocab;
  for (const auto& w : tokenizer_.vocabulary()) vocab += (vocab.empty() ? "" : " ") + w;
  meta.set("tokenizer.vocabulary", vocab);
  ar.metadata = meta.render();
  constexpr DType dt = dtype_of<T>();
  visual_.weights().for_each([&](const std::string& name, const Matrix<T>& m) { ar.put("visual." + name, m, dt); });
  text_.weights().for_each([&](const std::string& name, const Matrix<T>& m) { ar.put("text." + name, m, dt); });
  ar.put("text.token_embedding", token_embedding_, dt);
  return ar;
}

template <typename T>
DualEncoder<T> DualEncoder<T>::from_archive(const Archive& archive) {
  const TextConfig meta = TextConfig::parse(archive.metadata, "encoder archive");
  auto load = [&](const std::string& prefix) {
    TransformerWeights<T> w;
    w.spec = encoder_spec_from(meta, prefix);
    w.spec.validate();
    w.blocks.resize(static_cast<std::size_t>(w.spec.n_layers));
    w.for_each([&](const std::string& name, Matrix<T>& m) { m = archive.get_matrix<T>(prefix + "." + name); });
    return w;
  };
  auto visual = load("visual");
  auto text = load("text");
  std::vector<std::string> vocab;
  {
    std::string words = meta.get_string("tokenizer.vocabulary", "");
    std::size_t start = 0;
    while (start < words.size()) {
      auto end = words.find(' ', start);
      if (end == std::string::npos) end = words.size();
      if (end > start) vocab.push_back(words.substr(start, end - start));
      start = end + 1;
    }
  }
  Tokenizer tok(std::move(vocab), static_cast<int>(meta.get_int("tokenizer.oov_buckets", 64)),
                meta.get_bool("tokenizer.strict", false));
  return DualEncoder<T>(std::move(visual), std::move(text), archive.get_matrix<T>("text.token_embedding"),
                        std::move(tok));
}

template <typename T>
template <typename U>
DualEncoder<U> DualEncoder<T>::cast() const {
  return DualEncoder<U>(visual_.weights().template cast<U>(), text_.weights().template cast<U>(),
                        token_embedding_.template cast<U>(), tokenizer_);
}

}  // namespace syncclip

#endif  // SYNCCLIP_ENCODERS_IMPL_HPP_
