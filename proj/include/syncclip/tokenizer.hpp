#ifndef SYNCCLIP_TOKENIZER_HPP_
#define SYNCCLIP_TOKENIZER_HPP_

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace syncclip {

inline constexpr std::string_view kClassPlaceholder = "[CLS]";

/// Lowercasing word/punctuation tokenizer over a fixed vocabulary. Unknown
/// words hash into `oov_buckets` extra ids unless the tokenizer is strict.
/// Ids: 0 = start, 1 = end, then vocabulary words, then OOV buckets.
class Tokenizer {
 public:
  static constexpr int kStart = 0;
  static constexpr int kEnd = 1;

  Tokenizer(std::vector<std::string> vocabulary, int oov_buckets, bool strict = false);

  /// Template words, punctuation, and the object names used by the toy data.
  static Tokenizer toy(bool strict = false);

  std::vector<std::string> split(std::string_view text) const;
  /// [start, tokens..., end]
  std::vector<int> encode(std::string_view text) const;

  int vocab_size() const { return 2 + static_cast<int>(vocabulary_.size()) + oov_buckets_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  int oov_buckets() const { return oov_buckets_; }
  bool strict() const { return strict_; }

 private:
  int id_of(const std::string& token) const;

  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, int> index_;
  int oov_buckets_;
  bool strict_;
};

/// Substitutes the class name (underscores read as spaces) for the single
/// [CLS] placeholder.
std::string fill_template(std::string_view prompt_template, std::string_view class_name);

/// Words usable as toy class names; each is in the toy vocabulary.
const std::vector<std::string>& toy_class_words();

}  // namespace syncclip

#endif  // SYNCCLIP_TOKENIZER_HPP_
