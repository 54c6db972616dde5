#include "syncclip/tokenizer.hpp"

#include <cctype>
#include <cstdint>

#include "syncclip/common.hpp"

namespace syncclip {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const std::vector<std::string>& template_words() {
  static const std::vector<std::string> words = {
      "a",      "an",   "the",    "photo", "of",      "type",   "pet",       "flower", "food",
      "aircraft", "centered", "satellite", "texture", "person", "doing", "picture", "image", "this",
      "is",     ".",      ",",     "-",       "'",
  };
  return words;
}

}  // namespace

const std::vector<std::string>& toy_class_words() {
  static const std::vector<std::string> words = {
      "apple",  "bicycle", "castle", "dolphin", "eagle",  "forest", "guitar", "harbor",
      "island", "jaguar",  "kettle", "lantern", "meadow", "nebula", "orchid", "piano",
      "quartz", "rocket",  "saddle", "tulip",   "umbrella", "violin", "walrus", "yacht",
  };
  return words;
}

Tokenizer::Tokenizer(std::vector<std::string> vocabulary, int oov_buckets, bool strict)
    : vocabulary_(std::move(vocabulary)), oov_buckets_(oov_buckets), strict_(strict) {
  if (oov_buckets_ < 0) throw Error(ErrorKind::kConfig, "oov bucket count must be >= 0");
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (vocabulary_[i].empty()) continue;
    if (!index_.emplace(vocabulary_[i], static_cast<int>(2 + i)).second)
      throw Error(ErrorKind::kConfig, "duplicate vocabulary entry '" + vocabulary_[i] + "'");
  }
}

Tokenizer Tokenizer::toy(bool strict) {
  std::vector<std::string> vocab;
  for (const auto& w : template_words())
    if (!w.empty()) vocab.push_back(w);
  for (const auto& w : toy_class_words()) vocab.push_back(w);
  return Tokenizer(std::move(vocab), 64, strict);
}

std::vector<std::string> Tokenizer::split(std::string_view text) const {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c) || c == '_') {
      flush();
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

int Tokenizer::id_of(const std::string& token) const {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  if (strict_ || oov_buckets_ == 0) throw Error(ErrorKind::kTokenizer, "unknown token '" + token + "'");
  return 2 + static_cast<int>(vocabulary_.size()) + static_cast<int>(fnv1a(token) % oov_buckets_);
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids{kStart};
  for (const auto& tok : split(text)) ids.push_back(id_of(tok));
  ids.push_back(kEnd);
  return ids;
}

std::string fill_template(std::string_view prompt_template, std::string_view class_name) {
  const auto at = prompt_template.find(kClassPlaceholder);
  if (at == std::string_view::npos)
    throw Error(ErrorKind::kInput, "template '" + std::string(prompt_template) + "' has no [CLS] placeholder");
  if (prompt_template.find(kClassPlaceholder, at + 1) != std::string_view::npos)
    throw Error(ErrorKind::kInput, "template '" + std::string(prompt_template) + "' has more than one [CLS]");
  std::string name(class_name);
  for (char& c : name)
    if (c == '_') c = ' ';
  return std::string(prompt_template.substr(0, at)) + name +
         std::string(prompt_template.substr(at + kClassPlaceholder.size()));
}

}  // namespace syncclip
