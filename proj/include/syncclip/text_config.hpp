#ifndef SYNCCLIP_TEXT_CONFIG_HPP_
#define SYNCCLIP_TEXT_CONFIG_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace syncclip {

/// Flat view of a "key = value" file with [table] / [table.sub] headers.
/// Keys are stored fully dotted ("train.lr0"); values keep their literal
/// text with surrounding quotes removed. Comments start with '#'.
class TextConfig {
 public:
  static TextConfig parse(std::string_view text, std::string_view origin = "<string>");
  static TextConfig load(const std::filesystem::path& path);

  /// Applies "dotted.key=value".
  void apply_override(std::string_view assignment);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Renders grouped by table; strings are quoted, numbers and booleans bare.
  std::string render() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace syncclip

#endif  // SYNCCLIP_TEXT_CONFIG_HPP_
