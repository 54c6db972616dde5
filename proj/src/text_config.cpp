#include "syncclip/text_config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "syncclip/common.hpp"

namespace syncclip {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return key.front() != '.' && key.back() != '.';
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

bool looks_bare(const std::string& v) {
  if (v == "true" || v == "false") return true;
  double d;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  return ec == std::errc() && p == v.data() + v.size();
}

}  // namespace

TextConfig TextConfig::parse(std::string_view text, std::string_view origin) {
  TextConfig cfg;
  std::string table;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto where = std::string(origin) + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorKind::kConfig, where + ": unterminated table header");
      table = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_key(table)) throw Error(ErrorKind::kConfig, where + ": bad table name '" + table + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::kConfig, where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!valid_key(key)) throw Error(ErrorKind::kConfig, where + ": bad key '" + key + "'");
    cfg.values_[table.empty() ? key : table + "." + key] = unquote(trim(std::string_view(line).substr(eq + 1)));
  }
  return cfg;
}

TextConfig TextConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void TextConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw Error(ErrorKind::kConfig, "override '" + std::string(assignment) + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw Error(ErrorKind::kConfig, "bad override key '" + key + "'");
  values_[key] = unquote(trim(assignment.substr(eq + 1)));
}

std::optional<std::string> TextConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string TextConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double TextConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, "key '" + key + "' expects a number, got '" + *v + "'");
  }
}

long long TextConfig::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size())
    throw Error(ErrorKind::kConfig, "key '" + key + "' expects an integer, got '" + *v + "'");
  return out;
}

bool TextConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw Error(ErrorKind::kConfig, "key '" + key + "' expects true/false, got '" + *v + "'");
}

std::string TextConfig::render() const {
  auto literal = [](const std::string& v) { return looks_bare(v) ? v : "\"" + v + "\""; };
  std::ostringstream out;
  for (const auto& [key, value] : values_)
    if (key.find('.') == std::string::npos) out << key << " = " << literal(value) << "\n";
  std::string current;
  for (const auto& [key, value] : values_) {
    const auto dot = key.rfind('.');
    if (dot == std::string::npos) continue;
    const std::string table = key.substr(0, dot);
    if (table != current) {
      if (out.tellp() > 0) out << "\n";
      out << "[" << table << "]\n";
      current = table;
    }
    out << key.substr(dot + 1) << " = " << literal(value) << "\n";
  }
  return out.str();
}

}  // namespace syncclip
