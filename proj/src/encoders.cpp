#include "syncclip/encoders.hpp"

#include <sstream>

namespace syncclip {

void EncoderSpec::validate() const {
  std::string problems;
  auto need = [&](bool ok, const char* what) {
    if (!ok) problems += std::string(problems.empty() ? "" : "; ") + what;
  };
  need(n_layers >= 1, "n_layers must be >= 1");
  need(embed_dim >= 1 && n_heads >= 1, "embed_dim and n_heads must be positive");
  need(n_heads >= 1 && embed_dim % n_heads == 0, "embed_dim must be divisible by n_heads");
  need(max_tokens >= 1, "max_tokens must be >= 1");
  need(output_dim >= 1, "output_dim must be >= 1");
  need(mlp_ratio >= 1, "mlp_ratio must be >= 1");
  if (!problems.empty()) throw Error(ErrorKind::kConfig, "invalid encoder spec: " + problems);
}

std::string EncoderSpec::describe() const {
  std::ostringstream out;
  out << "layers=" << n_layers << " dim=" << embed_dim << " heads=" << n_heads << " tokens=" << max_tokens
      << " out=" << output_dim << " mlp=" << mlp_ratio;
  return out.str();
}

EncoderSpec encoder_spec_from(const TextConfig& cfg, const std::string& prefix) {
  EncoderSpec s;
  s.n_layers = static_cast<int>(cfg.get_int(prefix + ".layers", s.n_layers));
  s.embed_dim = static_cast<int>(cfg.get_int(prefix + ".embed_dim", s.embed_dim));
  s.n_heads = static_cast<int>(cfg.get_int(prefix + ".heads", s.n_heads));
  s.max_tokens = static_cast<int>(cfg.get_int(prefix + ".max_tokens", s.max_tokens));
  s.output_dim = static_cast<int>(cfg.get_int(prefix + ".output_dim", s.output_dim));
  s.mlp_ratio = static_cast<int>(cfg.get_int(prefix + ".mlp_ratio", s.mlp_ratio));
  return s;
}

void encoder_spec_into(TextConfig& cfg, const std::string& prefix, const EncoderSpec& spec) {
  cfg.set(prefix + ".layers", std::to_string(spec.n_layers));
  cfg.set(prefix + ".embed_dim", std::to_string(spec.embed_dim));
  cfg.set(prefix + ".heads", std::to_string(spec.n_heads));
  cfg.set(prefix + ".max_tokens", std::to_string(spec.max_tokens));
  cfg.set(prefix + ".output_dim", std::to_string(spec.output_dim));
  cfg.set(prefix + ".mlp_ratio", std::to_string(spec.mlp_ratio));
}

std::string describe_spec_metadata(const EncoderSpec& visual, const EncoderSpec& text) {
  return "visual{" + visual.describe() + "} text{" + text.describe() + "}";
}

}  // namespace syncclip
