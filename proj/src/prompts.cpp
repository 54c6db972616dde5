#include "syncclip/prompts.hpp"

#include <cmath>

namespace syncclip {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kSyncClip: return "sync-clip";
    case Method::kIvlp: return "ivlp";
    case Method::kCoCoOp: return "cocoop";
    case Method::kMaPLe: return "maple";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  if (text == "sync-clip" || text == "syncclip") return Method::kSyncClip;
  if (text == "ivlp") return Method::kIvlp;
  if (text == "cocoop") return Method::kCoCoOp;
  if (text == "maple") return Method::kMaPLe;
  throw Error(ErrorKind::kConfig, "unknown baseline mode '" + std::string(text) +
                                      "' (expected sync-clip, ivlp, cocoop or maple)");
}

void PromptConfig::validate() const {
  std::string problems;
  auto need = [&](bool ok, const char* what) {
    if (!ok) problems += std::string(problems.empty() ? "" : "; ") + what;
  };
  need(m1 >= 0, "m1 must be >= 0");
  need(m2 >= 0, "m2 must be >= 0");
  need(n >= 1, "n must be >= 1");
  need(k >= 1, "k must be >= 1");
  need(depth >= 1, "depth must be >= 1");
  need(embed_dim_v >= 1 && embed_dim_t >= 1, "embedding widths must be positive");
  need(std::isfinite(init_scale) && init_scale >= 0, "init_scale must be finite and >= 0");
  if (!problems.empty()) throw Error(ErrorKind::kConfig, "invalid prompt config: " + problems);
}

void PromptConfig::validate_against(int visual_layers, int text_layers) const {
  validate();
  if (depth > visual_layers || depth > text_layers)
    throw Error(ErrorKind::kConfig, "prompt depth " + std::to_string(depth) + " exceeds encoder layers (visual " +
                                        std::to_string(visual_layers) + ", text " + std::to_string(text_layers) + ")");
}

int default_prompt_depth(int n_layers) {
  if (n_layers <= 0) throw Error(ErrorKind::kConfig, "encoder must have at least one layer");
  return std::max(1, static_cast<int>(std::lround(0.75 * n_layers)));
}

PromptBank<double> init_prompt_bank(const PromptConfig& config, std::uint64_t seed) {
  PromptBank<double> bank = PromptBank<double>::zeros(config);
  if (config.init_scale == 0.0) return bank;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config.init_scale);
  bank.for_each([&](const std::string&, Matrix<double>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  });
  return bank;
}

}  // namespace syncclip
