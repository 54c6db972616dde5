#include "syncclip/objectives.hpp"

#include <cmath>

namespace syncclip {

std::string_view to_string(Reduction r) { return r == Reduction::kMean ? "mean" : "sum"; }

Reduction parse_reduction(std::string_view text) {
  if (text == "mean") return Reduction::kMean;
  if (text == "sum") return Reduction::kSum;
  throw Error(ErrorKind::kConfig, "unknown reduction '" + std::string(text) + "' (mean|sum)");
}

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorKind::kConfig, "alpha must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::kConfig, "beta must be finite and >= 0");
}

double combine_losses(double rce, double sce, double fs, const LossWeights& w) {
  return rce + w.alpha * sce + w.beta * fs;
}

}  // namespace syncclip
