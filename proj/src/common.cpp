#include "syncclip/common.hpp"

namespace syncclip {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "configuration";
    case ErrorKind::kInput: return "input";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kIndex: return "index";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kLabel: return "label";
    case ErrorKind::kIo: return "I/O";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kChecksum: return "checksum";
    case ErrorKind::kTokenizer: return "tokenizer";
    case ErrorKind::kUnmatchedClass: return "unmatched-class";
  }
  return "unknown";
}

std::string_view to_string(Domain domain) {
  return domain == Domain::kReal ? "real" : "synthetic";
}

Domain parse_domain(std::string_view text) {
  if (text == "real") return Domain::kReal;
  if (text == "synthetic" || text == "synth") return Domain::kSynthetic;
  throw Error(ErrorKind::kInput, "unknown domain '" + std::string(text) + "'");
}

std::string_view to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view text) {
  if (text == "f32" || text == "32" || text == "float32") return Precision::kF32;
  if (text == "f64" || text == "64" || text == "float64") return Precision::kF64;
  throw Error(ErrorKind::kConfig, "unknown precision '" + std::string(text) + "'");
}

}  // namespace syncclip
