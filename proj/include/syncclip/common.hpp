#ifndef SYNCCLIP_COMMON_HPP_
#define SYNCCLIP_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace syncclip {

// Token sequences are stored one token per row.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using PatchMatrix = Matrix<double>;

enum class ErrorKind {
  kConfig,
  kInput,
  kShape,
  kIndex,
  kNumeric,
  kLabel,
  kIo,
  kFormat,
  kChecksum,
  kTokenizer,
  kUnmatchedClass,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), message_(what) {}
  ErrorKind kind() const noexcept { return kind_; }
  /// The text without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

enum class Domain : std::uint8_t { kReal = 0, kSynthetic = 1 };

std::string_view to_string(Domain domain);
Domain parse_domain(std::string_view text);

enum class Precision { kF32, kF64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

template <typename T>
bool all_finite(const Matrix<T>& m) {
  return m.allFinite();
}

}  // namespace syncclip

#endif  // SYNCCLIP_COMMON_HPP_
