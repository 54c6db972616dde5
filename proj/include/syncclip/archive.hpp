#ifndef SYNCCLIP_ARCHIVE_HPP_
#define SYNCCLIP_ARCHIVE_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "syncclip/common.hpp"

namespace syncclip {

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2 };

/// One named dense array. Data is kept in little-endian byte order so an
/// archive written on any host is byte-identical.
struct DenseArray {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> shape;
  std::vector<std::byte> data;

  std::uint64_t element_count() const;
};

/// Single-file container: a structured-text metadata block plus named dense
/// arrays, closed by a CRC32 over every preceding byte.
///
/// Layout (all integers little-endian):
///   "SYNCARC1" | u32 meta_len | meta | u32 n_arrays |
///   n_arrays x { u16 name_len | name | u8 dtype | u8 ndim | u64 dims[ndim] | data } |
///   u32 crc32
class Archive {
 public:
  std::string metadata;

  template <typename T>
  void put(const std::string& name, const Matrix<T>& m, DType dtype);
  template <typename T>
  void put(const std::string& name, const Vector<T>& v, DType dtype);

  bool contains(const std::string& name) const;
  const DenseArray& at(const std::string& name) const;
  const std::vector<DenseArray>& arrays() const { return arrays_; }

  /// Reads a 1-d or 2-d array, converting dtype if needed. 1-d arrays come
  /// back as a single column.
  template <typename T>
  Matrix<T> get_matrix(const std::string& name) const;
  template <typename T>
  Vector<T> get_vector(const std::string& name) const;

  std::vector<std::byte> serialize() const;
  static Archive deserialize(std::span<const std::byte> bytes);

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  void put_raw(const std::string& name, DType dtype, std::vector<std::uint64_t> shape,
               std::span<const double> values);
  std::vector<double> values_of(const DenseArray& a) const;

  std::vector<DenseArray> arrays_;
};

std::uint32_t crc32_of(std::span<const std::byte> bytes);

template <typename T>
void Archive::put(const std::string& name, const Matrix<T>& m, DType dtype) {
  std::vector<double> values(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      values[static_cast<std::size_t>(r * m.cols() + c)] = static_cast<double>(m(r, c));
  put_raw(name, dtype,
          {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, values);
}

template <typename T>
void Archive::put(const std::string& name, const Vector<T>& v, DType dtype) {
  std::vector<double> values(v.data(), v.data() + v.size());
  put_raw(name, dtype, {static_cast<std::uint64_t>(v.size())}, values);
}

template <typename T>
Matrix<T> Archive::get_matrix(const std::string& name) const {
  const DenseArray& a = at(name);
  if (a.shape.empty() || a.shape.size() > 2)
    throw Error(ErrorKind::kShape, "array '" + name + "' is not 1-d or 2-d");
  const auto rows = static_cast<Eigen::Index>(a.shape[0]);
  const auto cols = a.shape.size() == 2 ? static_cast<Eigen::Index>(a.shape[1]) : 1;
  const std::vector<double> values = values_of(a);
  Matrix<T> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<T>(values[static_cast<std::size_t>(r * cols + c)]);
  return m;
}

template <typename T>
Vector<T> Archive::get_vector(const std::string& name) const {
  const DenseArray& a = at(name);
  if (a.shape.size() != 1) throw Error(ErrorKind::kShape, "array '" + name + "' is not 1-d");
  const std::vector<double> values = values_of(a);
  Vector<T> v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<T>(values[i]);
  return v;
}

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::kF32 : DType::kF64;
}

}  // namespace syncclip

#endif  // SYNCCLIP_ARCHIVE_HPP_
