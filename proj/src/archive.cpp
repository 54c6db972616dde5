#include "syncclip/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace syncclip {
namespace {

constexpr char kMagic[8] = {'S', 'Y', 'N', 'C', 'A', 'R', 'C', '1'};

std::size_t dtype_size(DType d) { return d == DType::kF32 ? 4 : 8; }

template <typename U>
void append_le(std::vector<std::byte>& out, U value) {
  unsigned char raw[sizeof(U)];
  std::memcpy(raw, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
  for (unsigned char b : raw) out.push_back(static_cast<std::byte>(b));
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  template <typename U>
  U read() {
    need(sizeof(U));
    unsigned char raw[sizeof(U)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(U));
    pos_ += sizeof(U);
    U value;
    std::memcpy(&value, raw, sizeof(U));
    return value;
  }

  std::span<const std::byte> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::kChecksum, "archive truncated");
  }
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t DenseArray::element_count() const {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::uint32_t crc32_of(std::span<const std::byte> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void Archive::put_raw(const std::string& name, DType dtype, std::vector<std::uint64_t> shape,
                      std::span<const double> values) {
  if (contains(name)) throw Error(ErrorKind::kFormat, "duplicate array name '" + name + "'");
  DenseArray a;
  a.name = name;
  a.dtype = dtype;
  a.shape = std::move(shape);
  a.data.reserve(values.size() * dtype_size(dtype));
  for (double v : values) {
    if (dtype == DType::kF32)
      append_le(a.data, static_cast<float>(v));
    else
      append_le(a.data, v);
  }
  arrays_.push_back(std::move(a));
}

std::vector<double> Archive::values_of(const DenseArray& a) const {
  Reader r(a.data);
  std::vector<double> out(static_cast<std::size_t>(a.element_count()));
  for (auto& v : out) v = a.dtype == DType::kF32 ? static_cast<double>(r.read<float>()) : r.read<double>();
  return out;
}

bool Archive::contains(const std::string& name) const {
  return std::any_of(arrays_.begin(), arrays_.end(), [&](const DenseArray& a) { return a.name == name; });
}

const DenseArray& Archive::at(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return a;
  throw Error(ErrorKind::kFormat, "archive has no array named '" + name + "'");
}

std::vector<std::byte> Archive::serialize() const {
  std::vector<std::byte> out;
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  append_le(out, static_cast<std::uint32_t>(metadata.size()));
  for (char c : metadata) out.push_back(static_cast<std::byte>(c));
  append_le(out, static_cast<std::uint32_t>(arrays_.size()));
  for (const auto& a : arrays_) {
    append_le(out, static_cast<std::uint16_t>(a.name.size()));
    for (char c : a.name) out.push_back(static_cast<std::byte>(c));
    append_le(out, static_cast<std::uint8_t>(a.dtype));
    append_le(out, static_cast<std::uint8_t>(a.shape.size()));
    for (auto d : a.shape) append_le(out, d);
    out.insert(out.end(), a.data.begin(), a.data.end());
  }
  append_le(out, crc32_of(out));
  return out;
}

Archive Archive::deserialize(std::span<const std::byte> bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorKind::kChecksum, "not a prompt archive (bad magic)");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (tail.read<std::uint32_t>() != crc32_of(body))
    throw Error(ErrorKind::kChecksum, "archive CRC mismatch (corrupt or truncated file)");

  Reader r(body);
  r.take(sizeof(kMagic));
  Archive ar;
  const auto meta_len = r.read<std::uint32_t>();
  auto meta = r.take(meta_len);
  ar.metadata.assign(reinterpret_cast<const char*>(meta.data()), meta.size());
  const auto n = r.read<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    DenseArray a;
    const auto name_len = r.read<std::uint16_t>();
    auto name = r.take(name_len);
    a.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
    const auto dtype = r.read<std::uint8_t>();
    if (dtype != 1 && dtype != 2) throw Error(ErrorKind::kFormat, "unknown dtype in '" + a.name + "'");
    a.dtype = static_cast<DType>(dtype);
    const auto ndim = r.read<std::uint8_t>();
    for (std::uint8_t d = 0; d < ndim; ++d) a.shape.push_back(r.read<std::uint64_t>());
    auto data = r.take(static_cast<std::size_t>(a.element_count()) * dtype_size(a.dtype));
    a.data.assign(data.begin(), data.end());
    ar.arrays_.push_back(std::move(a));
  }
  if (r.position() != body.size()) throw Error(ErrorKind::kFormat, "trailing bytes in archive");
  return ar;
}

void Archive::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to '" + path.string() + "'");
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return deserialize(bytes);
}

}  // namespace syncclip
