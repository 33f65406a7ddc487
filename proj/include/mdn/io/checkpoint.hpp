#pragma once

// Parameter checkpoint (.mdnw):
//   "MDNW" | version u8 | records until EOF
// record:
//   name length u32 BE | UTF-8 name | dtype u8 (0 = f32, 1 = f64) | rank u8 |
//   dims u32 BE x rank | elements, little-endian IEEE-754

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mdn/nn/module.hpp"

namespace mdn {

inline constexpr char kCheckpointMagic[4] = {'M', 'D', 'N', 'W'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

struct CheckpointRecord {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian element bytes

  std::size_t element_size() const { return dtype == DType::F32 ? 4 : 8; }
  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  double element(std::size_t i) const {
    const std::uint8_t* p = payload.data() + i * element_size();
    if (dtype == DType::F32) {
      std::uint32_t b = 0;
      for (int k = 3; k >= 0; --k) b = (b << 8) | p[k];
      return std::bit_cast<float>(b);
    }
    std::uint64_t b = 0;
    for (int k = 7; k >= 0; --k) b = (b << 8) | p[k];
    return std::bit_cast<double>(b);
  }
};

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  if constexpr (sizeof(T) == 4) {
    auto b = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(b >> (8 * k)));
  } else {
    auto b = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(b >> (8 * k)));
  }
}

}  // namespace detail

template <typename T>
CheckpointRecord make_record(const std::string& name, const Tensor<T>& t) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  CheckpointRecord r;
  r.name = name;
  r.dtype = sizeof(T) == 4 ? DType::F32 : DType::F64;
  const Shape& s = t.shape();
  r.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
            static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  r.payload.reserve(t.size() * sizeof(T));
  for (T v : t.vec()) detail::put_le(r.payload, v);
  return r;
}

inline std::vector<std::uint8_t> serialize_checkpoint(const std::vector<CheckpointRecord>& records) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  out.push_back(kCheckpointVersion);
  for (const auto& r : records) {
    detail::put_u32_be(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    out.push_back(static_cast<std::uint8_t>(r.dtype));
    out.push_back(static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) detail::put_u32_be(out, d);
    out.insert(out.end(), r.payload.begin(), r.payload.end());
  }
  return out;
}

inline std::vector<CheckpointRecord> parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  if (bytes[4] != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(bytes[4]));
  }
  std::vector<CheckpointRecord> records;
  std::size_t pos = 5;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw FormatError("checkpoint: truncated record");
  };
  while (pos < bytes.size()) {
    CheckpointRecord r;
    need(4);
    const std::uint32_t len = detail::get_u32_be(bytes.data() + pos);
    pos += 4;
    need(len);
    r.name.assign(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
    need(2);
    const std::uint8_t dtype = bytes[pos++];
    if (dtype > 1) throw FormatError("checkpoint: unknown dtype " + std::to_string(dtype));
    r.dtype = static_cast<DType>(dtype);
    const std::uint8_t rank = bytes[pos++];
    need(4u * rank);
    for (int i = 0; i < rank; ++i, pos += 4) r.dims.push_back(detail::get_u32_be(bytes.data() + pos));
    const std::size_t nbytes = r.numel() * r.element_size();
    need(nbytes);
    r.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + nbytes));
    pos += nbytes;
    records.push_back(std::move(r));
  }
  return records;
}

template <typename T>
std::vector<CheckpointRecord> to_records(const ParamList<T>& params) {
  std::vector<CheckpointRecord> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(make_record(p.name, p.var.value()));
  return out;
}

// Copies record values into params, matching by name and shape. Values are
// converted when the record dtype differs from T.
template <typename T>
void load_records(const ParamList<T>& params, const std::vector<CheckpointRecord>& records) {
  if (records.size() != params.size()) {
    throw FormatError("checkpoint: " + std::to_string(records.size()) + " records, model has " +
                      std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const auto& r = records[i];
    if (r.name != p.name) {
      throw FormatError("checkpoint: expected parameter " + p.name + ", found " + r.name);
    }
    const Shape s = p.var.shape();
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(s.n),
                                          static_cast<std::uint32_t>(s.c),
                                          static_cast<std::uint32_t>(s.h),
                                          static_cast<std::uint32_t>(s.w)};
    if (r.dims != dims) throw ShapeError("checkpoint: shape mismatch for " + p.name);
    auto& v = p.var.mutable_value();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<T>(r.element(k));
  }
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

template <typename T>
void save_checkpoint(const std::string& path, const ParamList<T>& params) {
  write_file_bytes(path, serialize_checkpoint(to_records(params)));
}

template <typename T>
void load_checkpoint(const std::string& path, const ParamList<T>& params) {
  load_records(params, parse_checkpoint(read_file_bytes(path)));
}

// FNV-1a over the serialized parameters plus an architecture descriptor.
inline std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
std::uint64_t model_hash(const ParamList<T>& params, const std::string& arch) {
  // Hash the f32 image so float and double copies of a model agree.
  std::vector<std::uint8_t> bytes(arch.begin(), arch.end());
  for (const auto& p : params) {
    bytes.insert(bytes.end(), p.name.begin(), p.name.end());
    for (T v : p.var.value().vec()) detail::put_le(bytes, static_cast<float>(v));
  }
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace mdn
