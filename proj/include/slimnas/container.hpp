#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "slimnas/errors.hpp"

namespace slimnas {

// Versioned binary tensor container ("SNAS"): magic, u32 format version,
// u64 content hash, tensor payloads (u32 dims, little-endian float32 data),
// then a labels block (empty for weight files). Round-trips bit-exactly.

struct TensorBlob {
  std::vector<uint32_t> dims;
  std::vector<float> data;

  friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

struct Container {
  uint64_t content_hash = 0;
  std::vector<TensorBlob> tensors;
  std::vector<int32_t> labels;

  friend bool operator==(const Container&, const Container&) = default;
};

namespace detail {

inline constexpr char kMagic[4] = {'S', 'N', 'A', 'S'};
inline constexpr uint32_t kFormatVersion = 1;

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

struct ByteReader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("container truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace detail

inline std::string serialize_container(const Container& c) {
  std::string out;
  out.append(detail::kMagic, 4);
  detail::put_u32(out, detail::kFormatVersion);
  detail::put_u64(out, c.content_hash);
  detail::put_u32(out, static_cast<uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    detail::put_u32(out, static_cast<uint32_t>(t.dims.size()));
    size_t count = 1;
    for (uint32_t d : t.dims) {
      detail::put_u32(out, d);
      count *= d;
    }
    if (count != t.data.size()) throw IoError("tensor dims do not match payload size");
    for (float f : t.data) detail::put_f32(out, f);
  }
  detail::put_u32(out, static_cast<uint32_t>(c.labels.size()));
  for (int32_t l : c.labels) detail::put_u32(out, static_cast<uint32_t>(l));
  return out;
}

inline Container parse_container(const std::string& buf) {
  if (buf.size() < 4 || buf.compare(0, 4, detail::kMagic, 4) != 0)
    throw IoError("not a SNAS container (bad magic)");
  detail::ByteReader r{buf, 4};
  const uint32_t version = r.u32();
  if (version != detail::kFormatVersion)
    throw IoError("unsupported container version " + std::to_string(version));
  Container c;
  c.content_hash = r.u64();
  const uint32_t tensor_count = r.u32();
  c.tensors.resize(tensor_count);
  for (auto& t : c.tensors) {
    const uint32_t ndims = r.u32();
    if (ndims > 8) throw IoError("implausible tensor rank");
    t.dims.resize(ndims);
    size_t count = 1;
    for (auto& d : t.dims) {
      d = r.u32();
      count *= d;
    }
    r.need(count * 4);
    t.data.resize(count);
    for (auto& f : t.data) f = r.f32();
  }
  const uint32_t label_count = r.u32();
  c.labels.resize(label_count);
  for (auto& l : c.labels) l = static_cast<int32_t>(r.u32());
  if (r.pos != buf.size()) throw IoError("trailing bytes after container payload");
  return c;
}

inline void write_container_file(const std::string& path, const Container& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_container(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

inline Container read_container_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_container(bytes);
}

}  // namespace slimnas
