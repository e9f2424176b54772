#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "agpad/errors.hpp"
#include "agpad/tensor.hpp"

namespace agpad {

// AGTD tensor file: magic "AGTD", u32 LE format version, u32 LE rank,
// u32 LE dims, then row-major 32-bit LE floats. Bit-exact round trip.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

inline void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError("truncated " + what);
  }
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t get_u16(std::istream& is, const std::string& what) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2)) {
    throw DataError("truncated " + what);
  }
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline float get_f32(std::istream& is, const std::string& what) {
  std::uint32_t bits = get_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

template <typename Scalar>
void write_tensor(std::ostream& os, const Tensor<Scalar>& t) {
  os.write("AGTD", 4);
  detail::put_u32(os, kTensorFormatVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) {
    detail::put_u32(os, static_cast<std::uint32_t>(t.dim(i)));
  }
  for (std::int64_t i = 0; i < t.size(); ++i) {
    detail::put_f32(os, static_cast<float>(t[i]));
  }
}

inline Tensor<float> read_tensor(std::istream& is,
                                 const std::string& what = "tensor") {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "AGTD", 4) != 0) {
    throw DataError(what + ": bad AGTD magic");
  }
  std::uint32_t version = detail::get_u32(is, what);
  if (version != kTensorFormatVersion) {
    throw DataError(what + ": unsupported AGTD version " +
                    std::to_string(version));
  }
  std::uint32_t rank = detail::get_u32(is, what);
  if (rank == 0 || rank > 8) {
    throw DataError(what + ": implausible tensor rank " + std::to_string(rank));
  }
  Shape shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::uint32_t d = detail::get_u32(is, what);
    if (d == 0) throw DataError(what + ": zero dimension");
    shape[i] = static_cast<int>(d);
  }
  std::vector<float> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = detail::get_f32(is, what);
  return Tensor<float>(std::move(shape), std::move(values));
}

template <typename Scalar>
void save_tensor(const std::string& path, const Tensor<Scalar>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_tensor(os, t);
  if (!os) throw DataError("write failed: " + path);
}

inline Tensor<float> load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open: " + path);
  return read_tensor(is, path);
}

}  // namespace agpad
