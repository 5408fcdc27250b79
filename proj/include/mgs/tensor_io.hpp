#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mgs/tensor.hpp"

namespace mgs {
namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& b, std::size_t& pos,
                             const std::string& what) {
  if (b.size() - pos < 4)
    throw std::runtime_error(what + ": truncated container");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + i]))
         << (8 * i);
  pos += 4;
  return v;
}

inline double get_f64(const std::string& b, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[pos + i]))
         << (8 * i);
  pos += 8;
  return std::bit_cast<double>(v);
}

}  // namespace detail

// Container layout: "MGST", u32 rank (always 4), four u32 extents, then the
// row-major payload as little-endian 64-bit floats.
inline std::string encode_tensor(const Tensor& t) {
  std::string out;
  out.reserve(4 + 4 + 16 + 8 * t.size());
  out += "MGST";
  detail::put_u32(out, 4);
  for (std::size_t d : t.dims())
    detail::put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.raw()) detail::put_f64(out, v);
  return out;
}

inline Tensor decode_tensor(const std::string& b, std::size_t& pos,
                            const std::string& what) {
  if (b.size() - pos < 4 || b.compare(pos, 4, "MGST") != 0)
    throw std::runtime_error(what + ": missing MGST magic");
  pos += 4;
  const std::uint32_t rank = detail::get_u32(b, pos, what);
  if (rank != 4) throw std::runtime_error(what + ": unsupported rank");
  std::uint32_t dims[4];
  for (auto& d : dims) d = detail::get_u32(b, pos, what);
  Tensor t(dims[0], dims[1], dims[2], dims[3]);
  if (b.size() - pos < 8 * t.size())
    throw std::runtime_error(what + ": truncated payload");
  for (double& v : t.raw()) v = detail::get_f64(b, pos);
  return t;
}

inline void save_tensor(const Tensor& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const std::string buf = encode_tensor(t);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string b = buf.str();
  std::size_t pos = 0;
  Tensor t = decode_tensor(b, pos, path);
  if (pos != b.size())
    throw std::runtime_error(path + ": trailing bytes after payload");
  return t;
}

}  // namespace mgs
