#pragma once

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgs/tensor.hpp"

namespace mgs {
namespace detail {

[[noreturn]] inline void io_fail(const std::string& path,
                                 const std::string& what, std::size_t at) {
  std::ostringstream msg;
  msg << path << ": " << what << " at byte " << at;
  throw std::runtime_error(msg.str());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void skip_space_and_comments(const std::string& b, std::size_t& pos) {
  while (pos < b.size()) {
    const unsigned char c = static_cast<unsigned char>(b[pos]);
    if (c == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
}

inline std::size_t parse_pnm_uint(const std::string& b, std::size_t& pos,
                                  const std::string& path,
                                  const std::string& field) {
  skip_space_and_comments(b, pos);
  if (pos >= b.size() || !std::isdigit(static_cast<unsigned char>(b[pos])))
    io_fail(path, "expected " + field, pos);
  std::size_t value = 0;
  while (pos < b.size() && std::isdigit(static_cast<unsigned char>(b[pos]))) {
    value = value * 10 + static_cast<std::size_t>(b[pos] - '0');
    if (value > 1u << 30) io_fail(path, field + " out of range", pos);
    ++pos;
  }
  return value;
}

struct PnmImage {
  int channels = 0;  // 1 for P5, 3 for P6
  std::size_t width = 0, height = 0;
  std::size_t maxval = 0;
  std::vector<std::size_t> raw;  // row-major, interleaved channels
};

inline PnmImage load_pnm(const std::string& path) {
  const std::string b = read_file(path);
  std::size_t pos = 0;
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6'))
    io_fail(path, "expected P5 or P6 magic", 0);
  PnmImage img;
  img.channels = b[1] == '5' ? 1 : 3;
  pos = 2;
  img.width = parse_pnm_uint(b, pos, path, "width");
  img.height = parse_pnm_uint(b, pos, path, "height");
  img.maxval = parse_pnm_uint(b, pos, path, "maxval");
  if (img.width == 0 || img.height == 0)
    io_fail(path, "zero image extent", pos);
  if (img.maxval != 255 && img.maxval != 65535)
    io_fail(path, "unsupported maxval (use 255 or 65535)", pos);
  if (pos >= b.size() ||
      !std::isspace(static_cast<unsigned char>(b[pos])))
    io_fail(path, "expected single whitespace before payload", pos);
  ++pos;
  const std::size_t bytes_per = img.maxval == 255 ? 1 : 2;
  const std::size_t count =
      img.width * img.height * static_cast<std::size_t>(img.channels);
  if (b.size() - pos < count * bytes_per)
    io_fail(path, "truncated payload", b.size());
  img.raw.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (bytes_per == 1) {
      img.raw[i] = static_cast<unsigned char>(b[pos + i]);
    } else {  // 16-bit samples are big-endian per netpbm
      img.raw[i] =
          (static_cast<std::size_t>(static_cast<unsigned char>(b[pos + 2 * i]))
           << 8) |
          static_cast<unsigned char>(b[pos + 2 * i + 1]);
    }
  }
  return img;
}

inline void write_pnm(const std::string& path, int channels, std::size_t w,
                      std::size_t h, std::size_t maxval,
                      const std::vector<std::size_t>& raw) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << (channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n"
      << maxval << "\n";
  std::string payload;
  payload.reserve(raw.size() * (maxval == 255 ? 1 : 2));
  for (std::size_t v : raw) {
    if (maxval == 255) {
      payload.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    } else {
      payload.push_back(static_cast<char>((v >> 8) & 0xFF));
      payload.push_back(static_cast<char>(v & 0xFF));
    }
  }
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace detail

// Loads a binary PGM (P5) or PPM (P6) into a 1xCxHxW tensor scaled to [0,1].
inline Tensor load_image(const std::string& path) {
  const detail::PnmImage img = detail::load_pnm(path);
  Tensor t(1, static_cast<std::size_t>(img.channels), img.height, img.width);
  // True division, not multiplication by a reciprocal: sample k must map to
  // the correctly rounded k/maxval so that 8- and 16-bit encodings of the
  // same level (k and 257k) load as the same double.
  const double maxval = static_cast<double>(img.maxval);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < static_cast<std::size_t>(img.channels); ++c)
        t(0, c, y, x) =
            static_cast<double>(
                img.raw[(y * img.width + x) *
                            static_cast<std::size_t>(img.channels) +
                        c]) /
            maxval;
  return t;
}

// Loads a PGM depth map; raw values are millimeters (meters = raw / 1000).
// Invalid pixels carry raw value 0.
inline Tensor load_depth(const std::string& path) {
  const detail::PnmImage img = detail::load_pnm(path);
  if (img.channels != 1)
    throw std::runtime_error(path + ": depth must be a single-channel PGM");
  Tensor t(1, 1, img.height, img.width);
  for (std::size_t i = 0; i < img.raw.size(); ++i)
    t.raw()[i] = static_cast<double>(img.raw[i]) / 1000.0;
  return t;
}

// Saves a 1- or 3-channel map in [0,1] with round-half-up quantization.
// Out-of-range values are clamped, with one warning per file on stderr.
inline void save_image(const Tensor& t, const std::string& path,
                       int bitdepth = 8) {
  require(t.n() == 1 && (t.c() == 1 || t.c() == 3),
          "save_image: tensor must be 1x{1,3}xHxW");
  require(bitdepth == 8 || bitdepth == 16,
          "save_image: bitdepth must be 8 or 16");
  const std::size_t maxval = bitdepth == 8 ? 255u : 65535u;
  std::vector<std::size_t> raw(t.size());
  std::size_t clamped = 0;
  std::size_t i = 0;
  for (std::size_t y = 0; y < t.h(); ++y)
    for (std::size_t x = 0; x < t.w(); ++x)
      for (std::size_t c = 0; c < t.c(); ++c) {
        double v = t(0, c, y, x);
        if (v < 0.0 || v > 1.0) {
          ++clamped;
          v = std::min(1.0, std::max(0.0, v));
        }
        raw[i++] = static_cast<std::size_t>(
            std::floor(v * static_cast<double>(maxval) + 0.5));
      }
  if (clamped > 0)
    std::cerr << "warning: " << path << ": clamped " << clamped
              << " out-of-range values\n";
  detail::write_pnm(path, static_cast<int>(t.c()), t.w(), t.h(), maxval, raw);
}

// Saves a depth map in meters as a 16-bit PGM with millimeter raw values.
inline void save_depth_pgm16(const Tensor& t, const std::string& path) {
  require(t.n() == 1 && t.c() == 1, "save_depth: tensor must be 1x1xHxW");
  std::vector<std::size_t> raw(t.size());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double mm = std::floor(t.raw()[i] * 1000.0 + 0.5);
    if (mm < 0.0 || mm > 65535.0) ++clamped;
    raw[i] = static_cast<std::size_t>(std::min(65535.0, std::max(0.0, mm)));
  }
  if (clamped > 0)
    std::cerr << "warning: " << path << ": clamped " << clamped
              << " out-of-range depth values\n";
  detail::write_pnm(path, 1, t.w(), t.h(), 65535, raw);
}

}  // namespace mgs
