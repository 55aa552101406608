#pragma once

// Minimal PNG codec over zlib: grayscale or RGB, 8- or 16-bit, no
// interlacing, no palettes. Writing always emits unfiltered scanlines at a
// fixed compression level, so identical pixels produce identical bytes.

#include <zlib.h>

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <span>
#include <utility>
#include <vector>

#include "dsv/errors.hpp"

namespace dsv {

/// Decoded raster; samples are row-major, channel innermost, one value per
/// sample regardless of bit depth (8-bit values occupy 0..255).
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 1;   // 1 = grayscale, 3 = RGB
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

namespace detail {

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

inline std::uint32_t get_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         std::span<const std::uint8_t> payload) {
  put_be32(out, std::uint32_t(payload.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const std::uint32_t crc =
      ::crc32(0, out.data() + type_at, uInt(4 + payload.size()));
  put_be32(out, crc);
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const PngImage& img) {
  if (img.width < 1 || img.height < 1 || (img.channels != 1 && img.channels != 3) ||
      (img.bit_depth != 8 && img.bit_depth != 16))
    throw format_error("encode_png: unsupported image layout");
  if (img.samples.size() != std::size_t(img.width) * img.height * img.channels)
    throw format_error("encode_png: sample count does not match dimensions");

  const int bytes_per_sample = img.bit_depth / 8;
  const std::size_t row_bytes = std::size_t(img.width) * img.channels * bytes_per_sample;
  std::vector<std::uint8_t> raw;
  raw.reserve((row_bytes + 1) * img.height);
  std::size_t si = 0;
  for (int r = 0; r < img.height; ++r) {
    raw.push_back(0);  // filter: none
    for (std::size_t i = 0; i < std::size_t(img.width) * img.channels; ++i, ++si) {
      const std::uint16_t v = img.samples[si];
      if (bytes_per_sample == 2) raw.push_back(std::uint8_t(v >> 8));
      raw.push_back(std::uint8_t(v & 0xff));
    }
  }

  uLongf bound = ::compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (::compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw format_error("encode_png: deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
  std::vector<std::uint8_t> ihdr;
  detail::put_be32(ihdr, std::uint32_t(img.width));
  detail::put_be32(ihdr, std::uint32_t(img.height));
  ihdr.push_back(std::uint8_t(img.bit_depth));
  ihdr.push_back(img.channels == 1 ? 0 : 2);  // color type
  ihdr.push_back(0);                          // compression
  ihdr.push_back(0);                          // filter method
  ihdr.push_back(0);                          // no interlace
  detail::append_chunk(out, "IHDR", ihdr);
  detail::append_chunk(out, "IDAT", compressed);
  detail::append_chunk(out, "IEND", {});
  return out;
}

/// (width, height) from the IHDR alone, without decompressing the image.
inline std::pair<int, int> png_dimensions(std::span<const std::uint8_t> bytes) {
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 24 || std::memcmp(bytes.data(), sig, 8) != 0)
    throw format_error("png_dimensions: bad signature");
  if (std::memcmp(&bytes[12], "IHDR", 4) != 0) throw format_error("png_dimensions: no IHDR");
  return {int(detail::get_be32(&bytes[16])), int(detail::get_be32(&bytes[20]))};
}

inline PngImage decode_png(std::span<const std::uint8_t> bytes) {
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
    throw format_error("decode_png: bad signature");

  PngImage img;
  std::vector<std::uint8_t> idat;
  bool have_ihdr = false;
  std::size_t at = 8;
  while (at + 12 <= bytes.size()) {
    const std::uint32_t len = detail::get_be32(&bytes[at]);
    if (at + 12 + len > bytes.size()) throw format_error("decode_png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[at + 4]);
    const std::uint8_t* payload = &bytes[at + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw format_error("decode_png: bad IHDR");
      img.width = int(detail::get_be32(payload));
      img.height = int(detail::get_be32(payload + 4));
      img.bit_depth = payload[8];
      const int color_type = payload[9];
      if (payload[12] != 0) throw format_error("decode_png: interlaced PNG unsupported");
      if (color_type == 0)
        img.channels = 1;
      else if (color_type == 2)
        img.channels = 3;
      else
        throw format_error("decode_png: unsupported color type");
      if (img.bit_depth != 8 && img.bit_depth != 16)
        throw format_error("decode_png: unsupported bit depth");
      if (img.width < 1 || img.height < 1) throw format_error("decode_png: bad dimensions");
      have_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    at += 12 + len;
  }
  if (!have_ihdr || idat.empty()) throw format_error("decode_png: missing IHDR or IDAT");

  const int bytes_per_sample = img.bit_depth / 8;
  const int bpp = img.channels * bytes_per_sample;  // filter unit, bytes
  const std::size_t row_bytes = std::size_t(img.width) * bpp;
  std::vector<std::uint8_t> raw((row_bytes + 1) * img.height);
  uLongf raw_len = uLongf(raw.size());
  if (::uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw format_error("decode_png: inflate failed");

  std::vector<std::uint8_t> prev(row_bytes, 0);
  std::vector<std::uint8_t> cur(row_bytes);
  img.samples.resize(std::size_t(img.width) * img.height * img.channels);
  std::size_t si = 0;
  for (int r = 0; r < img.height; ++r) {
    const std::uint8_t* src = &raw[std::size_t(r) * (row_bytes + 1)];
    const int filter = src[0];
    ++src;
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int a = i >= std::size_t(bpp) ? cur[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= std::size_t(bpp) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += detail::paeth(a, b, c); break;
        default: throw format_error("decode_png: bad filter type");
      }
      cur[i] = std::uint8_t(v);
    }
    for (std::size_t i = 0; i < row_bytes; i += bytes_per_sample, ++si)
      img.samples[si] = bytes_per_sample == 2
                            ? std::uint16_t((cur[i] << 8) | cur[i + 1])
                            : std::uint16_t(cur[i]);
    std::swap(prev, cur);
  }
  return img;
}

}  // namespace dsv
