#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ablate/grid.hpp"

namespace ablate {

// Minimal 8-bit PNG support (grayscale and RGB, no interlacing), enough to
// import inputs and export heatmaps. zlib does the heavy lifting; this is
// just the container plus scanline filters.

namespace pngdetail {

inline void put_u32_be(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline uint32_t get_u32_be(const unsigned char* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

inline void append_chunk(std::string& out, const char type[4], const std::string& data) {
  put_u32_be(out, static_cast<uint32_t>(data.size()));
  const size_t start = out.size();
  out.append(type, 4);
  out.append(data);
  const uLong crc = crc32(0, reinterpret_cast<const Bytef*>(out.data() + start),
                          static_cast<uInt>(out.size() - start));
  put_u32_be(out, static_cast<uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace pngdetail

// Encode 8-bit samples (row-major, `channels` = 1 or 3) as a PNG file.
inline void write_png_bytes(const std::string& filename, const std::vector<uint8_t>& samples,
                            int height, int width, int channels) {
  if (channels != 1 && channels != 3)
    throw value_error("write_png: only grayscale or RGB supported");
  if (samples.size() != static_cast<size_t>(height) * width * channels)
    throw value_error("write_png: sample count does not match dimensions");

  const size_t stride = static_cast<size_t>(width) * channels;
  std::vector<uint8_t> raw((stride + 1) * height);
  for (int r = 0; r < height; ++r) {
    raw[r * (stride + 1)] = 0;  // filter: none
    std::memcpy(&raw[r * (stride + 1) + 1], &samples[r * stride], stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw io_error("write_png: deflate failed");
  compressed.resize(bound);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  pngdetail::put_u32_be(ihdr, static_cast<uint32_t>(width));
  pngdetail::put_u32_be(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);               // color type
  ihdr.push_back(0); ihdr.push_back(0); ihdr.push_back(0);  // deflate/adaptive/no interlace
  pngdetail::append_chunk(out, "IHDR", ihdr);
  pngdetail::append_chunk(out, "IDAT",
                          std::string(reinterpret_cast<char*>(compressed.data()), compressed.size()));
  pngdetail::append_chunk(out, "IEND", "");

  std::ofstream f(filename, std::ios::binary);
  if (!f) throw io_error("write_png: cannot open '" + filename + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw io_error("write_png: write failed for '" + filename + "'");
}

// Decode an 8-bit grayscale or RGB PNG. Rejects palette, alpha, sub-byte
// depths and interlacing.
inline std::vector<uint8_t> read_png_bytes(const std::string& filename, int& height, int& width,
                                           int& channels) {
  std::ifstream f(filename, std::ios::binary);
  if (!f) throw io_error("read_png: cannot open '" + filename + "'");
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (file.size() < 8 || std::memcmp(file.data(), "\x89PNG\r\n\x1a\n", 8) != 0)
    throw io_error("read_png: '" + filename + "' is not a PNG file");

  size_t pos = 8;
  int w = 0, h = 0, ch = 0;
  std::vector<unsigned char> idat;
  bool saw_ihdr = false;
  while (pos + 8 <= file.size()) {
    const uint32_t len = pngdetail::get_u32_be(&file[pos]);
    if (pos + 12 + len > file.size()) throw io_error("read_png: truncated chunk");
    const std::string type(reinterpret_cast<char*>(&file[pos + 4]), 4);
    const unsigned char* data = &file[pos + 8];
    if (type == "IHDR") {
      w = static_cast<int>(pngdetail::get_u32_be(data));
      h = static_cast<int>(pngdetail::get_u32_be(data + 4));
      const int depth = data[8], color = data[9], interlace = data[12];
      if (depth != 8) throw io_error("read_png: only 8-bit depth supported");
      if (color == 0) ch = 1;
      else if (color == 2) ch = 3;
      else throw io_error("read_png: only grayscale/RGB color types supported");
      if (interlace != 0) throw io_error("read_png: interlaced PNG not supported");
      saw_ihdr = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || w <= 0 || h <= 0) throw io_error("read_png: missing or bad IHDR");

  const size_t stride = static_cast<size_t>(w) * ch;
  std::vector<uint8_t> raw((stride + 1) * h);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw io_error("read_png: inflate failed for '" + filename + "'");

  // Undo per-scanline filters.
  std::vector<uint8_t> out(stride * h);
  const int bpp = ch;
  for (int r = 0; r < h; ++r) {
    const uint8_t filter = raw[r * (stride + 1)];
    const uint8_t* src = &raw[r * (stride + 1) + 1];
    uint8_t* dst = &out[r * stride];
    const uint8_t* up = r > 0 ? &out[(r - 1) * stride] : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= static_cast<size_t>(bpp)) ? up[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += pngdetail::paeth(a, b, c); break;
        default: throw io_error("read_png: unknown scanline filter");
      }
      dst[i] = static_cast<uint8_t>(v & 0xff);
    }
  }
  height = h;
  width = w;
  channels = ch;
  return out;
}

// Import: 8-bit samples map linearly onto [0,1].
inline Image read_png_image(const std::string& filename) {
  int h = 0, w = 0, ch = 0;
  const std::vector<uint8_t> bytes = read_png_bytes(filename, h, w, ch);
  Image img(GridDomain(h, w), ch);
  for (size_t i = 0; i < bytes.size(); ++i) img.values[i] = bytes[i] / 255.0;
  return img;
}

// Export an image whose values live in [0,1]; out-of-range values clamp.
inline void write_png_image(const std::string& filename, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw value_error("write_png_image: only 1 or 3 channels supported");
  std::vector<uint8_t> bytes(img.values.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, img.values[i]));
    bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  write_png_bytes(filename, bytes, img.domain.height, img.domain.width, img.channels);
}

// Export a scalar field rescaled so min maps to 0 and max to 255 (flat
// fields map to 0).
inline void write_png_rescaled(const std::string& filename, const GridDomain& domain,
                               const std::vector<double>& values) {
  if (values.size() != static_cast<size_t>(domain.pixel_count()))
    throw value_error("write_png_rescaled: value count does not match grid");
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::vector<uint8_t> bytes(values.size());
  for (size_t i = 0; i < values.size(); ++i)
    bytes[i] = static_cast<uint8_t>(std::lround((values[i] - lo) * scale));
  write_png_bytes(filename, bytes, domain.height, domain.width, 1);
}

}  // namespace ablate
