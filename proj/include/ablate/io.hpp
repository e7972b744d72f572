#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ablate/path.hpp"

namespace ablate {

// The .fgrid container: one UTF-8 JSON header line
//   {"h":H,"w":W,"c":C,"t":T,"dtype":"f32","layout":"row-major t-major, then H,W,C"}
// terminated by '\n', followed by T*H*W*C little-endian 32-bit floats.
// Images store t=1, masks and heatmaps t=1,c=1, paths t=T,c=1.

namespace detail {

inline void append_f32_le(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

inline float read_f32_le(const unsigned char* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline std::string fgrid_header(int h, int w, int c, int t) {
  return "{\"h\":" + std::to_string(h) + ",\"w\":" + std::to_string(w) +
         ",\"c\":" + std::to_string(c) + ",\"t\":" + std::to_string(t) +
         ",\"dtype\":\"f32\",\"layout\":\"row-major t-major, then H,W,C\"}\n";
}

}  // namespace detail

struct FgridData {
  int h = 0, w = 0, c = 0, t = 0;
  std::vector<double> values;  // t-major, then row, col, channel
};

inline void write_fgrid_raw(const std::string& filename, int h, int w, int c, int t,
                            const std::vector<double>& values) {
  if (static_cast<size_t>(h) * w * c * t != values.size())
    throw value_error("write_fgrid: value count does not match header shape");
  std::string payload;
  payload.reserve(values.size() * 4);
  for (double v : values) detail::append_f32_le(payload, static_cast<float>(v));
  std::ofstream f(filename, std::ios::binary);
  if (!f) throw io_error("write_fgrid: cannot open '" + filename + "'");
  const std::string header = detail::fgrid_header(h, w, c, t);
  f.write(header.data(), static_cast<std::streamsize>(header.size()));
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) throw io_error("write_fgrid: write failed for '" + filename + "'");
}

inline FgridData read_fgrid(const std::string& filename) {
  std::ifstream f(filename, std::ios::binary);
  if (!f) throw io_error("read_fgrid: cannot open '" + filename + "'");
  std::string header;
  if (!std::getline(f, header)) throw io_error("read_fgrid: missing header in '" + filename + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("read_fgrid: bad header in '" + filename + "': " + e.what());
  }
  FgridData out;
  out.h = j.at("h").get<int>();
  out.w = j.at("w").get<int>();
  out.c = j.at("c").get<int>();
  out.t = j.at("t").get<int>();
  if (j.at("dtype").get<std::string>() != "f32")
    throw io_error("read_fgrid: unsupported dtype in '" + filename + "'");
  if (out.h <= 0 || out.w <= 0 || out.c <= 0 || out.t <= 0)
    throw io_error("read_fgrid: non-positive shape in '" + filename + "'");
  const size_t count = static_cast<size_t>(out.h) * out.w * out.c * out.t;
  std::vector<unsigned char> payload(count * 4);
  f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (static_cast<size_t>(f.gcount()) != payload.size())
    throw io_error("read_fgrid: truncated payload in '" + filename + "'");
  out.values.resize(count);
  for (size_t i = 0; i < count; ++i)
    out.values[i] = static_cast<double>(detail::read_f32_le(&payload[i * 4]));
  return out;
}

inline void write_fgrid(const std::string& filename, const Image& img) {
  write_fgrid_raw(filename, img.domain.height, img.domain.width, img.channels, 1, img.values);
}

inline void write_fgrid(const std::string& filename, const Mask& mask) {
  write_fgrid_raw(filename, mask.domain.height, mask.domain.width, 1, 1, mask.values);
}

inline void write_fgrid(const std::string& filename, const AblationPath& path) {
  std::vector<double> values;
  values.reserve(static_cast<size_t>(path.time_samples()) * path.masks[0].size());
  for (const Mask& m : path.masks) values.insert(values.end(), m.values.begin(), m.values.end());
  write_fgrid_raw(filename, path.domain.height, path.domain.width, 1, path.time_samples(), values);
}

inline Image read_fgrid_image(const std::string& filename) {
  const FgridData d = read_fgrid(filename);
  if (d.t != 1) throw io_error("read_fgrid_image: '" + filename + "' holds a path (t>1)");
  Image img(GridDomain(d.h, d.w), d.c);
  img.values = d.values;
  return img;
}

inline Mask read_fgrid_mask(const std::string& filename) {
  const FgridData d = read_fgrid(filename);
  if (d.t != 1 || d.c != 1)
    throw io_error("read_fgrid_mask: '" + filename + "' is not a single scalar field");
  Mask m(GridDomain(d.h, d.w));
  m.values = d.values;
  return m;
}

inline AblationPath read_fgrid_path(const std::string& filename) {
  const FgridData d = read_fgrid(filename);
  if (d.c != 1) throw io_error("read_fgrid_path: '" + filename + "' has multiple channels");
  if (d.t < 3) throw io_error("read_fgrid_path: '" + filename + "' has fewer than 3 time samples");
  AblationPath path(GridDomain(d.h, d.w), d.t);
  const size_t n = static_cast<size_t>(d.h) * d.w;
  for (int k = 0; k < d.t; ++k)
    std::copy(d.values.begin() + static_cast<long>(k * n),
              d.values.begin() + static_cast<long>((k + 1) * n), path.masks[k].values.begin());
  return path;
}

}  // namespace ablate
