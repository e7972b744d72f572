#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ablate/errors.hpp"

namespace ablate {

// Pixel grid carrying a normalized measure: the domain always has total mass
// one, so spatial integrals reduce to plain averages over pixels.
struct GridDomain {
  int height = 0;
  int width = 0;

  GridDomain() = default;
  GridDomain(int h, int w) : height(h), width(w) {
    if (h <= 0 || w <= 0)
      throw value_error("GridDomain: height and width must be positive, got " +
                        std::to_string(h) + "x" + std::to_string(w));
  }

  int pixel_count() const { return height * width; }
  double measure_weight() const { return 1.0 / static_cast<double>(pixel_count()); }

  bool operator==(const GridDomain&) const = default;
};

// Channelled scalar field on a pixel grid (the classifier input or baseline).
// Storage is row-major (row, col, channel).
struct Image {
  GridDomain domain;
  int channels = 0;
  std::vector<double> values;

  Image() = default;
  Image(GridDomain d, int ch, double fill = 0.0)
      : domain(d), channels(ch),
        values(static_cast<size_t>(d.pixel_count()) * static_cast<size_t>(ch), fill) {
    if (ch <= 0) throw value_error("Image: channel count must be positive");
  }

  double& at(int r, int c, int ch) {
    return values[(static_cast<size_t>(r) * domain.width + c) * channels + ch];
  }
  double at(int r, int c, int ch) const {
    return values[(static_cast<size_t>(r) * domain.width + c) * channels + ch];
  }
  size_t size() const { return values.size(); }

  bool same_shape(const Image& other) const {
    return domain == other.domain && channels == other.channels;
  }
};

// Per-pixel blend weight in [0,1]: 0 keeps the input pixel, 1 the baseline's.
struct Mask {
  GridDomain domain;
  std::vector<double> values;

  Mask() = default;
  explicit Mask(GridDomain d, double fill = 0.0)
      : domain(d), values(static_cast<size_t>(d.pixel_count()), fill) {}

  double& at(int r, int c) { return values[static_cast<size_t>(r) * domain.width + c]; }
  double at(int r, int c) const { return values[static_cast<size_t>(r) * domain.width + c]; }
  size_t size() const { return values.size(); }
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Spatial integral of a mask over the unit-mass domain, i.e. its mean value.
inline double mask_mean(const Mask& m) {
  double s = 0.0;
  for (double x : m.values) s += x;
  return s * m.domain.measure_weight();
}

inline double image_channel_mean(const Image& img, int ch) {
  double s = 0.0;
  for (int r = 0; r < img.domain.height; ++r)
    for (int c = 0; c < img.domain.width; ++c) s += img.at(r, c, ch);
  return s * img.domain.measure_weight();
}

// Blend input and baseline per pixel: (1 - theta) * input + theta * baseline,
// the mask broadcast across channels. Affine in the mask.
inline Image interpolate(const Mask& mask, const Image& input, const Image& baseline) {
  if (!(mask.domain == input.domain))
    throw value_error("interpolate: mask/input grid mismatch");
  if (!input.same_shape(baseline))
    throw value_error("interpolate: input/baseline shape mismatch");
  Image out(input.domain, input.channels);
  const size_t n = mask.size();
  const int ch = input.channels;
  for (size_t p = 0; p < n; ++p) {
    const double t = mask.values[p];
    for (int k = 0; k < ch; ++k) {
      const size_t i = p * ch + k;
      out.values[i] = (1.0 - t) * input.values[i] + t * baseline.values[i];
    }
  }
  return out;
}

}  // namespace ablate
