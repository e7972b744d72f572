#pragma once

#include <cmath>
#include <vector>

#include "ablate/grid.hpp"

namespace ablate {

// Truncated, renormalized Gaussian taps for offsets -radius..radius with
// radius = ceil(3*sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw value_error("gaussian_kernel: sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace detail {

// Mirror index into [0, n-1] with edge repeat: -1 -> 0, n -> n-1. The fold
// keeps symmetric kernels mass-preserving under reflection at either border.
inline int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Separable pass over one scalar plane (h x w, unit stride in c).
inline void blur_plane(std::vector<double>& plane, int h, int w,
                       const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  std::vector<double> row_out(static_cast<size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int j = -radius; j <= radius; ++j)
        acc += kernel[j + radius] * plane[static_cast<size_t>(r) * w + mirror_index(c + j, w)];
      row_out[static_cast<size_t>(r) * w + c] = acc;
    }
  }
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) {
      double acc = 0.0;
      for (int j = -radius; j <= radius; ++j)
        acc += kernel[j + radius] * row_out[static_cast<size_t>(mirror_index(r + j, h)) * w + c];
      plane[static_cast<size_t>(r) * w + c] = acc;
    }
  }
}

}  // namespace detail

// Gaussian blur of every channel, mirror padding. Preserves per-channel means.
inline Image gaussian_blur(const Image& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  Image out = img;
  const int h = img.domain.height, w = img.domain.width;
  std::vector<double> plane(static_cast<size_t>(h) * w);
  for (int ch = 0; ch < img.channels; ++ch) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) plane[static_cast<size_t>(r) * w + c] = img.at(r, c, ch);
    detail::blur_plane(plane, h, w, kernel);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) out.at(r, c, ch) = plane[static_cast<size_t>(r) * w + c];
  }
  return out;
}

inline Mask gaussian_blur(const Mask& m, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  Mask out = m;
  detail::blur_plane(out.values, m.domain.height, m.domain.width, kernel);
  return out;
}

// Blurred copy of the input, the usual neutral baseline.
inline Image make_blur_baseline(const Image& input, double sigma_baseline) {
  if (!(sigma_baseline > 0.0))
    throw value_error("make_blur_baseline: sigma must be positive");
  return gaussian_blur(input, sigma_baseline);
}

}  // namespace ablate
