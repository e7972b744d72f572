#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ablate/errors.hpp"

namespace ablate {

// One flattened interval of the monotone projection: samples lo..hi
// (inclusive) are replaced by the centerline level.
struct MonotoneSegment {
  int lo = 0;
  int hi = 0;
  double level = 0.0;
};

using MonotoneSegmentSet = std::vector<MonotoneSegment>;

namespace detail {

struct MonotoneBlock {
  int lo, hi;
  double max, min;
  double level() const { return 0.5 * (max + min); }
};

}  // namespace detail

// Locate the flattened intervals of the sup-norm-optimal nondecreasing
// projection of `samples`. Decreasing steps seed the intervals; every
// interval carries the centerline midway between the extremes it covers, and
// intervals whose centerlines would decrease merge and recompute, cascading
// left until the centerlines are nondecreasing. Flattening an interval to
// such a centerline costs (max - min)/2, which a decreasing sample pair
// inside the interval also forces on any nondecreasing fit, hence
// optimality. Plateaus are not decreasing and stay untouched.
inline MonotoneSegmentSet monotone_segments(const std::vector<double>& samples) {
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw value_error("monotone_segments: empty input");
  for (double v : samples)
    if (!std::isfinite(v)) throw value_error("monotone_segments: non-finite sample");

  std::vector<detail::MonotoneBlock> blocks;
  blocks.reserve(samples.size());
  for (int i = 0; i < n; ++i) {
    detail::MonotoneBlock cur{i, i, samples[i], samples[i]};
    while (!blocks.empty() && cur.level() < blocks.back().level()) {
      const detail::MonotoneBlock& prev = blocks.back();
      cur.lo = prev.lo;
      cur.max = std::max(cur.max, prev.max);
      cur.min = std::min(cur.min, prev.min);
      blocks.pop_back();
    }
    blocks.push_back(cur);
  }

  MonotoneSegmentSet segments;
  for (const detail::MonotoneBlock& b : blocks)
    if (b.hi > b.lo) segments.push_back({b.lo, b.hi, b.level()});
  return segments;
}

// Sup-norm-optimal nondecreasing projection. Equals the input wherever the
// input is already locally nondecreasing and no flattened interval covers it.
inline std::vector<double> monotonise(const std::vector<double>& samples) {
  std::vector<double> out = samples;
  for (const MonotoneSegment& seg : monotone_segments(samples))
    for (int i = seg.lo; i <= seg.hi; ++i) out[i] = seg.level;
  return out;
}

}  // namespace ablate
