#pragma once

#include <vector>

#include "ablate/grid.hpp"

namespace ablate {

// Scalar heatmap over the grid. The convention throughout is high = salient
// (the pixels retained longest / most responsible for the classification);
// every producer takes complements or flips signs as needed to honor it.
struct SaliencyMap {
  GridDomain domain;
  std::vector<double> values;
  static constexpr const char* orientation = "high = salient/retained";

  SaliencyMap() = default;
  explicit SaliencyMap(GridDomain d, double fill = 0.0)
      : domain(d), values(static_cast<size_t>(d.pixel_count()), fill) {}

  double& at(int r, int c) { return values[static_cast<size_t>(r) * domain.width + c]; }
  double at(int r, int c) const { return values[static_cast<size_t>(r) * domain.width + c]; }
};

struct ArgmaxPoint {
  int row = 0;
  int col = 0;
  bool tie = false;  // another pixel attains the same maximum
};

// Coordinates of the maximum; ties resolve to the smallest row-major index
// and are flagged.
inline ArgmaxPoint argmax_point(const SaliencyMap& map) {
  if (map.values.empty()) throw value_error("argmax_point: empty map");
  size_t best = 0;
  bool tie = false;
  for (size_t i = 1; i < map.values.size(); ++i) {
    if (map.values[i] > map.values[best]) {
      best = i;
      tie = false;
    } else if (map.values[i] == map.values[best]) {
      tie = true;
    }
  }
  return {static_cast<int>(best) / map.domain.width, static_cast<int>(best) % map.domain.width,
          tie};
}

}  // namespace ablate
