#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ablate/monotone.hpp"
#include "ablate/path.hpp"

namespace ablate {

struct PathViolation {
  enum class Kind { boundary_start, boundary_end, monotonicity, constant_speed };
  Kind kind;
  int time_index = -1;
  int row = -1;
  int col = -1;
  double magnitude = 0.0;
};

inline const char* to_string(PathViolation::Kind k) {
  switch (k) {
    case PathViolation::Kind::boundary_start: return "boundary_start";
    case PathViolation::Kind::boundary_end: return "boundary_end";
    case PathViolation::Kind::monotonicity: return "monotonicity";
    case PathViolation::Kind::constant_speed: return "constant_speed";
  }
  return "?";
}

// Check the three admissibility conditions; empty result means the path is
// admissible at tolerance `tol`. Monotonicity violations name (pixel, k).
inline std::vector<PathViolation> validate_path(const AblationPath& path, double tol) {
  std::vector<PathViolation> out;
  const int T = path.time_samples();
  const int w = path.domain.width;
  for (int p = 0; p < path.domain.pixel_count(); ++p) {
    const double v0 = path.masks[0].values[p];
    const double v1 = path.masks[T - 1].values[p];
    if (std::abs(v0) > tol)
      out.push_back({PathViolation::Kind::boundary_start, 0, p / w, p % w, std::abs(v0)});
    if (std::abs(v1 - 1.0) > tol)
      out.push_back({PathViolation::Kind::boundary_end, T - 1, p / w, p % w, std::abs(v1 - 1.0)});
  }
  for (int k = 0; k + 1 < T; ++k) {
    for (int p = 0; p < path.domain.pixel_count(); ++p) {
      const double drop = path.masks[k].values[p] - path.masks[k + 1].values[p];
      if (drop > tol)
        out.push_back({PathViolation::Kind::monotonicity, k, p / w, p % w, drop});
    }
  }
  for (int k = 0; k < T; ++k) {
    const double dev = std::abs(mask_mean(path.masks[k]) - path.time_at(k));
    if (dev > tol)
      out.push_back({PathViolation::Kind::constant_speed, k, -1, -1, dev});
  }
  return out;
}

// Resample a monotone path so its mass curve mean(phi(t_k)) equals the
// uniform grid t_k exactly. A target mass that the input attains maps to the
// attained mask; a target inside a gap of the attained mass set maps to the
// affine blend of the two nearest attained masks. Preserves per-pixel
// monotonicity and the attained masks (up to blending across gaps).
inline AblationPath reparametrise_constant_speed(const AblationPath& path) {
  const int T = path.time_samples();
  if (T < 3) throw value_error("reparametrise_constant_speed: need at least 3 time samples");

  std::vector<double> mass(T);
  for (int k = 0; k < T; ++k) mass[k] = mask_mean(path.masks[k]);
  constexpr double kMassTol = 1e-9;
  for (int k = 0; k + 1 < T; ++k)
    if (mass[k + 1] < mass[k] - kMassTol)
      throw value_error("reparametrise_constant_speed: mass curve decreases at step " +
                        std::to_string(k) + "; project the path onto monotone masks first");
  if (std::abs(mass.front()) > kMassTol || std::abs(mass.back() - 1.0) > kMassTol)
    throw value_error("reparametrise_constant_speed: mass curve must run from 0 to 1");
  // Absorb sub-tolerance float drift so the bracketing search is clean.
  mass.front() = 0.0;
  mass.back() = 1.0;
  for (int k = 1; k < T; ++k) mass[k] = std::min(1.0, std::max(mass[k], mass[k - 1]));

  AblationPath out(path.domain, T);
  const size_t n = path.masks[0].size();
  for (int j = 0; j < T; ++j) {
    const double s = out.time_at(j);
    // Bracket s in the mass curve: hi = first index with mass >= s.
    const int hi = static_cast<int>(std::lower_bound(mass.begin(), mass.end(), s) - mass.begin());
    if (mass[hi] == s || hi == 0) {
      out.masks[j] = path.masks[hi];
      continue;
    }
    const int lo = hi - 1;
    const double lambda = (s - mass[lo]) / (mass[hi] - mass[lo]);
    Mask& dst = out.masks[j];
    for (size_t p = 0; p < n; ++p)
      dst.values[p] = (1.0 - lambda) * path.masks[lo].values[p] +
                      lambda * path.masks[hi].values[p];
  }
  return out;
}

// Hard projection onto the admissible set: per-pixel monotonisation, clamp to
// [0,1], endpoint pinning, constant-speed reparametrisation, in that order.
inline AblationPath project_admissible(const AblationPath& path) {
  const int T = path.time_samples();
  if (T < 3) throw value_error("project_admissible: need at least 3 time samples");
  AblationPath tmp = path;
  const size_t n = tmp.masks[0].size();
  std::vector<double> trajectory(T);
  for (size_t p = 0; p < n; ++p) {
    for (int k = 0; k < T; ++k) trajectory[k] = tmp.masks[k].values[p];
    const std::vector<double> fixed = monotonise(trajectory);
    for (int k = 0; k < T; ++k)
      tmp.masks[k].values[p] = std::min(1.0, std::max(0.0, fixed[k]));
  }
  std::fill(tmp.masks[0].values.begin(), tmp.masks[0].values.end(), 0.0);
  std::fill(tmp.masks[T - 1].values.begin(), tmp.masks[T - 1].values.end(), 1.0);
  return reparametrise_constant_speed(tmp);
}

}  // namespace ablate
