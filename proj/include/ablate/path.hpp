#pragma once

#include <vector>

#include "ablate/grid.hpp"

namespace ablate {

// Time-discretized mask path phi(t_k) with t_k = k/(T-1). Admissible paths
// satisfy phi(0) = 0, phi(1) = 1, per-pixel monotonicity, and the
// constant-speed condition mean(phi(t_k)) = t_k; the container itself allows
// transiently invalid states (projection and validation are separate ops).
struct AblationPath {
  GridDomain domain;
  std::vector<Mask> masks;

  AblationPath() = default;
  AblationPath(GridDomain d, int time_samples) : domain(d) {
    if (time_samples < 3) throw value_error("AblationPath: need at least 3 time samples");
    masks.assign(static_cast<size_t>(time_samples), Mask(d));
  }

  int time_samples() const { return static_cast<int>(masks.size()); }
  double dt() const { return 1.0 / (time_samples() - 1); }
  double time_at(int k) const { return static_cast<double>(k) * dt(); }
};

// Forward-difference time derivative of a path, one slab per interval.
struct PathDensity {
  GridDomain domain;
  std::vector<Mask> slabs;  // slabs[k] = (masks[k+1] - masks[k]) / dt

  int slab_count() const { return static_cast<int>(slabs.size()); }
};

// The affine interpolation path: spatially constant masks phi(t_k) = t_k.
inline AblationPath linear_path(GridDomain domain, int time_samples) {
  AblationPath path(domain, time_samples);
  for (int k = 0; k < time_samples; ++k) {
    const double t = path.time_at(k);
    for (double& v : path.masks[k].values) v = t;
  }
  return path;
}

// Diagnostic density psi_k = (phi_{k+1} - phi_k)/dt. For an admissible path
// the slabs are nonnegative, have unit spatial mean, and per pixel the
// time-sum dt * sum_k psi_k telescopes to one.
inline PathDensity path_density(const AblationPath& path) {
  if (path.time_samples() < 3) throw value_error("path_density: need at least 3 time samples");
  PathDensity density;
  density.domain = path.domain;
  const double inv_dt = 1.0 / path.dt();
  density.slabs.reserve(path.time_samples() - 1);
  for (int k = 0; k + 1 < path.time_samples(); ++k) {
    Mask slab(path.domain);
    for (size_t p = 0; p < slab.size(); ++p)
      slab.values[p] = (path.masks[k + 1].values[p] - path.masks[k].values[p]) * inv_dt;
    density.slabs.push_back(std::move(slab));
  }
  return density;
}

}  // namespace ablate
