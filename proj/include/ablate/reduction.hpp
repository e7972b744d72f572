#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ablate/classifier.hpp"
#include "ablate/constraints.hpp"
#include "ablate/saliency.hpp"
#include "ablate/scores.hpp"

namespace ablate {

// Complement of the per-pixel time average of the masks, so pixels that stay
// unablated longest score highest.
inline SaliencyMap reduce_average(const AblationPath& path) {
  SaliencyMap map(path.domain);
  const int T = path.time_samples();
  const double dt = path.dt();
  for (size_t p = 0; p < map.values.size(); ++p) {
    double acc = 0.5 * (path.masks[0].values[p] + path.masks[T - 1].values[p]);
    for (int k = 1; k + 1 < T; ++k) acc += path.masks[k].values[p];
    map.values[p] = 1.0 - acc * dt;
  }
  return map;
}

struct ClassTransitionReport {
  int k_star = 0;
  bool fallback = false;  // no time sample ranked the target class first
};

// Pick the most confined mask still classified as the target: the largest
// time sample whose full multi-class output ranks the target first. When the
// target never dominates, fall back to the argmax of its probability. The
// heatmap is the complement of the selected mask.
inline SaliencyMap reduce_class_transition(const AblationPath& path, const Classifier& model,
                                           const Image& input, const Image& baseline,
                                           int target_class,
                                           ClassTransitionReport* report = nullptr) {
  const int T = path.time_samples();
  int k_star = -1;
  int argmax_k = 0;
  double best_p = -1.0;
  for (int k = 0; k < T; ++k) {
    const std::vector<double> p = model.evaluate(interpolate(path.masks[k], input, baseline));
    bool dominant = true;
    for (size_t j = 0; j < p.size(); ++j)
      if (static_cast<int>(j) != target_class && p[j] >= p[target_class]) {
        dominant = false;
        break;
      }
    if (dominant) k_star = k;
    if (p[target_class] > best_p) {
      best_p = p[target_class];
      argmax_k = k;
    }
  }
  const bool fallback = k_star < 0;
  if (fallback) k_star = argmax_k;
  if (report) *report = {k_star, fallback};

  SaliencyMap map(path.domain);
  for (size_t p = 0; p < map.values.size(); ++p)
    map.values[p] = 1.0 - path.masks[k_star].values[p];
  return map;
}

// Time average of (dissipating - retaining) masks: high where the
// dissipating path removes a feature early while the retaining path keeps
// it, which is exactly the salient set. Antisymmetric in its arguments.
inline SaliencyMap reduce_contrastive_average(const AblationPath& path_ret,
                                              const AblationPath& path_diss) {
  if (path_ret.time_samples() != path_diss.time_samples() ||
      !(path_ret.domain == path_diss.domain))
    throw value_error("reduce_contrastive_average: paths must share grid and time sampling");
  SaliencyMap map(path_ret.domain);
  const int T = path_ret.time_samples();
  const double dt = path_ret.dt();
  for (size_t p = 0; p < map.values.size(); ++p) {
    double acc = 0.5 * (path_diss.masks[0].values[p] - path_ret.masks[0].values[p] +
                        path_diss.masks[T - 1].values[p] - path_ret.masks[T - 1].values[p]);
    for (int k = 1; k + 1 < T; ++k)
      acc += path_diss.masks[k].values[p] - path_ret.masks[k].values[p];
    map.values[p] = acc * dt;
  }
  return map;
}

// Separable Hann window; pixels on the grid border map to exactly zero.
inline SaliencyMap apply_boundary_window(const SaliencyMap& map) {
  const int h = map.domain.height, w = map.domain.width;
  const auto hann = [](int i, int n) {
    if (n == 1) return 1.0;
    return 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * i / (n - 1)));
  };
  SaliencyMap out = map;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.at(r, c) = map.at(r, c) * hann(r, h) * hann(c, w);
  return out;
}

// Indicator path of a saliency map: pixel r flips once the logistic
// threshold log(t/(1-t)) passes its saliency, so low-saliency pixels are
// ablated first and ties flip together; the result is then reparametrised to
// constant speed. Endpoints come from the boundary conditions directly.
inline AblationPath saliency_to_path(const SaliencyMap& map, int time_samples) {
  if (time_samples < 3) throw value_error("saliency_to_path: need at least 3 time samples");
  if (!all_finite(map.values)) throw value_error("saliency_to_path: non-finite saliency");
  AblationPath path(map.domain, time_samples);
  for (int k = 1; k + 1 < time_samples; ++k) {
    const double t = path.time_at(k);
    const double threshold = std::log(t / (1.0 - t));
    for (size_t p = 0; p < map.values.size(); ++p)
      path.masks[k].values[p] = map.values[p] <= threshold ? 1.0 : 0.0;
  }
  std::fill(path.masks[time_samples - 1].values.begin(),
            path.masks[time_samples - 1].values.end(), 1.0);
  return reparametrise_constant_speed(path);
}

}  // namespace ablate
