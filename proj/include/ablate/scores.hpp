#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ablate/blur.hpp"
#include "ablate/classifier.hpp"
#include "ablate/path.hpp"
#include "ablate/saliency.hpp"

namespace ablate {

enum class Objective { retain, dissipate, contrastive, straddle };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::retain: return "retain";
    case Objective::dissipate: return "dissipate";
    case Objective::contrastive: return "contrastive";
    case Objective::straddle: return "straddle";
  }
  return "?";
}

inline Objective objective_from_string(const std::string& s) {
  if (s == "retain") return Objective::retain;
  if (s == "dissipate") return Objective::dissipate;
  if (s == "contrastive") return Objective::contrastive;
  if (s == "straddle") return Objective::straddle;
  throw value_error("unknown objective '" + s + "'");
}

struct ScoreReport {
  Objective objective = Objective::retain;
  int target_class = 0;
  double score = 0.0;
  std::vector<double> per_step_F;            // target-class probability per time sample
  std::vector<double> per_step_F_secondary;  // complement / dissipating path, when applicable
  std::optional<double> sub_score_retain;
  std::optional<double> sub_score_dissipate;
  std::optional<double> interpath_l1;  // straddle diagnostic
};

inline nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json j;
  j["objective"] = to_string(r.objective);
  j["target_class"] = r.target_class;
  j["score"] = r.score;
  j["per_step_F"] = r.per_step_F;
  if (!r.per_step_F_secondary.empty()) j["per_step_F_secondary"] = r.per_step_F_secondary;
  if (r.sub_score_retain) j["sub_score_retain"] = *r.sub_score_retain;
  if (r.sub_score_dissipate) j["sub_score_dissipate"] = *r.sub_score_dissipate;
  if (r.interpath_l1) j["interpath_l1"] = *r.interpath_l1;
  return j;
}

// Trapezoid rule on the uniform time grid; exact for affine integrands.
inline double trapezoid(const std::vector<double>& f) {
  const size_t n = f.size();
  if (n < 2) throw value_error("trapezoid: need at least two samples");
  double acc = 0.5 * (f.front() + f.back());
  for (size_t k = 1; k + 1 < n; ++k) acc += f[k];
  return acc / static_cast<double>(n - 1);
}

namespace detail {

inline std::vector<double> per_step_target_probability(const AblationPath& path,
                                                       const Classifier& model,
                                                       const Image& input, const Image& baseline,
                                                       int target_class) {
  std::vector<double> f(path.time_samples());
  for (int k = 0; k < path.time_samples(); ++k)
    f[k] = model.evaluate(interpolate(path.masks[k], input, baseline))[target_class];
  return f;
}

inline AblationPath complement_path(const AblationPath& path) {
  AblationPath rev = path;
  for (Mask& m : rev.masks)
    for (double& v : m.values) v = 1.0 - v;
  return rev;
}

}  // namespace detail

// Time integral of the target-class probability along the path.
inline ScoreReport score_retain(const AblationPath& path, const Classifier& model,
                                const Image& input, const Image& baseline, int target_class) {
  ScoreReport r;
  r.objective = Objective::retain;
  r.target_class = target_class;
  r.per_step_F = detail::per_step_target_probability(path, model, input, baseline, target_class);
  r.score = trapezoid(r.per_step_F);
  return r;
}

inline ScoreReport score_dissipate(const AblationPath& path, const Classifier& model,
                                   const Image& input, const Image& baseline, int target_class) {
  ScoreReport r;
  r.objective = Objective::dissipate;
  r.target_class = target_class;
  r.per_step_F = detail::per_step_target_probability(path, model, input, baseline, target_class);
  r.score = 1.0 - trapezoid(r.per_step_F);
  return r;
}

// Retaining score of the path plus dissipating score of its pointwise
// complement (the complement runs from all-ones to all-zeros and is
// evaluated as given).
inline ScoreReport score_contrastive(const AblationPath& path, const Classifier& model,
                                     const Image& input, const Image& baseline, int target_class) {
  ScoreReport r;
  r.objective = Objective::contrastive;
  r.target_class = target_class;
  r.per_step_F = detail::per_step_target_probability(path, model, input, baseline, target_class);
  r.per_step_F_secondary = detail::per_step_target_probability(detail::complement_path(path),
                                                               model, input, baseline, target_class);
  r.sub_score_retain = trapezoid(r.per_step_F);
  r.sub_score_dissipate = 1.0 - trapezoid(r.per_step_F_secondary);
  r.score = *r.sub_score_retain + *r.sub_score_dissipate;
  return r;
}

// Joint score of a retaining and a dissipating path. Proximity of the two
// paths is not penalized here; the optimizer's pinching step enforces it.
// The report carries the L1 inter-path distance as a diagnostic.
inline ScoreReport score_straddle(const AblationPath& path_ret, const AblationPath& path_diss,
                                  const Classifier& model, const Image& input,
                                  const Image& baseline, int target_class) {
  if (path_ret.time_samples() != path_diss.time_samples() ||
      !(path_ret.domain == path_diss.domain))
    throw value_error("score_straddle: the two paths must share grid and time sampling");
  ScoreReport r;
  r.objective = Objective::straddle;
  r.target_class = target_class;
  r.per_step_F =
      detail::per_step_target_probability(path_ret, model, input, baseline, target_class);
  r.per_step_F_secondary =
      detail::per_step_target_probability(path_diss, model, input, baseline, target_class);
  r.sub_score_retain = trapezoid(r.per_step_F);
  r.sub_score_dissipate = 1.0 - trapezoid(r.per_step_F_secondary);
  r.score = *r.sub_score_retain + *r.sub_score_dissipate;

  std::vector<double> l1(path_ret.time_samples());
  for (int k = 0; k < path_ret.time_samples(); ++k) {
    double acc = 0.0;
    for (size_t p = 0; p < path_ret.masks[k].values.size(); ++p)
      acc += std::abs(path_ret.masks[k].values[p] - path_diss.masks[k].values[p]);
    l1[k] = acc * path_ret.domain.measure_weight();
  }
  r.interpath_l1 = trapezoid(l1);
  return r;
}

// Raw per-step integrand of the retaining-score differential: at each time
// sample the channel contraction g_k(r) = sum_c dF(x_k)(r,c) (baseline -
// input)(r,c). All time samples are populated, endpoints included.
inline std::vector<Mask> path_step_gradients(const AblationPath& path, const Classifier& model,
                                             const Image& input, const Image& baseline,
                                             int target_class) {
  if (!(input.domain == path.domain))
    throw value_error("path_step_gradients: path/input grid mismatch");
  if (!input.same_shape(baseline))
    throw value_error("path_step_gradients: input/baseline shape mismatch");
  std::vector<Mask> out;
  out.reserve(path.time_samples());
  const int ch = input.channels;
  for (int k = 0; k < path.time_samples(); ++k) {
    const Image x = interpolate(path.masks[k], input, baseline);
    const Image grad = model.input_gradient(x, target_class);
    Mask g(path.domain);
    for (size_t p = 0; p < g.values.size(); ++p) {
      double acc = 0.0;
      for (int c = 0; c < ch; ++c)
        acc += grad.values[p * ch + c] * (baseline.values[p * ch + c] - input.values[p * ch + c]);
      g.values[p] = acc;
    }
    out.push_back(std::move(g));
  }
  return out;
}

enum class GradientSign { ascend_F, descend_F };

// Per-step gradients for the path optimizer: the raw integrand, negated for
// descend_F, with the pinned endpoint masks receiving zero gradient. The
// score sensitivity of an interior pixel perturbation is dt * g_k(r).
inline std::vector<Mask> path_differential(const AblationPath& path, const Classifier& model,
                                           const Image& input, const Image& baseline,
                                           int target_class, GradientSign sign) {
  std::vector<Mask> g = path_step_gradients(path, model, input, baseline, target_class);
  if (sign == GradientSign::descend_F)
    for (Mask& m : g)
      for (double& v : m.values) v = -v;
  std::fill(g.front().values.begin(), g.front().values.end(), 0.0);
  std::fill(g.back().values.begin(), g.back().values.end(), 0.0);
  return g;
}

// Gaussian smoothing of each per-step gradient map, the covariance metric
// that turns differentials into update directions. sigma = 0 is the identity.
inline std::vector<Mask> smooth_gradient(std::vector<Mask> gradients, double sigma_metric) {
  if (sigma_metric < 0.0) throw value_error("smooth_gradient: sigma must be nonnegative");
  if (sigma_metric == 0.0) return gradients;
  for (Mask& g : gradients) g = gaussian_blur(g, sigma_metric);
  return gradients;
}

// Integrated gradients: the trapezoid average over the affine interpolation
// path of the channel-contracted classifier gradient, oriented so that high
// values mark salient (retained) pixels, i.e. the contraction runs against
// (input - baseline). The spatial sum of the returned map approximates
// F(input) - F(baseline).
inline SaliencyMap integrated_gradients(const Classifier& model, const Image& input,
                                        const Image& baseline, int target_class, int steps) {
  if (steps < 2) throw value_error("integrated_gradients: need at least 2 steps");
  const AblationPath lin = linear_path(input.domain, steps);
  const std::vector<Mask> g = path_step_gradients(lin, model, input, baseline, target_class);
  SaliencyMap map(input.domain);
  const double dt = lin.dt();
  for (int k = 0; k < steps; ++k) {
    const double w = (k == 0 || k == steps - 1) ? 0.5 * dt : dt;
    for (size_t p = 0; p < map.values.size(); ++p) map.values[p] -= w * g[k].values[p];
  }
  return map;
}

}  // namespace ablate
