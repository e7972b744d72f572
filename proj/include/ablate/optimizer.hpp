#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ablate/constraints.hpp"
#include "ablate/scores.hpp"

namespace ablate {

struct OptimizerConfig {
  Objective objective = Objective::retain;
  int time_samples = 20;        // T
  int max_steps = 50;
  double step_linf = 0.7;       // target max |change| per pixel and step
  double sigma_regu_blur = 1.0; // mask regularisation and gradient metric, in px
  double zeta_sat = 0.8;        // saturation strength, 0 = off
  double zeta_pinch = 0.2;      // pinching strength (straddle only), 0 = off
  double saturation_stop = 0.05;
  uint64_t seed = 0;            // recorded in outputs; the engine itself is deterministic
  int snapshot_every = 0;       // 0 = no snapshots

  void check() const {
    if (time_samples < 3) throw value_error("OptimizerConfig: T must be at least 3");
    if (max_steps < 1) throw value_error("OptimizerConfig: max_steps must be at least 1");
    if (!(step_linf > 0.0 && step_linf <= 1.0))
      throw value_error("OptimizerConfig: step_linf must lie in (0,1]");
    if (zeta_sat < 0.0) throw value_error("OptimizerConfig: zeta_sat must be nonnegative");
    if (zeta_pinch < 0.0 || zeta_pinch >= 1.0)
      throw value_error("OptimizerConfig: zeta_pinch must lie in [0,1)");
    if (!(saturation_stop > 0.0 && saturation_stop < 0.5))
      throw value_error("OptimizerConfig: saturation_stop must lie in (0,0.5)");
    if (sigma_regu_blur < 0.0)
      throw value_error("OptimizerConfig: sigma_regu_blur must be nonnegative");
  }
};

inline nlohmann::json to_json(const OptimizerConfig& c) {
  return {{"objective", to_string(c.objective)}, {"T", c.time_samples},
          {"max_steps", c.max_steps},           {"step_linf", c.step_linf},
          {"sigma_regu_blur", c.sigma_regu_blur}, {"zeta_sat", c.zeta_sat},
          {"zeta_pinch", c.zeta_pinch},         {"saturation_stop", c.saturation_stop},
          {"seed", c.seed},                     {"snapshot_every", c.snapshot_every}};
}

// Pointwise sigmoidal soft projection toward saturated masks. 0, 1/2 and 1
// are fixpoints; zeta = 0 is the identity; monotone in phi, so per-pixel path
// monotonicity survives.
inline double saturate_value(double phi, double zeta_sat) {
  if (zeta_sat == 0.0) return phi;
  return 0.5 * (std::tanh((phi * 2.0 - 1.0) * zeta_sat) / std::tanh(zeta_sat) + 1.0);
}

// Interior masks pushed toward {0,1}; the pinned endpoint masks are fixpoints
// anyway and stay untouched.
inline AblationPath saturate(const AblationPath& path, double zeta_sat) {
  if (zeta_sat < 0.0) throw value_error("saturate: zeta_sat must be nonnegative");
  AblationPath out = path;
  for (int k = 1; k + 1 < out.time_samples(); ++k)
    for (double& v : out.masks[k].values) v = saturate_value(v, zeta_sat);
  return out;
}

// Pointwise pinching map on the difference delta = phi_diss - phi_ret:
// attractive fixpoint at 0 squelches unsubstantial contrasts, repulsive
// fixpoint at 1 lets strongly salient features stay apart.
inline double pinch_value(double delta, double zeta_pinch) {
  return delta * (1.0 - zeta_pinch) + delta * delta * zeta_pinch;
}

// Pull the dissipating path toward the retaining one; the retaining path is
// never modified. Results are clamped to [0,1].
inline AblationPath pinch(const AblationPath& path_ret, const AblationPath& path_diss,
                          double zeta_pinch) {
  if (path_ret.time_samples() != path_diss.time_samples() ||
      !(path_ret.domain == path_diss.domain))
    throw value_error("pinch: the two paths must share grid and time sampling");
  if (zeta_pinch < 0.0 || zeta_pinch >= 1.0)
    throw value_error("pinch: zeta_pinch must lie in [0,1)");
  AblationPath out = path_diss;
  for (int k = 0; k < out.time_samples(); ++k)
    for (size_t p = 0; p < out.masks[k].values.size(); ++p) {
      const double ret = path_ret.masks[k].values[p];
      const double v = ret + pinch_value(path_diss.masks[k].values[p] - ret, zeta_pinch);
      out.masks[k].values[p] = std::min(1.0, std::max(0.0, v));
    }
  return out;
}

// Spatial low-pass on every interior mask; the constant endpoint masks are
// untouched. sigma = 0 is the identity.
inline AblationPath regularise(const AblationPath& path, double sigma_regu_blur) {
  if (sigma_regu_blur < 0.0) throw value_error("regularise: sigma must be nonnegative");
  if (sigma_regu_blur == 0.0) return path;
  AblationPath out = path;
  for (int k = 1; k + 1 < out.time_samples(); ++k)
    out.masks[k] = gaussian_blur(out.masks[k], sigma_regu_blur);
  return out;
}

struct IterationStats {
  double score = 0.0;       // objective score at the start of the iteration
  double linf_step = 0.0;   // largest |pixel change| applied, before projection
  double saturation = 0.0;  // mean min(phi, 1-phi) after projection
  double grad_mean_abs = 0.0;            // worst |spatial mean| of the applied gradients
  double pre_projection_monotonicity = 0.0;  // worst drop before projection
  double pre_projection_mass_deviation = 0.0;
  double post_projection_residual = 0.0;  // worst admissibility violation after projection
};

struct OptimizationTrace {
  OptimizerConfig config;
  std::vector<IterationStats> iterations;
  double initial_score = 0.0;
  double final_score = 0.0;
  AblationPath final_path;                        // retaining path (or the single path)
  std::optional<AblationPath> final_path_diss;    // straddle only
  std::vector<AblationPath> snapshots;            // every snapshot_every iterations
  std::string warning;
  bool stopped_by_saturation = false;
};

inline nlohmann::json to_json(const OptimizationTrace& t) {
  nlohmann::json iters = nlohmann::json::array();
  for (const IterationStats& s : t.iterations)
    iters.push_back({{"score", s.score},
                     {"linf_step", s.linf_step},
                     {"saturation", s.saturation},
                     {"grad_mean_abs", s.grad_mean_abs},
                     {"pre_projection_monotonicity", s.pre_projection_monotonicity},
                     {"pre_projection_mass_deviation", s.pre_projection_mass_deviation},
                     {"post_projection_residual", s.post_projection_residual}});
  nlohmann::json j;
  j["config"] = to_json(t.config);
  j["iterations"] = iters;
  j["initial_score"] = t.initial_score;
  j["final_score"] = t.final_score;
  j["stopped_by_saturation"] = t.stopped_by_saturation;
  if (!t.warning.empty()) j["warning"] = t.warning;
  return j;
}

// Descent aborted on a non-finite score or gradient; the partial trace rides
// along for diagnosis.
class optimization_error : public std::runtime_error {
 public:
  optimization_error(const std::string& what, OptimizationTrace trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  OptimizationTrace trace;
};

namespace detail {

inline double mean_saturation(const std::vector<const AblationPath*>& paths) {
  double acc = 0.0;
  size_t count = 0;
  for (const AblationPath* path : paths)
    for (const Mask& m : path->masks) {
      for (double v : m.values) acc += std::min(v, 1.0 - v);
      count += m.values.size();
    }
  return acc / static_cast<double>(count);
}

// Zero-mean projection per time step keeps the update from changing mask
// mass; Gaussian smoothing then acts as the gradient metric.
inline void project_and_smooth(std::vector<Mask>& grads, double sigma, double& worst_mean_abs) {
  for (Mask& g : grads) {
    const double mean = mask_mean(g);
    for (double& v : g.values) v -= mean;
  }
  if (sigma > 0.0)
    for (Mask& g : grads) g = gaussian_blur(g, sigma);
  for (const Mask& g : grads) worst_mean_abs = std::max(worst_mean_abs, std::abs(mask_mean(g)));
}

inline void pre_projection_residuals(const AblationPath& path, IterationStats& stats) {
  for (int k = 0; k + 1 < path.time_samples(); ++k)
    for (size_t p = 0; p < path.masks[k].values.size(); ++p)
      stats.pre_projection_monotonicity =
          std::max(stats.pre_projection_monotonicity,
                   path.masks[k].values[p] - path.masks[k + 1].values[p]);
  for (int k = 0; k < path.time_samples(); ++k)
    stats.pre_projection_mass_deviation =
        std::max(stats.pre_projection_mass_deviation,
                 std::abs(mask_mean(path.masks[k]) - path.time_at(k)));
}

inline double post_projection_residual(const AblationPath& path) {
  double worst = 0.0;
  for (const PathViolation& v : validate_path(path, 0.0)) worst = std::max(worst, v.magnitude);
  return worst;
}

}  // namespace detail

// Projected gradient ascent over the admissible path set. Starts from the
// affine interpolation path and repeats: per-objective differential,
// zero-mean projection, Gaussian metric smoothing, an L-infinity-normalized
// update, mask regularisation, saturation, pinching (straddle), and the hard
// projection back onto the admissible set. Stops once the masks are
// sufficiently saturated or the step budget runs out.
inline OptimizationTrace optimize(const Classifier& model, const Image& input,
                                  const Image& baseline, int target_class,
                                  const OptimizerConfig& config) {
  config.check();
  if (!input.same_shape(baseline)) throw value_error("optimize: input/baseline shape mismatch");
  const bool straddle = config.objective == Objective::straddle;

  OptimizationTrace trace;
  trace.config = config;

  AblationPath path_a = linear_path(input.domain, config.time_samples);
  AblationPath path_b = straddle ? path_a : AblationPath();

  const auto objective_score = [&](const AblationPath& a, const AblationPath& b) -> double {
    switch (config.objective) {
      case Objective::retain: return score_retain(a, model, input, baseline, target_class).score;
      case Objective::dissipate:
        return score_dissipate(a, model, input, baseline, target_class).score;
      case Objective::contrastive:
        return score_contrastive(a, model, input, baseline, target_class).score;
      case Objective::straddle:
        return score_straddle(a, b, model, input, baseline, target_class).score;
    }
    return 0.0;
  };

  double span = 0.0;
  for (size_t i = 0; i < input.values.size(); ++i)
    span = std::max(span, std::abs(baseline.values[i] - input.values[i]));
  if (span == 0.0) {
    trace.warning = "input equals baseline; differential vanishes, returning the linear path";
    trace.initial_score = trace.final_score = objective_score(path_a, path_b);
    trace.final_path = path_a;
    if (straddle) trace.final_path_diss = path_b;
    return trace;
  }

  trace.initial_score = objective_score(path_a, path_b);

  for (int iter = 0; iter < config.max_steps; ++iter) {
    std::vector<const AblationPath*> state{&path_a};
    if (straddle) state.push_back(&path_b);
    if (detail::mean_saturation(state) < config.saturation_stop) {
      trace.stopped_by_saturation = true;
      break;
    }

    IterationStats stats;
    stats.score = objective_score(path_a, path_b);
    if (!std::isfinite(stats.score)) {
      trace.final_path = path_a;
      if (straddle) trace.final_path_diss = path_b;
      throw optimization_error("optimize: non-finite score at iteration " + std::to_string(iter),
                               std::move(trace));
    }

    // Objective-specific update directions (ascending each sub-score).
    std::vector<Mask> grad_a, grad_b;
    switch (config.objective) {
      case Objective::retain:
        grad_a = path_differential(path_a, model, input, baseline, target_class,
                                   GradientSign::ascend_F);
        break;
      case Objective::dissipate:
        grad_a = path_differential(path_a, model, input, baseline, target_class,
                                   GradientSign::descend_F);
        break;
      case Objective::contrastive: {
        grad_a = path_differential(path_a, model, input, baseline, target_class,
                                   GradientSign::ascend_F);
        const std::vector<Mask> rev =
            path_differential(detail::complement_path(path_a), model, input, baseline,
                              target_class, GradientSign::ascend_F);
        for (size_t k = 0; k < grad_a.size(); ++k)
          for (size_t p = 0; p < grad_a[k].values.size(); ++p)
            grad_a[k].values[p] += rev[k].values[p];
        break;
      }
      case Objective::straddle:
        grad_a = path_differential(path_a, model, input, baseline, target_class,
                                   GradientSign::ascend_F);
        grad_b = path_differential(path_b, model, input, baseline, target_class,
                                   GradientSign::descend_F);
        break;
    }

    detail::project_and_smooth(grad_a, config.sigma_regu_blur, stats.grad_mean_abs);
    if (straddle) detail::project_and_smooth(grad_b, config.sigma_regu_blur, stats.grad_mean_abs);

    double gmax = 0.0;
    for (const std::vector<Mask>* grads : {&grad_a, &grad_b})
      for (const Mask& g : *grads)
        for (double v : g.values) gmax = std::max(gmax, std::abs(v));
    if (!std::isfinite(gmax)) {
      trace.final_path = path_a;
      if (straddle) trace.final_path_diss = path_b;
      throw optimization_error("optimize: non-finite gradient at iteration " + std::to_string(iter),
                               std::move(trace));
    }

    // Below the noise floor the direction is numerical residue of the
    // zero-mean projection, not signal; take no step.
    const double gamma = gmax > 1e-12 ? config.step_linf / gmax : 0.0;
    stats.linf_step = gamma * gmax;
    const auto apply = [gamma](AblationPath& path, const std::vector<Mask>& grads) {
      for (int k = 0; k < path.time_samples(); ++k)
        for (size_t p = 0; p < path.masks[k].values.size(); ++p)
          path.masks[k].values[p] += gamma * grads[k].values[p];
    };
    apply(path_a, grad_a);
    if (straddle) apply(path_b, grad_b);

    path_a = saturate(regularise(path_a, config.sigma_regu_blur), config.zeta_sat);
    if (straddle) {
      path_b = saturate(regularise(path_b, config.sigma_regu_blur), config.zeta_sat);
      path_b = pinch(path_a, path_b, config.zeta_pinch);
    }

    detail::pre_projection_residuals(path_a, stats);
    if (straddle) detail::pre_projection_residuals(path_b, stats);

    path_a = project_admissible(path_a);
    if (straddle) path_b = project_admissible(path_b);

    stats.post_projection_residual = detail::post_projection_residual(path_a);
    if (straddle)
      stats.post_projection_residual =
          std::max(stats.post_projection_residual, detail::post_projection_residual(path_b));

    std::vector<const AblationPath*> post{&path_a};
    if (straddle) post.push_back(&path_b);
    stats.saturation = detail::mean_saturation(post);

    trace.iterations.push_back(stats);
    if (config.snapshot_every > 0 && (iter + 1) % config.snapshot_every == 0)
      trace.snapshots.push_back(path_a);

    if (gamma == 0.0) break;  // vanished gradient, nothing further to do
  }

  trace.final_score = objective_score(path_a, path_b);
  if (!std::isfinite(trace.final_score)) {
    trace.final_path = path_a;
    if (straddle) trace.final_path_diss = path_b;
    throw optimization_error("optimize: non-finite final score", std::move(trace));
  }
  trace.final_path = std::move(path_a);
  if (straddle) trace.final_path_diss = std::move(path_b);
  return trace;
}

}  // namespace ablate
