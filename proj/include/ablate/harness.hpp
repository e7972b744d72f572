#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ablate/corpus.hpp"
#include "ablate/optimizer.hpp"
#include "ablate/reduction.hpp"

namespace ablate {

struct BaselineSpec {
  enum class Kind { blur, constant, image };
  Kind kind = Kind::blur;
  double sigma = 4.0;
  double value = 0.0;
  std::string image_file;  // resolved lazily for Kind::image

  // "blur:SIGMA", "const:VALUE", or a path to an image file.
  static BaselineSpec parse(const std::string& s) {
    BaselineSpec spec;
    if (s.rfind("blur:", 0) == 0) {
      spec.kind = Kind::blur;
      spec.sigma = std::stod(s.substr(5));
    } else if (s.rfind("const:", 0) == 0) {
      spec.kind = Kind::constant;
      spec.value = std::stod(s.substr(6));
    } else {
      spec.kind = Kind::image;
      spec.image_file = s;
    }
    return spec;
  }

  std::string describe() const {
    switch (kind) {
      case Kind::blur: return "blur:" + std::to_string(sigma);
      case Kind::constant: return "const:" + std::to_string(value);
      case Kind::image: return image_file;
    }
    return "?";
  }
};

enum class Reduction { average, class_transition, contrastive_average };

inline const char* to_string(Reduction r) {
  switch (r) {
    case Reduction::average: return "average";
    case Reduction::class_transition: return "class-transition";
    case Reduction::contrastive_average: return "contrastive-average";
  }
  return "?";
}

inline Reduction reduction_from_string(const std::string& s) {
  if (s == "average") return Reduction::average;
  if (s == "class-transition") return Reduction::class_transition;
  if (s == "contrastive-average") return Reduction::contrastive_average;
  throw value_error("unknown reduction '" + s + "'");
}

// One saliency pipeline configuration, i.e. one row of a comparison table.
struct MethodConfig {
  enum class Kind { ablation_path, integrated_gradients, center, linear_path };
  std::string name = "ablation-path";
  Kind kind = Kind::ablation_path;
  OptimizerConfig opt;
  int ig_steps = 64;
  Reduction reduction = Reduction::contrastive_average;
  bool window = false;
  BaselineSpec baseline;
};

struct SampleOutcome {
  int index = 0;
  int label = 0;
  bool difficult = false;
  bool hit = false;
  int argmax_row = -1;
  int argmax_col = -1;
  double score = std::numeric_limits<double>::quiet_NaN();  // path score, if any
  bool tie = false;
  bool fallback = false;
  bool assumption_violated = false;  // F(input) not ~1 or F(baseline) not ~0 for the target
  std::string error;                 // nonempty => recorded as a miss
};

struct PointingResult {
  std::string method_name;
  std::vector<SampleOutcome> samples;
  int total = 0;
  int hits = 0;
  int difficult_total = 0;
  int difficult_hits = 0;
  double all_pct = 0.0;
  double diff_pct = 0.0;
};

namespace detail {

// Bounded worker pool over indexed tasks; results land in per-index slots so
// aggregation stays order-independent and deterministic.
template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (std::thread& t : pool) t.join();
}

struct PipelineOutput {
  SaliencyMap map;
  double score = std::numeric_limits<double>::quiet_NaN();
  bool fallback = false;
};

inline PipelineOutput run_method(const MethodConfig& method, const Classifier& model,
                                 const Image& input, const Image& baseline, int target) {
  PipelineOutput out;
  switch (method.kind) {
    case MethodConfig::Kind::ablation_path: {
      const OptimizationTrace trace = optimize(model, input, baseline, target, method.opt);
      out.score = trace.final_score;
      if (method.opt.objective == Objective::straddle) {
        if (method.reduction == Reduction::contrastive_average)
          out.map = reduce_contrastive_average(trace.final_path, *trace.final_path_diss);
        else if (method.reduction == Reduction::average)
          out.map = reduce_average(trace.final_path);
        else {
          ClassTransitionReport rep;
          out.map = reduce_class_transition(trace.final_path, model, input, baseline, target, &rep);
          out.fallback = rep.fallback;
        }
      } else {
        if (method.reduction == Reduction::contrastive_average)
          throw value_error("contrastive-average reduction needs the straddle objective");
        if (method.reduction == Reduction::average)
          out.map = reduce_average(trace.final_path);
        else {
          ClassTransitionReport rep;
          out.map = reduce_class_transition(trace.final_path, model, input, baseline, target, &rep);
          out.fallback = rep.fallback;
        }
      }
      break;
    }
    case MethodConfig::Kind::integrated_gradients:
      out.map = integrated_gradients(model, input, baseline, target, method.ig_steps);
      break;
    case MethodConfig::Kind::center: {
      out.map = SaliencyMap(input.domain, 0.0);
      out.map.at(input.domain.height / 2, input.domain.width / 2) = 1.0;
      break;
    }
    case MethodConfig::Kind::linear_path: {
      const AblationPath lin = linear_path(input.domain, method.opt.time_samples);
      if (method.reduction == Reduction::contrastive_average)
        out.map = reduce_contrastive_average(lin, lin);
      else if (method.reduction == Reduction::average)
        out.map = reduce_average(lin);
      else {
        ClassTransitionReport rep;
        out.map = reduce_class_transition(lin, model, input, baseline, target, &rep);
        out.fallback = rep.fallback;
      }
      break;
    }
  }
  if (method.window) out.map = apply_boundary_window(out.map);
  return out;
}

inline void aggregate(PointingResult& result) {
  result.total = static_cast<int>(result.samples.size());
  result.hits = result.difficult_total = result.difficult_hits = 0;
  for (const SampleOutcome& s : result.samples) {
    result.hits += s.hit ? 1 : 0;
    if (s.difficult) {
      ++result.difficult_total;
      result.difficult_hits += s.hit ? 1 : 0;
    }
  }
  result.all_pct = result.total ? 100.0 * result.hits / result.total : 0.0;
  result.diff_pct =
      result.difficult_total ? 100.0 * result.difficult_hits / result.difficult_total : 0.0;
}

}  // namespace detail

// Evaluate any saliency producer against the corpus annotations: a hit means
// the heatmap argmax falls inside the sample's box (strict membership).
using SaliencyFn =
    std::function<detail::PipelineOutput(const AnnotatedSample&, const Classifier&)>;

inline PointingResult pointing_game_custom(const std::vector<AnnotatedSample>& corpus,
                                           const Classifier& model, const SaliencyFn& saliency,
                                           const std::string& name, int workers = 1) {
  PointingResult result;
  result.method_name = name;
  result.samples.assign(corpus.size(), SampleOutcome{});
  detail::parallel_for(static_cast<int>(corpus.size()), workers, [&](int i) {
    const AnnotatedSample& sample = corpus[i];
    SampleOutcome& out = result.samples[i];
    out.index = i;
    out.label = sample.label;
    out.difficult = sample.difficult;
    try {
      const detail::PipelineOutput pipe = saliency(sample, model);
      const ArgmaxPoint am = argmax_point(pipe.map);
      out.argmax_row = am.row;
      out.argmax_col = am.col;
      out.tie = am.tie;
      out.fallback = pipe.fallback;
      out.score = pipe.score;
      out.hit = sample.box_contains(am.row, am.col);
    } catch (const std::exception& e) {
      out.error = e.what();  // individual failures count as misses
      out.hit = false;
    }
  });
  detail::aggregate(result);
  return result;
}

// The standard pipeline: baseline construction, the configured method, the
// configured reduction, optional boundary window. The target class is the
// sample's label. Samples whose input/baseline probabilities contradict the
// one-vs-rest assumption (F(input) >= 0.5 > F(baseline)) are flagged, never
// dropped.
inline PointingResult pointing_game(const std::vector<AnnotatedSample>& corpus,
                                    const Classifier& model, const MethodConfig& method,
                                    int workers = 1) {
  std::optional<Image> shared_baseline;
  if (method.baseline.kind == BaselineSpec::Kind::image)
    shared_baseline = read_fgrid_image(method.baseline.image_file);
  const auto baseline_for = [&](const AnnotatedSample& sample) -> Image {
    switch (method.baseline.kind) {
      case BaselineSpec::Kind::blur: return make_blur_baseline(sample.image, method.baseline.sigma);
      case BaselineSpec::Kind::constant:
        return Image(sample.image.domain, sample.image.channels, method.baseline.value);
      case BaselineSpec::Kind::image: return *shared_baseline;
    }
    throw value_error("pointing_game: bad baseline kind");
  };

  PointingResult result = pointing_game_custom(
      corpus, model,
      [&method, &baseline_for](const AnnotatedSample& sample, const Classifier& m) {
        return detail::run_method(method, m, sample.image, baseline_for(sample), sample.label);
      },
      method.name, workers);
  for (SampleOutcome& out : result.samples) {
    if (!out.error.empty()) continue;
    const AnnotatedSample& sample = corpus[out.index];
    const double f_input = model.evaluate(sample.image)[sample.label];
    const double f_baseline = model.evaluate(baseline_for(sample))[sample.label];
    out.assumption_violated = f_input < 0.5 || f_baseline > 0.5;
  }
  detail::aggregate(result);
  return result;
}

inline nlohmann::json to_json(const PointingResult& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const SampleOutcome& s : r.samples) {
    nlohmann::json j{{"index", s.index},
                     {"label", s.label},
                     {"difficult", s.difficult},
                     {"hit", s.hit},
                     {"argmax", {s.argmax_row, s.argmax_col}},
                     {"tie", s.tie},
                     {"fallback", s.fallback},
                     {"assumption_violated", s.assumption_violated}};
    if (!std::isnan(s.score)) j["score"] = s.score;
    if (!s.error.empty()) j["error"] = s.error;
    samples.push_back(std::move(j));
  }
  return {{"method", r.method_name}, {"total", r.total},
          {"hits", r.hits},          {"all_pct", r.all_pct},
          {"difficult_total", r.difficult_total}, {"difficult_hits", r.difficult_hits},
          {"diff_pct", r.diff_pct},  {"samples", std::move(samples)}};
}

inline void write_samples_csv(const std::string& path, const PointingResult& r) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_samples_csv: cannot open '" + path + "'");
  f << "index,label,difficult,hit,argmax_row,argmax_col,score,tie,fallback,assumption_violated,"
       "error\n";
  for (const SampleOutcome& s : r.samples) {
    f << s.index << ',' << s.label << ',' << (s.difficult ? 1 : 0) << ',' << (s.hit ? 1 : 0)
      << ',' << s.argmax_row << ',' << s.argmax_col << ',';
    if (!std::isnan(s.score)) f << s.score;
    f << ',' << (s.tie ? 1 : 0) << ',' << (s.fallback ? 1 : 0) << ','
      << (s.assumption_violated ? 1 : 0) << ',' << s.error << '\n';
  }
}

// Histogram bins are fixed over [0,2] so score distributions from different
// sweeps line up; the top quarter (score >= 1.5) is the "top bins" region
// used by the adversarial-population diagnostic.
constexpr int kSweepHistogramBins = 20;
constexpr double kSweepScoreRange = 2.0;
constexpr double kSweepTopBinThreshold = 1.5;

struct SweepRecord {
  double sigma = 0.0;
  std::vector<int> histogram = std::vector<int>(kSweepHistogramBins, 0);
  int runs = 0;
  double all_pct = 0.0;
  double diff_pct = 0.0;
  double runtime_seconds = 0.0;  // kept in memory only; reports omit it

  double top_bin_mass() const {
    int top = 0, total = 0;
    for (int b = 0; b < kSweepHistogramBins; ++b) {
      total += histogram[b];
      if ((b * kSweepScoreRange) / kSweepHistogramBins >= kSweepTopBinThreshold)
        top += histogram[b];
    }
    return total ? static_cast<double>(top) / total : 0.0;
  }
};

// One pointing-game run per regularisation width, collecting the path-score
// histogram alongside the pointing percentages.
inline std::vector<SweepRecord> sweep_regularisation(const std::vector<AnnotatedSample>& corpus,
                                                     const Classifier& model,
                                                     const std::vector<double>& sigmas,
                                                     const MethodConfig& base_method,
                                                     int workers = 1) {
  if (sigmas.empty()) throw value_error("sweep_regularisation: sigma list is empty");
  std::vector<SweepRecord> records;
  records.reserve(sigmas.size());
  for (double sigma : sigmas) {
    MethodConfig method = base_method;
    method.kind = MethodConfig::Kind::ablation_path;
    method.opt.sigma_regu_blur = sigma;
    const auto start = std::chrono::steady_clock::now();
    const PointingResult pr = pointing_game(corpus, model, method, workers);
    SweepRecord rec;
    rec.sigma = sigma;
    rec.all_pct = pr.all_pct;
    rec.diff_pct = pr.diff_pct;
    for (const SampleOutcome& s : pr.samples) {
      if (std::isnan(s.score)) continue;
      int bin = static_cast<int>(s.score / kSweepScoreRange * kSweepHistogramBins);
      bin = std::max(0, std::min(kSweepHistogramBins - 1, bin));
      ++rec.histogram[bin];
      ++rec.runs;
    }
    rec.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    records.push_back(std::move(rec));
  }
  return records;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("write_sweep_csv: cannot open '" + path + "'");
  f << "sigma,runs,all_pct,diff_pct,top_bin_mass";
  for (int b = 0; b < kSweepHistogramBins; ++b)
    f << ",bin" << b;
  f << '\n';
  for (const SweepRecord& r : records) {
    f << r.sigma << ',' << r.runs << ',' << r.all_pct << ',' << r.diff_pct << ','
      << r.top_bin_mass();
    for (int b = 0; b < kSweepHistogramBins; ++b) f << ',' << r.histogram[b];
    f << '\n';
  }
}

// Parse one manifest row into a MethodConfig. Unknown keys are rejected so
// typos in manifests fail loudly.
inline MethodConfig method_from_json(const nlohmann::json& row) {
  MethodConfig m;
  for (const auto& [key, val] : row.items()) {
    if (key == "name") m.name = val.get<std::string>();
    else if (key == "method") {
      const std::string s = val.get<std::string>();
      if (s == "ablation-path") m.kind = MethodConfig::Kind::ablation_path;
      else if (s == "ig") m.kind = MethodConfig::Kind::integrated_gradients;
      else if (s == "center") m.kind = MethodConfig::Kind::center;
      else if (s == "linear") m.kind = MethodConfig::Kind::linear_path;
      else throw value_error("manifest: unknown method '" + s + "'");
    } else if (key == "objective") m.opt.objective = objective_from_string(val.get<std::string>());
    else if (key == "T") m.opt.time_samples = val.get<int>();
    else if (key == "max_steps") m.opt.max_steps = val.get<int>();
    else if (key == "step_linf") m.opt.step_linf = val.get<double>();
    else if (key == "sigma_regu_blur") m.opt.sigma_regu_blur = val.get<double>();
    else if (key == "zeta_sat") m.opt.zeta_sat = val.get<double>();
    else if (key == "zeta_pinch") m.opt.zeta_pinch = val.get<double>();
    else if (key == "saturation_stop") m.opt.saturation_stop = val.get<double>();
    else if (key == "seed") m.opt.seed = val.get<uint64_t>();
    else if (key == "ig_steps") m.ig_steps = val.get<int>();
    else if (key == "reduction") m.reduction = reduction_from_string(val.get<std::string>());
    else if (key == "window") m.window = val.get<bool>();
    else if (key == "baseline") m.baseline = BaselineSpec::parse(val.get<std::string>());
    else throw value_error("manifest: unknown key '" + key + "'");
  }
  if (m.name.empty()) m.name = "row";
  return m;
}

// Run every manifest row, write one result JSON and one sample CSV per row
// plus a Markdown summary table. Returns the results in row order.
inline std::vector<PointingResult> run_suite(const nlohmann::json& manifest,
                                             const std::vector<AnnotatedSample>& corpus,
                                             const Classifier& model,
                                             const std::string& output_dir, int workers = 1) {
  std::filesystem::create_directories(output_dir);
  std::vector<PointingResult> results;
  std::vector<MethodConfig> methods;
  if (manifest.contains("rows"))
    for (const auto& row : manifest.at("rows")) methods.push_back(method_from_json(row));

  for (size_t i = 0; i < methods.size(); ++i) {
    const PointingResult pr = pointing_game(corpus, model, methods[i], workers);
    const std::string stem =
        output_dir + "/row" + std::to_string(i) + "_" + methods[i].name;
    std::ofstream jf(stem + ".json", std::ios::binary);
    jf << to_json(pr).dump(2) << '\n';
    write_samples_csv(stem + ".csv", pr);
    results.push_back(pr);
  }

  char line[256];
  std::ofstream md(output_dir + "/summary.md", std::ios::binary);
  md << "| method | objective | zeta_sat | sigma_regu_blur | postproc | All% | Diff% |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (size_t i = 0; i < methods.size(); ++i) {
    const MethodConfig& m = methods[i];
    const bool is_path = m.kind == MethodConfig::Kind::ablation_path;
    std::snprintf(line, sizeof(line), "| %s | %s | %s | %s | %s | %.1f | %.1f |\n",
                  m.name.c_str(), is_path ? to_string(m.opt.objective) : "",
                  is_path ? std::to_string(m.opt.zeta_sat).c_str() : "",
                  is_path ? std::to_string(m.opt.sigma_regu_blur).c_str() : "",
                  m.window ? "window" : "", results[i].all_pct, results[i].diff_pct);
    md << line;
  }
  return results;
}

}  // namespace ablate
