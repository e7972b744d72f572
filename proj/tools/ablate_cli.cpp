// ablate: ablation-path saliency toolkit.
//
// Subcommands: gen-corpus, train, optimize, reduce, ig, pointing, sweep.
// Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 optimization or
// training abort. Every run echoes its effective configuration into the
// output directory; all outputs are deterministic given --seed (wall-clock
// timings go to a separate timings.txt).

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ablate/harness.hpp"
#include "ablate/io.hpp"
#include "ablate/png.hpp"
#include "ablate/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_workers = std::max(1u, std::thread::hardware_concurrency());
uint64_t g_seed = 0;

ablate::Image load_image(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".png")
    return ablate::read_png_image(path);
  return ablate::read_fgrid_image(path);
}

ablate::Image resolve_baseline(const ablate::BaselineSpec& spec, const ablate::Image& input) {
  switch (spec.kind) {
    case ablate::BaselineSpec::Kind::blur:
      return ablate::make_blur_baseline(input, spec.sigma);
    case ablate::BaselineSpec::Kind::constant:
      return ablate::Image(input.domain, input.channels, spec.value);
    case ablate::BaselineSpec::Kind::image:
      return load_image(spec.image_file);
  }
  throw ablate::value_error("bad baseline spec");
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ablate::io_error("cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
}

void echo_config(const std::string& output_dir, const json& effective) {
  write_json_file(output_dir + "/config_echo.json", effective);
}

std::vector<ablate::AnnotatedSample> load_corpus(const std::string& manifest_path) {
  const auto entries = ablate::read_corpus_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<ablate::AnnotatedSample> corpus;
  corpus.reserve(entries.size());
  for (const auto& e : entries) {
    ablate::AnnotatedSample s;
    const fs::path img = fs::path(e.image_file).is_absolute() ? fs::path(e.image_file)
                                                              : base / e.image_file;
    s.image = load_image(img.string());
    s.label = e.label;
    s.row0 = e.row0;
    s.col0 = e.col0;
    s.row1 = e.row1;
    s.col1 = e.col1;
    s.difficult = e.difficult;
    corpus.push_back(std::move(s));
  }
  return corpus;
}

// Filmstrip: evenly spaced interpolated images side by side, one-pixel
// separators.
void write_filmstrip(const std::string& path, const ablate::AblationPath& p,
                     const ablate::Image& input, const ablate::Image& baseline, int frames) {
  const int T = p.time_samples();
  frames = std::min(frames, T);
  const int h = input.domain.height, w = input.domain.width, ch = input.channels;
  const int total_w = frames * w + (frames - 1);
  ablate::Image strip(ablate::GridDomain(h, total_w), ch, 1.0);
  for (int f = 0; f < frames; ++f) {
    const int k = frames == 1 ? 0 : (f * (T - 1)) / (frames - 1);
    const ablate::Image frame = ablate::interpolate(p.masks[k], input, baseline);
    const int off = f * (w + 1);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (int d = 0; d < ch; ++d) strip.at(r, off + c, d) = frame.at(r, c, d);
  }
  ablate::write_png_image(path, strip);
}

json config_file_values(const std::string& config_path) {
  std::ifstream f(config_path, std::ios::binary);
  if (!f) throw ablate::io_error("cannot open config file '" + config_path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ablate::value_error("bad JSON in config file '" + config_path + "': " + e.what());
  }
  return j;
}

template <typename T>
void maybe(const json& cfg, const char* key, T& value) {
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

struct OptimizerFlags {
  std::string objective = "straddle";
  int T = 20;
  int max_steps = 50;
  double step_linf = 0.7;
  double sigma_regu_blur = 1.0;
  double zeta_sat = 0.8;
  double zeta_pinch = 0.2;
  double saturation_stop = 0.05;
  int snapshot_every = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--objective", objective, "retain|dissipate|contrastive|straddle")
        ->capture_default_str();
    cmd->add_option("--T", T, "time samples along the path")->capture_default_str();
    cmd->add_option("--max-steps", max_steps, "optimization step budget")->capture_default_str();
    cmd->add_option("--step-linf", step_linf, "target max pixel change per step")
        ->capture_default_str();
    cmd->add_option("--sigma-regu-blur", sigma_regu_blur,
                    "mask regularisation / gradient metric width in px")
        ->capture_default_str();
    cmd->add_option("--zeta-sat", zeta_sat, "saturation strength (0 disables)")
        ->capture_default_str();
    cmd->add_option("--zeta-pinch", zeta_pinch, "pinching strength (straddle only)")
        ->capture_default_str();
    cmd->add_option("--saturation-stop", saturation_stop,
                    "stop once mean min(phi,1-phi) drops below")
        ->capture_default_str();
    cmd->add_option("--snapshot-every", snapshot_every, "store path snapshots every N iterations")
        ->capture_default_str();
  }

  void apply_config(const json& cfg) {
    maybe(cfg, "objective", objective);
    maybe(cfg, "T", T);
    maybe(cfg, "max_steps", max_steps);
    maybe(cfg, "step_linf", step_linf);
    maybe(cfg, "sigma_regu_blur", sigma_regu_blur);
    maybe(cfg, "zeta_sat", zeta_sat);
    maybe(cfg, "zeta_pinch", zeta_pinch);
    maybe(cfg, "saturation_stop", saturation_stop);
    maybe(cfg, "snapshot_every", snapshot_every);
  }

  ablate::OptimizerConfig build() const {
    ablate::OptimizerConfig cfg;
    cfg.objective = ablate::objective_from_string(objective);
    cfg.time_samples = T;
    cfg.max_steps = max_steps;
    cfg.step_linf = step_linf;
    cfg.sigma_regu_blur = sigma_regu_blur;
    cfg.zeta_sat = zeta_sat;
    cfg.zeta_pinch = zeta_pinch;
    cfg.saturation_stop = saturation_stop;
    cfg.snapshot_every = snapshot_every;
    cfg.seed = g_seed;
    return cfg;
  }
};

void setup_gen_corpus(const json& cfg, CLI::App* cmd) {
  struct Params {
    int n = 100, height = 32, width = 32, classes = 3;
    bool png = false;
    std::string output_dir = "corpus_out";
  };
  auto p = std::make_shared<Params>();
  maybe(cfg, "n", p->n);
  maybe(cfg, "height", p->height);
  maybe(cfg, "width", p->width);
  maybe(cfg, "classes", p->classes);
  maybe(cfg, "png", p->png);
  maybe(cfg, "output_dir", p->output_dir);
  cmd->add_option("--n", p->n, "number of samples")->capture_default_str();
  cmd->add_option("--height", p->height)->capture_default_str();
  cmd->add_option("--width", p->width)->capture_default_str();
  cmd->add_option("--classes", p->classes, "shape families / class count (2..5)")
      ->capture_default_str();
  cmd->add_flag("--png", p->png, "also write PNG mirrors of every image");
  cmd->add_option("--output-dir,-o", p->output_dir)->capture_default_str();

  cmd->callback([p]() {
    const auto corpus =
        ablate::generate_blob_corpus(g_seed, p->n, p->height, p->width, p->classes);
    fs::create_directories(fs::path(p->output_dir) / "images");
    std::vector<std::string> files;
    files.reserve(corpus.size());
    char name[64];
    for (size_t i = 0; i < corpus.size(); ++i) {
      std::snprintf(name, sizeof(name), "images/sample_%05zu.fgrid", i);
      ablate::write_fgrid((fs::path(p->output_dir) / name).string(), corpus[i].image);
      files.push_back(name);
      if (p->png) {
        std::snprintf(name, sizeof(name), "images/sample_%05zu.png", i);
        ablate::write_png_image((fs::path(p->output_dir) / name).string(), corpus[i].image);
      }
    }
    ablate::write_corpus_manifest((fs::path(p->output_dir) / "manifest.jsonl").string(), files,
                                  corpus);
    echo_config(p->output_dir, json{{"command", "gen-corpus"},
                                    {"n", p->n},
                                    {"height", p->height},
                                    {"width", p->width},
                                    {"classes", p->classes},
                                    {"png", p->png},
                                    {"seed", g_seed},
                                    {"output_dir", p->output_dir}});
    std::cout << "wrote " << corpus.size() << " samples to " << p->output_dir << "\n";
  });
}

void setup_train(const json& cfg, CLI::App* cmd) {
  struct Params {
    std::string corpus_path, output_dir = "train_out";
    ablate::TrainConfig tc;
  };
  auto p = std::make_shared<Params>();
  maybe(cfg, "hidden_units", p->tc.hidden_units);
  maybe(cfg, "max_epochs", p->tc.max_epochs);
  maybe(cfg, "batch_size", p->tc.batch_size);
  maybe(cfg, "learning_rate", p->tc.learning_rate);
  maybe(cfg, "output_dir", p->output_dir);
  cmd->add_option("--corpus", p->corpus_path, "corpus manifest (JSONL)")->required();
  cmd->add_option("--hidden", p->tc.hidden_units, "hidden layer width")->capture_default_str();
  cmd->add_option("--epochs", p->tc.max_epochs, "epoch budget")->capture_default_str();
  cmd->add_option("--batch", p->tc.batch_size)->capture_default_str();
  cmd->add_option("--lr", p->tc.learning_rate)->capture_default_str();
  cmd->add_option("--lr-decay", p->tc.lr_decay)->capture_default_str();
  cmd->add_option("--target-acc", p->tc.target_accuracy,
                  "stop early at this validation accuracy")
      ->capture_default_str();
  cmd->add_option("--min-acc", p->tc.min_accuracy, "fail below this accuracy at budget end")
      ->capture_default_str();
  cmd->add_option("--val-fraction", p->tc.val_fraction)->capture_default_str();
  cmd->add_option("--output-dir,-o", p->output_dir)->capture_default_str();

  cmd->callback([p]() {
    p->tc.seed = g_seed;
    const auto corpus = load_corpus(p->corpus_path);
    const ablate::TrainResult result = ablate::train_reference_model(corpus, p->tc);
    fs::create_directories(p->output_dir);
    ablate::save_mlp(p->output_dir + "/model.apm", result.model);
    write_json_file(p->output_dir + "/train_report.json",
                    json{{"val_accuracy", result.val_accuracy},
                         {"epochs_run", result.epochs_run},
                         {"epoch_losses", result.epoch_losses}});
    echo_config(p->output_dir, json{{"command", "train"},
                                    {"corpus", p->corpus_path},
                                    {"hidden", p->tc.hidden_units},
                                    {"epochs", p->tc.max_epochs},
                                    {"batch", p->tc.batch_size},
                                    {"lr", p->tc.learning_rate},
                                    {"lr_decay", p->tc.lr_decay},
                                    {"target_acc", p->tc.target_accuracy},
                                    {"min_acc", p->tc.min_accuracy},
                                    {"val_fraction", p->tc.val_fraction},
                                    {"seed", g_seed},
                                    {"output_dir", p->output_dir}});
    std::cout << "validation accuracy " << result.val_accuracy << " after " << result.epochs_run
              << " epochs; model at " << p->output_dir << "/model.apm\n";
  });
}

void setup_optimize(const json& cfg, CLI::App* cmd) {
  struct Params {
    std::string model_path, input_path, baseline_str = "blur:4", output_dir = "optimize_out";
    int target_class = 0;
    OptimizerFlags flags;
  };
  auto p = std::make_shared<Params>();
  p->flags.apply_config(cfg);
  maybe(cfg, "baseline", p->baseline_str);
  maybe(cfg, "output_dir", p->output_dir);
  cmd->add_option("--model", p->model_path, "trained model file")->required();
  cmd->add_option("--input", p->input_path, "input image (.png or .fgrid)")->required();
  cmd->add_option("--baseline", p->baseline_str, "blur:SIGMA | const:VALUE | image file")
      ->capture_default_str();
  cmd->add_option("--target-class", p->target_class, "class whose probability is scored")
      ->required();
  p->flags.add_to(cmd);
  cmd->add_option("--output-dir,-o", p->output_dir)->capture_default_str();

  cmd->callback([p]() {
    const ablate::MlpClassifier model = ablate::load_mlp(p->model_path);
    const ablate::Image input = load_image(p->input_path);
    const ablate::BaselineSpec spec = ablate::BaselineSpec::parse(p->baseline_str);
    const ablate::Image baseline = resolve_baseline(spec, input);
    const ablate::OptimizerConfig ocfg = p->flags.build();

    const ablate::OptimizationTrace trace =
        ablate::optimize(model, input, baseline, p->target_class, ocfg);

    fs::create_directories(p->output_dir);
    ablate::write_fgrid(p->output_dir + "/baseline.fgrid", baseline);
    ablate::write_fgrid(p->output_dir + "/path.fgrid", trace.final_path);
    if (trace.final_path_diss)
      ablate::write_fgrid(p->output_dir + "/path_diss.fgrid", *trace.final_path_diss);
    for (size_t s = 0; s < trace.snapshots.size(); ++s) {
      char name[64];
      std::snprintf(name, sizeof(name), "/snapshot_%04zu.fgrid",
                    (s + 1) * static_cast<size_t>(ocfg.snapshot_every));
      ablate::write_fgrid(p->output_dir + name, trace.snapshots[s]);
    }
    write_json_file(p->output_dir + "/trace.json", ablate::to_json(trace));

    // Per-step target probabilities of the final path(s).
    const ablate::ScoreReport rep =
        ocfg.objective == ablate::Objective::straddle
            ? ablate::score_straddle(trace.final_path, *trace.final_path_diss, model, input,
                                     baseline, p->target_class)
            : ablate::score_retain(trace.final_path, model, input, baseline, p->target_class);
    std::ofstream csv(p->output_dir + "/per_step_F.csv", std::ios::binary);
    csv << (rep.per_step_F_secondary.empty() ? "k,t,F\n" : "k,t,F_ret,F_diss\n");
    for (size_t k = 0; k < rep.per_step_F.size(); ++k) {
      csv << k << ',' << trace.final_path.time_at(static_cast<int>(k)) << ','
          << rep.per_step_F[k];
      if (!rep.per_step_F_secondary.empty()) csv << ',' << rep.per_step_F_secondary[k];
      csv << '\n';
    }
    write_json_file(p->output_dir + "/score_report.json", ablate::to_json(rep));
    write_filmstrip(p->output_dir + "/filmstrip.png", trace.final_path, input, baseline, 8);

    json echo = {{"command", "optimize"},        {"model", p->model_path},
                 {"input", p->input_path},       {"baseline", p->baseline_str},
                 {"target_class", p->target_class}, {"output_dir", p->output_dir},
                 {"seed", g_seed}};
    echo["optimizer"] = ablate::to_json(ocfg);
    echo_config(p->output_dir, echo);
    if (!trace.warning.empty()) std::cerr << "warning: " << trace.warning << "\n";
    std::cout << "final score " << trace.final_score << " (initial " << trace.initial_score
              << ", " << trace.iterations.size() << " iterations)\n";
  });
}

void setup_reduce(const json& cfg, CLI::App* cmd) {
  struct Params {
    std::string path_file, path_diss_file, method = "average", model_path, input_path,
        baseline_str = "blur:4", output_dir = "reduce_out";
    bool window = false;
    int target_class = 0;
  };
  auto p = std::make_shared<Params>();
  maybe(cfg, "output_dir", p->output_dir);
  cmd->add_option("--path", p->path_file, "optimized path (.fgrid)")->required();
  cmd->add_option("--path-diss", p->path_diss_file,
                  "dissipating path (.fgrid), for contrastive-average");
  cmd->add_option("--method", p->method, "average | class-transition | contrastive-average")
      ->capture_default_str();
  cmd->add_flag("--window", p->window, "suppress boundaries with a separable Hann window");
  cmd->add_option("--model", p->model_path, "model file (class-transition only)");
  cmd->add_option("--input", p->input_path, "input image (class-transition only)");
  cmd->add_option("--baseline", p->baseline_str, "baseline spec (class-transition only)")
      ->capture_default_str();
  cmd->add_option("--target-class", p->target_class)->capture_default_str();
  cmd->add_option("--output-dir,-o", p->output_dir)->capture_default_str();

  cmd->callback([p]() {
    const ablate::AblationPath path = ablate::read_fgrid_path(p->path_file);
    const auto violations = ablate::validate_path(path, 1e-6);
    if (!violations.empty())
      throw ablate::value_error("path '" + p->path_file + "' fails admissibility (" +
                                std::to_string(violations.size()) + " violations, first: " +
                                ablate::to_string(violations.front().kind) + ")");
    const ablate::Reduction red = ablate::reduction_from_string(p->method);
    ablate::SaliencyMap map;
    json report{{"method", p->method}, {"orientation", ablate::SaliencyMap::orientation}};
    if (red == ablate::Reduction::contrastive_average) {
      if (p->path_diss_file.empty())
        throw ablate::value_error("contrastive-average needs --path-diss");
      const ablate::AblationPath diss = ablate::read_fgrid_path(p->path_diss_file);
      if (!ablate::validate_path(diss, 1e-6).empty())
        throw ablate::value_error("path '" + p->path_diss_file + "' fails admissibility");
      map = ablate::reduce_contrastive_average(path, diss);
    } else if (red == ablate::Reduction::average) {
      map = ablate::reduce_average(path);
    } else {
      if (p->model_path.empty() || p->input_path.empty())
        throw ablate::value_error("class-transition needs --model and --input");
      const ablate::MlpClassifier model = ablate::load_mlp(p->model_path);
      const ablate::Image input = load_image(p->input_path);
      const ablate::Image baseline =
          resolve_baseline(ablate::BaselineSpec::parse(p->baseline_str), input);
      ablate::ClassTransitionReport ct;
      map = ablate::reduce_class_transition(path, model, input, baseline, p->target_class, &ct);
      report["k_star"] = ct.k_star;
      report["rule"] = ct.fallback ? "argmax-fallback" : "dominant";
    }
    if (p->window) map = ablate::apply_boundary_window(map);
    const ablate::ArgmaxPoint am = ablate::argmax_point(map);
    report["argmax"] = {am.row, am.col};
    report["tie"] = am.tie;
    report["window"] = p->window;

    fs::create_directories(p->output_dir);
    ablate::write_fgrid_raw(p->output_dir + "/heatmap.fgrid", map.domain.height,
                            map.domain.width, 1, 1, map.values);
    ablate::write_png_rescaled(p->output_dir + "/heatmap.png", map.domain, map.values);
    write_json_file(p->output_dir + "/report.json", report);
    echo_config(p->output_dir, json{{"command", "reduce"},
                                    {"path", p->path_file},
                                    {"path_diss", p->path_diss_file},
                                    {"method", p->method},
                                    {"window", p->window},
                                    {"target_class", p->target_class},
                                    {"output_dir", p->output_dir}});
    std::cout << "argmax (" << am.row << "," << am.col << ")" << (am.tie ? " [tie]" : "")
              << "\n";
  });
}

void setup_ig(const json& cfg, CLI::App* cmd) {
  struct Params {
    std::string model_path, input_path, baseline_str = "blur:4", output_dir = "ig_out";
    int target_class = 0, steps = 256;
  };
  auto p = std::make_shared<Params>();
  maybe(cfg, "output_dir", p->output_dir);
  maybe(cfg, "steps", p->steps);
  cmd->add_option("--model", p->model_path)->required();
  cmd->add_option("--input", p->input_path)->required();
  cmd->add_option("--baseline", p->baseline_str)->capture_default_str();
  cmd->add_option("--target-class", p->target_class)->required();
  cmd->add_option("--steps", p->steps, "quadrature steps along the affine path")
      ->capture_default_str();
  cmd->add_option("--output-dir,-o", p->output_dir)->capture_default_str();

  cmd->callback([p]() {
    const ablate::MlpClassifier model = ablate::load_mlp(p->model_path);
    const ablate::Image input = load_image(p->input_path);
    const ablate::Image baseline =
        resolve_baseline(ablate::BaselineSpec::parse(p->baseline_str), input);
    const ablate::SaliencyMap map =
        ablate::integrated_gradients(model, input, baseline, p->target_class, p->steps);
    double sum = 0.0;
    for (double v : map.values) sum += v;
    const double f_in = model.evaluate(input)[p->target_class];
    const double f_base = model.evaluate(baseline)[p->target_class];
    const double residual = std::abs(sum - (f_in - f_base));
    const bool ok = residual <= 1e-2;

    fs::create_directories(p->output_dir);
    ablate::write_fgrid_raw(p->output_dir + "/heatmap.fgrid", map.domain.height,
                            map.domain.width, 1, 1, map.values);
    ablate::write_png_rescaled(p->output_dir + "/heatmap.png", map.domain, map.values);
    const ablate::ArgmaxPoint am = ablate::argmax_point(map);
    write_json_file(p->output_dir + "/report.json",
                    json{{"orientation", ablate::SaliencyMap::orientation},
                         {"steps", p->steps},
                         {"sum", sum},
                         {"F_input", f_in},
                         {"F_baseline", f_base},
                         {"completeness_residual", residual},
                         {"completeness_ok", ok},
                         {"argmax", {am.row, am.col}},
                         {"tie", am.tie}});
    echo_config(p->output_dir, json{{"command", "ig"},
                                    {"model", p->model_path},
                                    {"input", p->input_path},
                                    {"baseline", p->baseline_str},
                                    {"target_class", p->target_class},
                                    {"steps", p->steps},
                                    {"output_dir", p->output_dir}});
    std::cout << "completeness residual " << residual
              << (ok ? " (ok, <= 1e-2)" : " (EXCEEDS 1e-2)") << "\n";
  });
}

void setup_pointing(const json& cfg, CLI::App* cmd) {
  struct Params {
    std::string manifest_path, corpus_path, model_path, output_dir = "pointing_out";
  };
  auto p = std::make_shared<Params>();
  maybe(cfg, "output_dir", p->output_dir);
  cmd->add_option("--manifest", p->manifest_path, "suite manifest (JSON with a rows array)")
      ->required();
  cmd->add_option("--corpus", p->corpus_path, "corpus manifest (JSONL)")->required();
  cmd->add_option("--model", p->model_path)->required();
  cmd->add_option("--output-dir,-o", p->output_dir)->capture_default_str();

  cmd->callback([p]() {
    std::ifstream mf(p->manifest_path, std::ios::binary);
    if (!mf) throw ablate::io_error("cannot open manifest '" + p->manifest_path + "'");
    json manifest;
    try {
      mf >> manifest;
    } catch (const json::exception& e) {
      throw ablate::value_error("bad manifest JSON: " + std::string(e.what()));
    }
    const auto corpus = load_corpus(p->corpus_path);
    const ablate::MlpClassifier model = ablate::load_mlp(p->model_path);
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = ablate::run_suite(manifest, corpus, model, p->output_dir, g_workers);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream tf(p->output_dir + "/timings.txt", std::ios::binary);
    tf << "total_seconds " << elapsed << "\n";
    echo_config(p->output_dir, json{{"command", "pointing"},
                                    {"manifest", p->manifest_path},
                                    {"corpus", p->corpus_path},
                                    {"model", p->model_path},
                                    {"output_dir", p->output_dir}});
    for (const auto& r : results)
      std::cout << r.method_name << ": All% " << r.all_pct << " / Diff% " << r.diff_pct << "\n";
  });
}

void setup_sweep(const json& cfg, CLI::App* cmd) {
  struct Params {
    std::string corpus_path, model_path, sigma_list = "0,1,2,4", baseline_str = "blur:4",
        reduction = "contrastive-average", output_dir = "sweep_out";
    bool window = false;
    OptimizerFlags flags;
  };
  auto p = std::make_shared<Params>();
  p->flags.apply_config(cfg);
  maybe(cfg, "output_dir", p->output_dir);
  cmd->add_option("--corpus", p->corpus_path)->required();
  cmd->add_option("--model", p->model_path)->required();
  cmd->add_option("--sigmas", p->sigma_list, "comma-separated regularisation widths")
      ->capture_default_str();
  p->flags.add_to(cmd);
  cmd->add_option("--reduction", p->reduction)->capture_default_str();
  cmd->add_flag("--window", p->window);
  cmd->add_option("--baseline", p->baseline_str)->capture_default_str();
  cmd->add_option("--output-dir,-o", p->output_dir)->capture_default_str();

  cmd->callback([p]() {
    std::vector<double> sigmas;
    std::stringstream ss(p->sigma_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) sigmas.push_back(std::stod(tok));
    if (sigmas.empty()) throw ablate::value_error("--sigmas parsed to an empty list");

    const auto corpus = load_corpus(p->corpus_path);
    const ablate::MlpClassifier model = ablate::load_mlp(p->model_path);
    ablate::MethodConfig base;
    base.kind = ablate::MethodConfig::Kind::ablation_path;
    base.opt = p->flags.build();
    base.reduction = ablate::reduction_from_string(p->reduction);
    base.window = p->window;
    base.baseline = ablate::BaselineSpec::parse(p->baseline_str);
    base.name = "sweep";

    const auto records = ablate::sweep_regularisation(corpus, model, sigmas, base, g_workers);
    fs::create_directories(p->output_dir);
    ablate::write_sweep_csv(p->output_dir + "/sweep.csv", records);
    json jr = json::array();
    std::ofstream tf(p->output_dir + "/timings.txt", std::ios::binary);
    for (const auto& r : records) {
      jr.push_back(json{{"sigma", r.sigma},
                        {"runs", r.runs},
                        {"all_pct", r.all_pct},
                        {"diff_pct", r.diff_pct},
                        {"top_bin_mass", r.top_bin_mass()},
                        {"histogram", r.histogram}});
      tf << "sigma " << r.sigma << " seconds " << r.runtime_seconds << "\n";
    }
    write_json_file(p->output_dir + "/sweep.json", jr);
    json echo = {{"command", "sweep"},       {"corpus", p->corpus_path},
                 {"model", p->model_path},   {"sigmas", p->sigma_list},
                 {"reduction", p->reduction}, {"window", p->window},
                 {"baseline", p->baseline_str}, {"seed", g_seed},
                 {"output_dir", p->output_dir}};
    echo["optimizer"] = ablate::to_json(base.opt);
    echo_config(p->output_dir, echo);
    for (const auto& r : records)
      std::cout << "sigma " << r.sigma << ": All% " << r.all_pct << ", top-bin mass "
                << r.top_bin_mass() << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ablation-path saliency toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--seed", g_seed, "seed for every random choice")->capture_default_str();
  app.add_option("--workers", g_workers, "worker threads for batch commands")
      ->capture_default_str();

  try {
    // The config file feeds subcommand defaults, so find it before building
    // the subcommands; explicit flags still override during parse.
    json cfg = json::object();
    for (int i = 1; i + 1 < argc; ++i)
      if (std::string(argv[i]) == "--config") cfg = config_file_values(argv[i + 1]);
    maybe(cfg, "seed", g_seed);
    maybe(cfg, "workers", g_workers);

    setup_gen_corpus(
        cfg, app.add_subcommand("gen-corpus", "generate an annotated synthetic corpus")
                 ->fallthrough());
    setup_train(cfg,
                app.add_subcommand("train", "train the reference classifier")->fallthrough());
    setup_optimize(
        cfg, app.add_subcommand("optimize", "optimize an ablation path")->fallthrough());
    setup_reduce(cfg, app.add_subcommand("reduce", "reduce a path to a saliency heatmap")
                          ->fallthrough());
    setup_ig(cfg, app.add_subcommand("ig", "integrated gradients along the affine path")
                      ->fallthrough());
    setup_pointing(cfg,
                   app.add_subcommand("pointing", "run a pointing-game suite")->fallthrough());
    setup_sweep(cfg, app.add_subcommand("sweep", "regularisation sweep with score histograms")
                         ->fallthrough());

    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  } catch (const ablate::optimization_error& e) {
    std::cerr << "optimization aborted: " << e.what() << "\n";
    return 4;
  } catch (const ablate::training_error& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return 4;
  } catch (const ablate::io_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const ablate::value_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
