#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ablate/constraints.hpp"
#include "ablate/rng.hpp"
#include "ablate/scores.hpp"

using namespace ablate;

namespace {

// p_target affine in the mean input intensity: with input 0 and baseline 1,
// F(interp(mask)) = 1 - mean(mask), so scores have closed forms.
struct MeanIntensityClassifier : Classifier {
  GridDomain g;
  int ch;
  double a, b;  // p_target = clamp(a * mean(x) + b)
  MeanIntensityClassifier(GridDomain g_, int ch_, double a_, double b_)
      : g(g_), ch(ch_), a(a_), b(b_) {}
  GridDomain input_domain() const override { return g; }
  int input_channels() const override { return ch; }
  int class_count() const override { return 2; }
  std::vector<double> evaluate(const Image& x) const override {
    double mean = 0.0;
    for (double v : x.values) mean += v;
    mean /= static_cast<double>(x.values.size());
    const double p = std::min(1.0, std::max(0.0, a * mean + b));
    return {p, 1.0 - p};
  }
  Image input_gradient(const Image& x, int cls) const override {
    double mean = 0.0;
    for (double v : x.values) mean += v;
    mean /= static_cast<double>(x.values.size());
    const double inner = a * mean + b;
    const double slope = (inner > 0.0 && inner < 1.0) ? a / x.values.size() : 0.0;
    Image grad(g, ch, cls == 0 ? slope : -slope);
    return grad;
  }
};

struct ConstantClassifier : Classifier {
  GridDomain g;
  double p0;
  ConstantClassifier(GridDomain g_, double p0_) : g(g_), p0(p0_) {}
  GridDomain input_domain() const override { return g; }
  int input_channels() const override { return 1; }
  int class_count() const override { return 2; }
  std::vector<double> evaluate(const Image&) const override { return {p0, 1.0 - p0}; }
  Image input_gradient(const Image&, int) const override { return Image(g, 1, 0.0); }
};

// Keys on one pixel: target class holds while pixel (0,0) stays near the
// input side.
struct PixelClassifier : Classifier {
  GridDomain g;
  explicit PixelClassifier(GridDomain g_) : g(g_) {}
  GridDomain input_domain() const override { return g; }
  int input_channels() const override { return 1; }
  int class_count() const override { return 2; }
  std::vector<double> evaluate(const Image& x) const override {
    const double f = x.values[0] < 0.5 ? 1.0 : 0.0;
    return {f, 1.0 - f};
  }
  Image input_gradient(const Image&, int) const override { return Image(g, 1, 0.0); }
};

AblationPath random_admissible_path(GridDomain g, int T, Rng& rng) {
  AblationPath raw(g, T);
  for (int k = 1; k < T; ++k)
    for (size_t p = 0; p < raw.masks[k].size(); ++p)
      raw.masks[k].values[p] = rng.uniform();
  std::fill(raw.masks[T - 1].values.begin(), raw.masks[T - 1].values.end(), 1.0);
  return project_admissible(raw);
}

}  // namespace

TEST_CASE("retain score of a constant classifier is its value") {
  const GridDomain g(4, 4);
  ConstantClassifier one(g, 1.0);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  const AblationPath lin = linear_path(g, 9);
  CHECK(score_retain(lin, one, zero, ones, 0).score == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("affine classifier on the linear path scores one half") {
  const GridDomain g(4, 4);
  MeanIntensityClassifier model(g, 1, -1.0, 1.0);  // F = 1 - mean(x)
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  CHECK(model.evaluate(zero)[0] == 1.0);
  CHECK(model.evaluate(ones)[0] == 0.0);
  const AblationPath lin = linear_path(g, 20);
  const ScoreReport r = score_retain(lin, model, zero, ones, 0);
  CHECK(r.score == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(static_cast<int>(r.per_step_F.size()) == 20);
  CHECK(r.per_step_F[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("hard threshold classifier scores the crossing mass on any admissible path") {
  const GridDomain g(6, 6);
  ThresholdMeanClassifier model(g, 1, 0.6);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  Rng rng(3);
  for (int T : {11, 20, 33}) {
    const double tol = 1.0 / (T - 1);
    CHECK(score_retain(linear_path(g, T), model, zero, ones, 0).score ==
          Catch::Approx(0.6).margin(tol + 1e-9));
    for (int trial = 0; trial < 5; ++trial) {
      const AblationPath path = random_admissible_path(g, T, rng);
      CHECK(score_retain(path, model, zero, ones, 0).score ==
            Catch::Approx(0.6).margin(tol + 1e-9));
    }
  }
}

TEST_CASE("dissipate complements retain") {
  const GridDomain g(4, 4);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  const AblationPath lin = linear_path(g, 12);
  CHECK(score_dissipate(lin, ConstantClassifier(g, 1.0), zero, ones, 0).score ==
        Catch::Approx(0.0).margin(1e-12));
  CHECK(score_dissipate(lin, ConstantClassifier(g, 0.0), zero, ones, 0).score ==
        Catch::Approx(1.0).margin(1e-12));

  Rng rng(9);
  MeanIntensityClassifier model(g, 1, -0.7, 0.9);
  for (int trial = 0; trial < 5; ++trial) {
    const AblationPath path = random_admissible_path(g, 9, rng);
    const double sr = score_retain(path, model, zero, ones, 0).score;
    const double sd = score_dissipate(path, model, zero, ones, 0).score;
    CHECK(sr + sd == Catch::Approx(1.0).margin(1e-12));
    CHECK(sr >= 0.0);
    CHECK(sr <= 1.0);
  }
}

TEST_CASE("contrastive score of the affine case is one") {
  const GridDomain g(4, 4);
  MeanIntensityClassifier model(g, 1, -1.0, 1.0);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  const ScoreReport r = score_contrastive(linear_path(g, 16), model, zero, ones, 0);
  CHECK(*r.sub_score_retain == Catch::Approx(0.5).margin(1e-12));
  CHECK(*r.sub_score_dissipate == Catch::Approx(0.5).margin(1e-12));
  CHECK(r.score == Catch::Approx(1.0).margin(1e-12));

  CHECK(score_contrastive(linear_path(g, 16), ConstantClassifier(g, 1.0), zero, ones, 0).score ==
        Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("contrastive equals retain plus complement-dissipate on random paths") {
  const GridDomain g(5, 4);
  MeanIntensityClassifier model(g, 1, -0.8, 0.85);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    const AblationPath path = random_admissible_path(g, 10, rng);
    const ScoreReport r = score_contrastive(path, model, zero, ones, 0);
    const double sr = score_retain(path, model, zero, ones, 0).score;
    AblationPath rev = path;
    for (Mask& m : rev.masks)
      for (double& v : m.values) v = 1.0 - v;
    const double sr_rev = score_retain(rev, model, zero, ones, 0).score;
    CHECK(r.score == Catch::Approx(sr + 1.0 - sr_rev).margin(1e-12));
  }
}

TEST_CASE("straddle score and diagnostics") {
  const GridDomain g(4, 4);
  MeanIntensityClassifier model(g, 1, -1.0, 1.0);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  const AblationPath lin = linear_path(g, 16);
  const ScoreReport r = score_straddle(lin, lin, model, zero, ones, 0);
  CHECK(r.score == Catch::Approx(1.0).margin(1e-12));
  CHECK(*r.interpath_l1 == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("a perfect straddle approaches two") {
  // Retaining path keeps pixel (0,0) to the very end; dissipating path
  // ablates it first; the classifier keys on exactly that pixel.
  const GridDomain g(3, 3);
  const int T = 21;
  PixelClassifier model(g);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);

  std::vector<double> ret_order{8, 0, 1, 2, 3, 4, 5, 6, 7};  // pixel 0 most salient
  std::vector<double> diss_order{0, 8, 7, 6, 5, 4, 3, 2, 1};

  // Saturated staircase paths: threshold the rank against the time grid.
  auto staircase = [&](const std::vector<double>& order) {
    AblationPath path(g, T);
    for (int k = 1; k + 1 < T; ++k) {
      const double level = 9.0 * path.time_at(k);
      for (size_t p = 0; p < 9; ++p)
        path.masks[k].values[p] = order[p] < level ? 1.0 : 0.0;
    }
    std::fill(path.masks[T - 1].values.begin(), path.masks[T - 1].values.end(), 1.0);
    return project_admissible(path);
  };
  const AblationPath path_ret = staircase(ret_order);
  const AblationPath path_diss = staircase(diss_order);
  const ScoreReport r = score_straddle(path_ret, path_diss, model, zero, ones, 0);
  CHECK(r.score >= 2.0 - 3.0 / (T - 1));
  CHECK(*r.interpath_l1 > 0.0);
}

TEST_CASE("straddle rejects mismatched paths") {
  const GridDomain g(4, 4);
  ConstantClassifier model(g, 1.0);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  CHECK_THROWS_AS(
      score_straddle(linear_path(g, 8), linear_path(g, 9), model, zero, ones, 0),
      value_error);
}

TEST_CASE("path differential vanishes when baseline equals input") {
  const GridDomain g(4, 4);
  MlpClassifier model(g, 1, 6, 2, 7);
  Rng rng(1);
  Image x(g, 1);
  for (double& v : x.values) v = rng.uniform();
  const auto grads = path_differential(linear_path(g, 8), model, x, x, 0,
                                       GradientSign::ascend_F);
  for (const Mask& m : grads)
    for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("path differential matches finite differences of the retain score") {
  const GridDomain g(6, 6);
  MlpClassifier model(g, 1, 8, 3, 23);
  Rng rng(19);
  Image input(g, 1), baseline(g, 1);
  for (double& v : input.values) v = rng.uniform();
  for (double& v : baseline.values) v = rng.uniform();

  const int T = 9;
  const AblationPath path = linear_path(g, T);
  const auto grads = path_step_gradients(path, model, input, baseline, 0);
  const double dt = path.dt();

  for (int probe = 0; probe < 25; ++probe) {
    const int k = 1 + static_cast<int>(rng.next_u64() % (T - 2));
    const size_t p = rng.next_u64() % input.values.size();
    const double eps = 1e-4;
    AblationPath up = path, dn = path;
    up.masks[k].values[p] += eps;
    dn.masks[k].values[p] -= eps;
    const double s_up = score_retain(up, model, input, baseline, 0).score;
    const double s_dn = score_retain(dn, model, input, baseline, 0).score;
    const double fd = (s_up - s_dn) / (2 * eps);
    const double predicted = dt * grads[k].values[p];
    CHECK(std::abs(fd - predicted) <= 1e-3 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("linear-in-input classifier gives a time-independent differential") {
  const GridDomain g(4, 4);
  MeanIntensityClassifier model(g, 1, -0.5, 0.75);
  Image input(g, 1, 0.1), baseline(g, 1, 0.9);
  const auto grads = path_step_gradients(linear_path(g, 8), model, input, baseline, 0);
  for (size_t k = 1; k < grads.size(); ++k)
    for (size_t p = 0; p < grads[k].values.size(); ++p)
      CHECK(grads[k].values[p] == Catch::Approx(grads[0].values[p]).margin(1e-12));
}

TEST_CASE("descend sign negates and endpoints are pinned to zero") {
  const GridDomain g(4, 4);
  MlpClassifier model(g, 1, 6, 2, 3);
  Rng rng(6);
  Image input(g, 1), baseline(g, 1);
  for (double& v : input.values) v = rng.uniform();
  for (double& v : baseline.values) v = rng.uniform();
  const AblationPath path = linear_path(g, 7);
  const auto up = path_differential(path, model, input, baseline, 0, GradientSign::ascend_F);
  const auto dn = path_differential(path, model, input, baseline, 0, GradientSign::descend_F);
  for (double v : up.front().values) CHECK(v == 0.0);
  for (double v : up.back().values) CHECK(v == 0.0);
  for (int k = 1; k < 6; ++k)
    for (size_t p = 0; p < up[k].values.size(); ++p)
      CHECK(up[k].values[p] == -dn[k].values[p]);
}

TEST_CASE("smooth_gradient: identity at sigma zero, constant fixpoint, impulse oracle") {
  const GridDomain g(9, 9);
  std::vector<Mask> grads(1, Mask(g, 0.7));
  const auto same = smooth_gradient(grads, 0.0);
  CHECK(same[0].values == grads[0].values);
  const auto flat = smooth_gradient(grads, 2.0);
  for (double v : flat[0].values) CHECK(v == Catch::Approx(0.7).margin(1e-12));

  Mask impulse(g, 0.0);
  impulse.at(4, 4) = 1.0;
  const auto blurred = smooth_gradient({impulse}, 1.0)[0];
  // Dense 2D oracle with the product kernel.
  const auto k = gaussian_kernel(1.0);
  const int radius = static_cast<int>(k.size()) / 2;
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) {
      const int dr = r - 4, dc = c - 4;
      const double expect = (std::abs(dr) <= radius && std::abs(dc) <= radius)
                                ? k[dr + radius] * k[dc + radius]
                                : 0.0;
      CHECK(blurred.at(r, c) == Catch::Approx(expect).margin(1e-6));
    }
  CHECK_THROWS_AS(smooth_gradient(grads, -1.0), value_error);
}

TEST_CASE("integrated gradients: affine-logit closed form") {
  const GridDomain g(5, 5);
  Rng rng(31);
  Image w(g, 1);
  for (double& v : w.values) v = rng.uniform(-1.0, 1.0);
  LinearSoftmaxClassifier model({w, Image(g, 1, 0.0)}, {0.0, 0.0});
  Image input(g, 1), baseline(g, 1);
  for (double& v : input.values) v = rng.uniform();
  for (double& v : baseline.values) v = rng.uniform();

  const int steps = 301;
  const SaliencyMap ig = integrated_gradients(model, input, baseline, 0, steps);
  // Average squash derivative along the segment, computed independently.
  const AblationPath lin = linear_path(g, steps);
  std::vector<double> squash(steps);
  for (int k = 0; k < steps; ++k) {
    const double p = model.evaluate(interpolate(lin.masks[k], input, baseline))[0];
    squash[k] = p * (1.0 - p);
  }
  const double avg_squash = trapezoid(squash);
  for (size_t i = 0; i < ig.values.size(); ++i) {
    const double closed = w.values[i] * (input.values[i] - baseline.values[i]) * avg_squash;
    CHECK(ig.values[i] == Catch::Approx(closed).margin(1e-4));
  }
}

TEST_CASE("integrated gradients: completeness on a smooth model") {
  const GridDomain g(8, 8);
  MlpClassifier model(g, 1, 10, 3, 13);
  Rng rng(17);
  Image input(g, 1), baseline(g, 1);
  for (double& v : input.values) v = rng.uniform();
  for (double& v : baseline.values) v = rng.uniform();
  const SaliencyMap ig = integrated_gradients(model, input, baseline, 1, 256);
  double sum = 0.0;
  for (double v : ig.values) sum += v;
  const double f_in = model.evaluate(input)[1];
  const double f_base = model.evaluate(baseline)[1];
  // Map orientation is high = salient, i.e. the input-minus-baseline
  // direction: the sum approximates F(input) - F(baseline).
  CHECK(std::abs(sum - (f_in - f_base)) <= 1e-2);
  CHECK(std::abs(-sum - (f_base - f_in)) <= 1e-2);
}

TEST_CASE("integrated gradients of identical endpoint images vanish") {
  const GridDomain g(4, 4);
  MlpClassifier model(g, 1, 6, 2, 7);
  Image x(g, 1, 0.3);
  const SaliencyMap ig = integrated_gradients(model, x, x, 0, 16);
  for (double v : ig.values) CHECK(v == 0.0);
  CHECK_THROWS_AS(integrated_gradients(model, x, x, 0, 1), value_error);
}

TEST_CASE("integrated gradients equal the time-averaged linear-path differential") {
  const GridDomain g(6, 6);
  MlpClassifier model(g, 1, 8, 2, 37);
  Rng rng(23);
  Image input(g, 1), baseline(g, 1);
  for (double& v : input.values) v = rng.uniform();
  for (double& v : baseline.values) v = rng.uniform();
  const int T = 12;
  const SaliencyMap ig = integrated_gradients(model, input, baseline, 0, T);

  const AblationPath lin = linear_path(g, T);
  const auto raw = path_step_gradients(lin, model, input, baseline, 0);
  SaliencyMap avg(g);
  const double dt = lin.dt();
  for (int k = 0; k < T; ++k) {
    const double w = (k == 0 || k == T - 1) ? 0.5 * dt : dt;
    for (size_t p = 0; p < avg.values.size(); ++p) avg.values[p] += w * raw[k].values[p];
  }
  for (size_t p = 0; p < avg.values.size(); ++p)
    CHECK(ig.values[p] == Catch::Approx(-avg.values[p]).margin(1e-12));
}
