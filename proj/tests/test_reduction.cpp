#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ablate/reduction.hpp"
#include "ablate/rng.hpp"

using namespace ablate;

namespace {

struct ThresholdTarget : Classifier {
  GridDomain g;
  double level;
  ThresholdTarget(GridDomain g_, double level_) : g(g_), level(level_) {}
  GridDomain input_domain() const override { return g; }
  int input_channels() const override { return 1; }
  int class_count() const override { return 2; }
  std::vector<double> evaluate(const Image& x) const override {
    double mean = 0.0;
    for (double v : x.values) mean += v;
    mean /= static_cast<double>(x.values.size());
    const double f = mean <= level ? 1.0 : 0.0;
    return {f, 1.0 - f};
  }
  Image input_gradient(const Image&, int) const override { return Image(g, 1, 0.0); }
};

// First time sample at which a pixel's trajectory crosses one half.
int flip_index(const AblationPath& path, size_t pixel) {
  for (int k = 0; k < path.time_samples(); ++k)
    if (path.masks[k].values[pixel] > 0.5) return k;
  return path.time_samples();
}

}  // namespace

TEST_CASE("average reduction of the linear path is one half everywhere") {
  const SaliencyMap map = reduce_average(linear_path(GridDomain(5, 5), 14));
  for (double v : map.values) CHECK(v == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("a pixel ablated at the very end scores close to one") {
  const GridDomain g(2, 2);
  const int T = 30;
  AblationPath path = linear_path(g, T);
  for (int k = 1; k + 1 < T; ++k) path.masks[k].values[0] = 0.0;
  const SaliencyMap map = reduce_average(path);
  CHECK(map.values[0] >= 1.0 - 1.0 / (T - 1) - 1e-9);
  CHECK(map.values[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("on saturated paths the average reduction recovers ablation times") {
  const GridDomain g(3, 3);
  const int T = 40;
  // Pixel p flips at time tau_p = (p+1)/10.
  AblationPath path(g, T);
  for (int k = 1; k < T; ++k) {
    const double t = path.time_at(k);
    for (size_t p = 0; p < 9; ++p)
      path.masks[k].values[p] = t >= (static_cast<double>(p) + 1.0) / 10.0 ? 1.0 : 0.0;
  }
  const SaliencyMap map = reduce_average(path);
  for (size_t p = 0; p < 9; ++p)
    CHECK(map.values[p] ==
          Catch::Approx((static_cast<double>(p) + 1.0) / 10.0).margin(1.0 / (T - 1)));
}

TEST_CASE("class transition: always-dominant target selects the last mask") {
  const GridDomain g(4, 4);
  ThresholdTarget model(g, 2.0);  // mean is always <= 2: target always dominates
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  ClassTransitionReport report;
  const SaliencyMap map =
      reduce_class_transition(linear_path(g, 9), model, zero, ones, 0, &report);
  CHECK(report.k_star == 8);
  CHECK_FALSE(report.fallback);
  for (double v : map.values) CHECK(v == 0.0);
}

TEST_CASE("class transition: threshold crossing picks the sample just below the level") {
  const GridDomain g(4, 4);
  ThresholdTarget model(g, 0.6);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  const int T = 21;  // t_k = k/20; largest dominant at t = 0.6 exactly
  ClassTransitionReport report;
  const SaliencyMap map =
      reduce_class_transition(linear_path(g, T), model, zero, ones, 0, &report);
  CHECK(report.k_star == 12);
  CHECK_FALSE(report.fallback);
  for (double v : map.values) CHECK(v == Catch::Approx(1.0 - 0.6).margin(1e-12));
}

TEST_CASE("class transition: never-dominant target fires the argmax fallback") {
  const GridDomain g(4, 4);
  ThresholdTarget model(g, 0.5);
  const Image zero(g, 1, 0.0), ones(g, 1, 1.0);
  ClassTransitionReport report;
  // Ask for class 1, which dominates only late; then for a class that never
  // dominates use a classifier pinned to class 0.
  reduce_class_transition(linear_path(g, 9), model, zero, ones, 1, &report);
  CHECK_FALSE(report.fallback);

  ThresholdTarget always0(g, 2.0);
  const SaliencyMap map =
      reduce_class_transition(linear_path(g, 9), always0, zero, ones, 1, &report);
  CHECK(report.fallback);
  CHECK(report.k_star == 0);  // probability of class 1 is flat zero; first argmax
  for (double v : map.values) CHECK(v == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("contrastive average is antisymmetric and vanishes on identical paths") {
  const GridDomain g(4, 4);
  Rng rng(3);
  AblationPath a = linear_path(g, 8), b = linear_path(g, 8);
  for (int k = 1; k < 7; ++k)
    for (size_t p = 0; p < 16; ++p) {
      a.masks[k].values[p] = std::min(1.0, a.masks[k].values[p] + 0.2 * rng.uniform());
      b.masks[k].values[p] = std::max(0.0, b.masks[k].values[p] - 0.2 * rng.uniform());
    }
  const SaliencyMap zero_map = reduce_contrastive_average(a, a);
  for (double v : zero_map.values) CHECK(v == 0.0);

  const SaliencyMap ab = reduce_contrastive_average(a, b);
  const SaliencyMap ba = reduce_contrastive_average(b, a);
  for (size_t p = 0; p < ab.values.size(); ++p)
    CHECK(ab.values[p] == Catch::Approx(-ba.values[p]).margin(1e-15));
}

TEST_CASE("contrastive average peaks where the paths disagree longest") {
  const GridDomain g(2, 2);
  const int T = 30;
  // Retaining path keeps pixel 0 until the end; dissipating path removes it
  // first.
  AblationPath ret(g, T), diss(g, T);
  for (int k = 1; k < T; ++k) {
    const double t = ret.time_at(k);
    ret.masks[k].values[0] = t > 0.95 ? 1.0 : 0.0;
    diss.masks[k].values[0] = 1.0;
    for (size_t p = 1; p < 4; ++p) {
      ret.masks[k].values[p] = t > 0.3 ? 1.0 : 0.0;
      diss.masks[k].values[p] = t > 0.35 ? 1.0 : 0.0;
    }
  }
  std::fill(ret.masks[T - 1].values.begin(), ret.masks[T - 1].values.end(), 1.0);
  std::fill(diss.masks[T - 1].values.begin(), diss.masks[T - 1].values.end(), 1.0);
  const SaliencyMap map = reduce_contrastive_average(ret, diss);
  CHECK(map.values[0] > map.values[1]);
  CHECK(map.values[0] > map.values[2]);
  CHECK(map.values[0] > map.values[3]);
  const ArgmaxPoint am = argmax_point(map);
  CHECK(am.row == 0);
  CHECK(am.col == 0);
}

TEST_CASE("boundary window zeroes the border and keeps odd centers") {
  const GridDomain g(9, 7);
  SaliencyMap map(g, 1.0);
  const SaliencyMap out = apply_boundary_window(map);
  for (int c = 0; c < 7; ++c) {
    CHECK(out.at(0, c) == 0.0);
    CHECK(out.at(8, c) == 0.0);
  }
  for (int r = 0; r < 9; ++r) {
    CHECK(out.at(r, 0) == 0.0);
    CHECK(out.at(r, 6) == 0.0);
  }
  CHECK(out.at(4, 3) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("boundary window moves a corner-hugging argmax strictly inward") {
  const GridDomain g(9, 9);
  SaliencyMap map(g, 0.0);
  map.at(0, 0) = 5.0;  // border artifact
  map.at(5, 5) = 1.0;  // genuine interior peak
  CHECK(argmax_point(map).row == 0);
  const SaliencyMap windowed = apply_boundary_window(map);
  const ArgmaxPoint am = argmax_point(windowed);
  CHECK(am.row == 5);
  CHECK(am.col == 5);
}

TEST_CASE("argmax tie handling") {
  const GridDomain g(3, 3);
  SaliencyMap single(g, 0.0);
  single.at(1, 2) = 2.0;
  const ArgmaxPoint a = argmax_point(single);
  CHECK(a.row == 1);
  CHECK(a.col == 2);
  CHECK_FALSE(a.tie);

  const ArgmaxPoint flat = argmax_point(SaliencyMap(g, 0.7));
  CHECK(flat.row == 0);
  CHECK(flat.col == 0);
  CHECK(flat.tie);

  SaliencyMap plateau(g, 0.0);
  plateau.at(1, 1) = 3.0;
  plateau.at(2, 0) = 3.0;
  const ArgmaxPoint p = argmax_point(plateau);
  CHECK(p.row == 1);
  CHECK(p.col == 1);
  CHECK(p.tie);
}

TEST_CASE("saliency_to_path of a constant map matches the linear path in mass") {
  const GridDomain g(4, 4);
  const AblationPath path = saliency_to_path(SaliencyMap(g, 0.3), 12);
  for (int k = 0; k < 12; ++k)
    CHECK(mask_mean(path.masks[k]) == Catch::Approx(path.time_at(k)).margin(1e-6));
  CHECK(validate_path(path, 1e-6).empty());
}

TEST_CASE("two-level map: the low half is fully ablated by mass one half") {
  const GridDomain g(4, 4);
  SaliencyMap map(g, 1.0);
  for (size_t p = 0; p < 8; ++p) map.values[p] = -1.0;
  const int T = 17;
  const AblationPath path = saliency_to_path(map, T);
  CHECK(validate_path(path, 1e-6).empty());

  // Brute-force threshold sweep: the mask at mass 1/2 ablates exactly the
  // low-saliency half.
  const int k_half = (T - 1) / 2;  // t = 1/2
  for (size_t p = 0; p < 8; ++p)
    CHECK(path.masks[k_half].values[p] == Catch::Approx(1.0).margin(1e-9));
  for (size_t p = 8; p < 16; ++p)
    CHECK(path.masks[k_half].values[p] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("strictly ranked map: ablation order equals saliency rank order") {
  const GridDomain g(4, 4);
  Rng rng(27);
  SaliencyMap map(g);
  for (double& v : map.values) v = rng.uniform(-2.0, 2.0);
  const int T = 200;
  const AblationPath path = saliency_to_path(map, T);

  std::vector<size_t> by_flip(16), by_rank(16);
  std::iota(by_flip.begin(), by_flip.end(), 0);
  by_rank = by_flip;
  std::stable_sort(by_flip.begin(), by_flip.end(),
                   [&](size_t a, size_t b) { return flip_index(path, a) < flip_index(path, b); });
  std::stable_sort(by_rank.begin(), by_rank.end(),
                   [&](size_t a, size_t b) { return map.values[a] < map.values[b]; });
  CHECK(by_flip == by_rank);
}

TEST_CASE("average reduction is a rank-order left inverse of saliency_to_path") {
  // Well-separated saliency levels in shuffled order; the time grid must be
  // fine enough to resolve the smallest logistic-space gap.
  const GridDomain g(4, 4);
  Rng rng(5);
  SaliencyMap map(g);
  for (size_t p = 0; p < 16; ++p) map.values[p] = -2.0 + 4.0 * static_cast<double>(p) / 15.0;
  for (size_t i = 16; i > 1; --i)
    std::swap(map.values[i - 1], map.values[rng.next_u64() % i]);
  const SaliencyMap recovered = reduce_average(saliency_to_path(map, 400));

  std::vector<size_t> order_in(16), order_out(16);
  std::iota(order_in.begin(), order_in.end(), 0);
  order_out = order_in;
  std::stable_sort(order_in.begin(), order_in.end(),
                   [&](size_t a, size_t b) { return map.values[a] < map.values[b]; });
  std::stable_sort(order_out.begin(), order_out.end(), [&](size_t a, size_t b) {
    return recovered.values[a] < recovered.values[b];
  });
  CHECK(order_in == order_out);
}

TEST_CASE("saliency_to_path rejects bad input") {
  const GridDomain g(4, 4);
  CHECK_THROWS_AS(saliency_to_path(SaliencyMap(g), 2), value_error);
  SaliencyMap bad(g);
  bad.values[0] = std::nan("");
  CHECK_THROWS_AS(saliency_to_path(bad, 10), value_error);
}
