#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ablate/blur.hpp"
#include "ablate/constraints.hpp"
#include "ablate/grid.hpp"
#include "ablate/path.hpp"
#include "ablate/rng.hpp"

using namespace ablate;

namespace {

// Independent oracle: direct dense 2D convolution with the product kernel and
// mirror padding, no separability.
Image dense_blur(const Image& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size()) / 2;
  const int h = img.domain.height, w = img.domain.width;
  Image out(img.domain, img.channels);
  for (int ch = 0; ch < img.channels; ++ch)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double acc = 0.0;
        for (int dr = -radius; dr <= radius; ++dr)
          for (int dc = -radius; dc <= radius; ++dc)
            acc += k[dr + radius] * k[dc + radius] *
                   img.at(detail::mirror_index(r + dr, h), detail::mirror_index(c + dc, w), ch);
        out.at(r, c, ch) = acc;
      }
  return out;
}

Image random_image(GridDomain d, int channels, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Image img(d, channels);
  for (double& v : img.values) v = rng.uniform(lo, hi);
  return img;
}

Mask random_mask(GridDomain d, Rng& rng) {
  Mask m(d);
  for (double& v : m.values) v = rng.uniform();
  return m;
}

}  // namespace

TEST_CASE("grid measure is normalized") {
  GridDomain g(7, 11);
  CHECK(g.pixel_count() == 77);
  CHECK(g.pixel_count() * g.measure_weight() == Catch::Approx(1.0).margin(1e-15));
  CHECK_THROWS_AS(GridDomain(0, 4), value_error);
}

TEST_CASE("interpolate endpoints") {
  GridDomain g(4, 5);
  Rng rng(7);
  const Image input = random_image(g, 2, rng);
  const Image baseline = random_image(g, 2, rng);

  const Image at0 = interpolate(Mask(g, 0.0), input, baseline);
  const Image at1 = interpolate(Mask(g, 1.0), input, baseline);
  for (size_t i = 0; i < input.values.size(); ++i) {
    CHECK(at0.values[i] == input.values[i]);
    CHECK(at1.values[i] == baseline.values[i]);
  }
}

TEST_CASE("interpolate on a single pixel") {
  GridDomain g(1, 1);
  Image input(g, 1, 2.0), baseline(g, 1, 4.0);
  Mask m(g, 0.25);
  CHECK(interpolate(m, input, baseline).values[0] == Catch::Approx(2.5).margin(1e-15));
}

TEST_CASE("interpolate rejects shape mismatches") {
  Image a(GridDomain(4, 4), 1), b(GridDomain(4, 4), 2), c(GridDomain(5, 4), 1);
  CHECK_THROWS_AS(interpolate(Mask(GridDomain(4, 4)), a, b), value_error);
  CHECK_THROWS_AS(interpolate(Mask(GridDomain(4, 4)), a, c), value_error);
  CHECK_THROWS_AS(interpolate(Mask(GridDomain(5, 4)), a, a), value_error);
}

TEST_CASE("interpolate is affine in the mask") {
  GridDomain g(6, 6);
  Rng rng(11);
  const Image input = random_image(g, 3, rng);
  const Image baseline = random_image(g, 3, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask m1 = random_mask(g, rng);
    const Mask m2 = random_mask(g, rng);
    const double a = rng.uniform();
    Mask blend(g);
    for (size_t p = 0; p < blend.size(); ++p)
      blend.values[p] = a * m1.values[p] + (1.0 - a) * m2.values[p];
    const Image lhs = interpolate(blend, input, baseline);
    const Image i1 = interpolate(m1, input, baseline);
    const Image i2 = interpolate(m2, input, baseline);
    for (size_t i = 0; i < lhs.values.size(); ++i)
      CHECK(lhs.values[i] ==
            Catch::Approx(a * i1.values[i] + (1.0 - a) * i2.values[i]).margin(1e-12));
  }
}

TEST_CASE("blur of a constant image is the constant") {
  Image img(GridDomain(9, 9), 1, 0.37);
  const Image out = make_blur_baseline(img, 2.0);
  for (double v : out.values) CHECK(v == Catch::Approx(0.37).margin(1e-12));
}

TEST_CASE("blur with vanishing sigma degenerates to the identity") {
  Rng rng(3);
  Image img = random_image(GridDomain(8, 8), 1, rng);
  const Image out = make_blur_baseline(img, 1e-12);
  for (size_t i = 0; i < img.values.size(); ++i)
    CHECK(out.values[i] == Catch::Approx(img.values[i]).margin(1e-15));
}

TEST_CASE("blur rejects non-positive sigma") {
  Image img(GridDomain(8, 8), 1, 0.0);
  CHECK_THROWS_AS(make_blur_baseline(img, 0.0), value_error);
  CHECK_THROWS_AS(make_blur_baseline(img, -1.0), value_error);
}

TEST_CASE("impulse blur matches the dense convolution oracle and keeps unit mass") {
  Image img(GridDomain(9, 9), 1, 0.0);
  img.at(4, 4, 0) = 1.0;
  const Image fast = make_blur_baseline(img, 1.0);
  const Image oracle = dense_blur(img, 1.0);
  double sum = 0.0;
  for (size_t i = 0; i < fast.values.size(); ++i) {
    CHECK(fast.values[i] == Catch::Approx(oracle.values[i]).margin(1e-6));
    sum += fast.values[i];
  }
  CHECK(sum == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("blur preserves per-channel means") {
  Rng rng(19);
  const Image img = random_image(GridDomain(13, 17), 2, rng);
  const Image out = make_blur_baseline(img, 2.5);
  for (int ch = 0; ch < 2; ++ch)
    CHECK(image_channel_mean(out, ch) ==
          Catch::Approx(image_channel_mean(img, ch)).margin(1e-6));
}

TEST_CASE("linear path satisfies the admissibility conditions exactly") {
  const AblationPath p = linear_path(GridDomain(4, 4), 3);
  REQUIRE(p.time_samples() == 3);
  for (double v : p.masks[0].values) CHECK(v == 0.0);
  for (double v : p.masks[1].values) CHECK(v == 0.5);
  for (double v : p.masks[2].values) CHECK(v == 1.0);

  const AblationPath q = linear_path(GridDomain(5, 3), 9);
  for (int k = 0; k < q.time_samples(); ++k)
    CHECK(mask_mean(q.masks[k]) == Catch::Approx(q.time_at(k)).margin(1e-12));
  CHECK(validate_path(q, 1e-9).empty());

  Rng rng(5);
  const Image input = random_image(GridDomain(5, 3), 1, rng);
  const Image baseline = random_image(GridDomain(5, 3), 1, rng);
  const Image end = interpolate(q.masks[q.time_samples() - 1], input, baseline);
  for (size_t i = 0; i < end.values.size(); ++i) CHECK(end.values[i] == baseline.values[i]);

  CHECK_THROWS_AS(linear_path(GridDomain(4, 4), 2), value_error);
}

TEST_CASE("path density of the linear path is one") {
  const PathDensity d = path_density(linear_path(GridDomain(4, 4), 8));
  REQUIRE(d.slab_count() == 7);
  for (const Mask& slab : d.slabs)
    for (double v : slab.values) CHECK(v == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("path density of admissible paths telescopes and has unit slab means") {
  Rng rng(23);
  const GridDomain g(6, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const int T = 4 + static_cast<int>(rng.next_u64() % 12);
    AblationPath raw(g, T);
    for (int p = 0; p < g.pixel_count(); ++p) {
      double acc = 0.0;
      std::vector<double> inc(T - 1);
      double total = 0.0;
      for (double& v : inc) {
        v = rng.uniform();
        total += v;
      }
      for (int k = 1; k < T; ++k) {
        acc += inc[k - 1] / total;
        raw.masks[k].values[p] = acc;
      }
    }
    const AblationPath path = project_admissible(raw);
    const PathDensity d = path_density(path);
    for (const Mask& slab : d.slabs) {
      CHECK(mask_mean(slab) == Catch::Approx(1.0).margin(1e-5));
      for (double v : slab.values) CHECK(v >= -1e-9);
    }
    const double dt = path.dt();
    for (int p = 0; p < g.pixel_count(); ++p) {
      double total = 0.0;
      for (const Mask& slab : d.slabs) total += dt * slab.values[p];
      CHECK(total == Catch::Approx(1.0).margin(1e-6));
    }
  }
}
