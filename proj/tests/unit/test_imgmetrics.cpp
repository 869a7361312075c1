#include <doctest.h>

#include <cmath>
#include <random>

#include "scitikz/error.hpp"
#include "scitikz/imgmetrics.hpp"

using namespace scitikz;
using namespace scitikz::imgmetrics;

namespace {

RasterImage white(int w, int h) { return RasterImage(w, h, Channels::gray, 300.0, 1.0f); }

void fill_rect(RasterImage& img, int x0, int y0, int x1, int y1, float v) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.at(x, y) = v;
}

RasterImage noise_image(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  RasterImage img = white(w, h);
  for (auto& p : img.pixels) p = u(rng);
  return img;
}

// Direct windowed SSIM: every 11x11 window evaluated with explicit weighted
// sums, no separable filtering.
double ssim_oracle(const RasterImage& a, const RasterImage& b) {
  const int win = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> w(win * win);
  double wsum = 0;
  for (int j = 0; j < win; ++j)
    for (int i = 0; i < win; ++i) {
      const double dx = i - win / 2, dy = j - win / 2;
      w[j * win + i] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      wsum += w[j * win + i];
    }
  for (auto& v : w) v /= wsum;
  double total = 0;
  int count = 0;
  for (int y = 0; y + win <= a.height; ++y) {
    for (int x = 0; x + win <= a.width; ++x) {
      double mx = 0, my = 0;
      for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i) {
          mx += w[j * win + i] * a.at(x + i, y + j);
          my += w[j * win + i] * b.at(x + i, y + j);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i) {
          const double dx = a.at(x + i, y + j) - mx, dy = b.at(x + i, y + j) - my;
          vx += w[j * win + i] * dx * dx;
          vy += w[j * win + i] * dy * dy;
          cxy += w[j * win + i] * dx * dy;
        }
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

}  // namespace

TEST_SUITE("imgmetrics") {

TEST_CASE("trim to content box") {
  RasterImage img = white(40, 30);
  fill_rect(img, 10, 5, 20, 12, 0.0f);
  const auto box = content_box(img, 0.99);
  CHECK(box.found);
  CHECK(box.x0 == 10);
  CHECK(box.y0 == 5);
  CHECK(box.x1 == 20);
  CHECK(box.y1 == 12);
  const auto pair = trim_and_align(img, img);
  CHECK(pair.a.width == 10);
  CHECK(pair.a.height == 7);
  for (float p : pair.a.pixels) CHECK(p == 0.0f);
}

TEST_CASE("align pads to the elementwise maximum") {
  RasterImage a = white(200, 200), b = white(200, 200);
  fill_rect(a, 10, 10, 110, 60, 0.2f);
  fill_rect(b, 50, 30, 110, 110, 0.4f);
  const auto ab = trim_and_align(a, b);
  CHECK(ab.a.width == 100);
  CHECK(ab.a.height == 80);
  CHECK(ab.b.width == 100);
  CHECK(ab.b.height == 80);
  const auto ba = trim_and_align(b, a);
  CHECK(ba.a.width == ab.b.width);
  CHECK(ba.a.height == ab.b.height);
  CHECK(ba.a == ab.b);
  CHECK(ab.border_pt == 10.0);
}

TEST_CASE("all-white input raises EmptyContent") {
  RasterImage a = white(20, 20), b = white(20, 20);
  fill_rect(b, 2, 2, 4, 4, 0.0f);
  CHECK_THROWS_AS(trim_and_align(a, b), EmptyContent);
  CHECK_THROWS_AS(trim_and_align(b, a), EmptyContent);
}

TEST_CASE("ssim matches the direct windowed oracle") {
  const auto base = noise_image(32, 24, 1);
  auto noisy = base;
  std::mt19937 rng(99);
  std::normal_distribution<float> n(0.0f, 0.1f);
  for (auto& p : noisy.pixels) p = std::clamp(p + n(rng), 0.0f, 1.0f);
  const AlignedPair pair{base, noisy};
  CHECK(ssim(pair) == doctest::Approx(ssim_oracle(base, noisy)).epsilon(1e-9));

  const auto other = noise_image(32, 24, 2);
  CHECK(ssim({base, other}) == doctest::Approx(ssim_oracle(base, other)).epsilon(1e-9));
}

TEST_CASE("ssim identity, symmetry and inverse") {
  const auto a = noise_image(20, 20, 3);
  CHECK(ssim({a, a}) == doctest::Approx(1.0).epsilon(1e-12));
  const auto b = noise_image(20, 20, 4);
  CHECK(ssim({a, b}) == doctest::Approx(ssim({b, a})).epsilon(1e-12));
  auto inv = a;
  for (auto& p : inv.pixels) p = 1.0f - p;
  CHECK(ssim({a, inv}) < 0.0);
}

TEST_CASE("cosine and reporting map") {
  const std::vector<double> u = {1, 2, 3}, neg = {-1, -2, -3}, e1 = {1, 0}, e2 = {0, 1}, zero = {0, 0, 0};
  CHECK(cosine(u, u) == doctest::Approx(1.0));
  CHECK(cosine(e1, e2) == doctest::Approx(0.0));
  CHECK(cosine(u, neg) == doctest::Approx(-1.0));
  CHECK(map_unit(cosine(u, neg)) == doctest::Approx(0.0));
  CHECK(map_unit(1.0) == 1.0);
  CHECK_THROWS_AS(cosine(u, zero), ZeroVector);
  CHECK_THROWS_AS(cosine(u, e1), std::invalid_argument);
}

TEST_CASE("hinge and kernel arithmetic") {
  CHECK(hinge_semantic(0.9, 0.8) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(hinge_semantic(0.7, 0.8) == 0.0);
  CHECK(hinge_semantic(1.0, 0.8) == doctest::Approx(1.0));
  CHECK_THROWS_AS(hinge_semantic(0.5, 1.0), InvalidThreshold);
  CHECK_THROWS_AS(hinge_semantic(0.5, -0.1), InvalidThreshold);
  CHECK(struct_from_distance(0.0, 0.5) == 1.0);
  CHECK(struct_from_distance(0.5, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("property: hinge monotone, kernel strictly decreasing") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> s(-1.0, 1.0), tau(0.0, 0.99), d(0.0, 5.0), t(0.05, 2.0);
  for (int i = 0; i < 2000; ++i) {
    const double th = tau(rng);
    double a = s(rng), b = s(rng);
    if (a > b) std::swap(a, b);
    CHECK(hinge_semantic(a, th) <= hinge_semantic(b, th));
    if (a <= th) CHECK(hinge_semantic(a, th) == 0.0);
    const double tt = t(rng);
    double d1 = d(rng), d2 = d(rng);
    if (d1 > d2) std::swap(d1, d2);
    if (d1 < d2) CHECK(struct_from_distance(d1, tt) > struct_from_distance(d2, tt));
    CHECK(struct_from_distance(0.0, tt) == 1.0);
  }
}

TEST_CASE("fallback embedding") {
  RasterImage img = white(64, 64);
  fill_rect(img, 4, 4, 28, 28, 0.0f);
  const auto e = fallback_embedding(img);
  CHECK(e.size() == static_cast<std::size_t>(kFallbackGrid * kFallbackGrid));
  CHECK(cosine(e, fallback_embedding(img)) == doctest::Approx(1.0));

  RasterImage shifted = white(64, 64);
  fill_rect(shifted, 36, 4, 60, 28, 0.0f);
  const double c = cosine(e, fallback_embedding(shifted));
  CHECK(c < 1.0);
  // 6x6 dark cells on a 16x16 grid, disjoint after the shift; image mean is
  // 220/256, so dark cells center to -220/256 and white ones to 36/256
  const double lo = -220.0 / 256.0, hi = 36.0 / 256.0;
  const double expect = (2 * 36 * lo * hi + 184 * hi * hi) / (36 * lo * lo + 220 * hi * hi);
  CHECK(c == doctest::Approx(expect).epsilon(1e-9));

  const auto flat = fallback_embedding(white(32, 32));
  CHECK_THROWS_AS(cosine(flat, flat), ZeroVector);
}

TEST_CASE("fallback perceptual distance") {
  RasterImage a = white(10, 10), b = white(10, 10);
  fill_rect(a, 0, 0, 10, 10, 0.0f);
  fill_rect(b, 0, 0, 10, 5, 0.0f);
  CHECK(fallback_perceptual_distance({a, a}) == 0.0);
  CHECK(fallback_perceptual_distance({a, b}) == doctest::Approx(0.5));
}

}  // TEST_SUITE
