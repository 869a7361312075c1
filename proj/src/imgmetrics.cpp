#include "scitikz/imgmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "scitikz/error.hpp"

namespace scitikz::imgmetrics {

ContentBox content_box(const RasterImage& gray, double background_threshold) {
  ContentBox box{gray.width, gray.height, 0, 0, false};
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      if (gray.at(x, y) < background_threshold) {
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x + 1);
        box.y1 = std::max(box.y1, y + 1);
        box.found = true;
      }
    }
  }
  if (!box.found) box = ContentBox{};
  return box;
}

namespace {

RasterImage crop(const RasterImage& img, const ContentBox& box) {
  RasterImage out(box.x1 - box.x0, box.y1 - box.y0, Channels::gray, img.dpi);
  for (int y = box.y0; y < box.y1; ++y) {
    std::copy_n(&img.pixels[static_cast<std::size_t>(y) * img.width + box.x0], out.width,
                &out.pixels[static_cast<std::size_t>(y - box.y0) * out.width]);
  }
  return out;
}

RasterImage center_pad(const RasterImage& img, int width, int height) {
  RasterImage out(width, height, Channels::gray, img.dpi, 1.0f);
  const int ox = (width - img.width) / 2;
  const int oy = (height - img.height) / 2;
  for (int y = 0; y < img.height; ++y) {
    std::copy_n(&img.pixels[static_cast<std::size_t>(y) * img.width], img.width,
                &out.pixels[static_cast<std::size_t>(y + oy) * width + ox]);
  }
  return out;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) k[i] = std::exp(-((i - c) * (i - c)) / (2 * sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= sum;
  return k;
}

// Separable "valid" correlation of a w x h plane with kernel k.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

double ssim_term(double mx, double my, double vx, double vy, double cxy, double c1, double c2) {
  return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace

AlignedPair trim_and_align(const RasterImage& a, const RasterImage& b, double background_threshold,
                           double border_pt) {
  if (a.empty() || b.empty()) throw EmptyContent("trim_and_align: empty image");
  const RasterImage ga = to_gray(a), gb = to_gray(b);
  const ContentBox ba = content_box(ga, background_threshold);
  const ContentBox bb = content_box(gb, background_threshold);
  if (!ba.found) throw EmptyContent("trim_and_align: first image has no content");
  if (!bb.found) throw EmptyContent("trim_and_align: second image has no content");
  const RasterImage ca = crop(ga, ba), cb = crop(gb, bb);
  const int w = std::max(ca.width, cb.width);
  const int h = std::max(ca.height, cb.height);
  return AlignedPair{center_pad(ca, w, h), center_pad(cb, w, h), border_pt};
}

double ssim(const AlignedPair& pair, const SsimParams& p) {
  const RasterImage& a = pair.a;
  const RasterImage& b = pair.b;
  if (a.width != b.width || a.height != b.height || a.channels != Channels::gray || b.channels != Channels::gray) {
    throw std::invalid_argument("ssim: pair must be aligned grayscale images");
  }
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (n == 0) throw std::invalid_argument("ssim: empty images");

  if (w < p.window || h < p.window) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += a.pixels[i];
      my += b.pixels[i];
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, cxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = a.pixels[i] - mx, dy = b.pixels[i] - my;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
    return ssim_term(mx, my, vx / n, vy / n, cxy / n, c1, c2);
  }

  std::vector<double> x(a.pixels.begin(), a.pixels.end());
  std::vector<double> y(b.pixels.begin(), b.pixels.end());
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto k = gaussian_kernel(p.window, p.sigma);
  const auto mx = filter_valid(x, w, h, k);
  const auto my = filter_valid(y, w, h, k);
  const auto exx = filter_valid(xx, w, h, k);
  const auto eyy = filter_valid(yy, w, h, k);
  const auto exy = filter_valid(xy, w, h, k);

  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = exx[i] - mx[i] * mx[i];
    const double vy = eyy[i] - my[i] * my[i];
    const double cxy = exy[i] - mx[i] * my[i];
    total += ssim_term(mx[i], my[i], vx, vy, cxy, c1, c2);
  }
  return total / static_cast<double>(mx.size());
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: vectors differ in length");
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) throw ZeroVector("cosine: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double map_unit(double s_raw) { return (s_raw + 1.0) / 2.0; }

double hinge_semantic(double s_raw, double tau_hold) {
  if (!(tau_hold >= 0.0 && tau_hold < 1.0)) throw InvalidThreshold("hinge_semantic: tau_hold must lie in [0, 1)");
  return std::max(0.0, s_raw - tau_hold) / (1.0 - tau_hold);
}

double struct_from_distance(double d, double tau_temp) {
  if (!(tau_temp > 0)) throw std::invalid_argument("struct_from_distance: tau_temp must be positive");
  if (d < 0) throw std::invalid_argument("struct_from_distance: distance must be non-negative");
  return std::exp(-d / tau_temp);
}

std::vector<double> fallback_embedding(const RasterImage& img) {
  if (img.empty()) throw std::invalid_argument("fallback_embedding: empty image");
  const RasterImage g = to_gray(img);
  constexpr int grid = kFallbackGrid;

  // Length of the overlap between pixel i and each grid cell it touches.
  auto overlaps = [](int len) {
    std::vector<std::vector<std::pair<int, double>>> out(static_cast<std::size_t>(len));
    const double cell = static_cast<double>(len) / grid;
    for (int i = 0; i < len; ++i) {
      const int first = std::min(grid - 1, static_cast<int>(std::floor(i / cell)));
      for (int j = first; j < grid && j * cell < i + 1; ++j) {
        const double w = std::min<double>(i + 1, (j + 1) * cell) - std::max<double>(i, j * cell);
        if (w > 0) out[i].emplace_back(j, w);
      }
    }
    return out;
  };
  const auto ox = overlaps(g.width);
  const auto oy = overlaps(g.height);

  std::vector<double> acc(grid * grid, 0.0);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const double v = g.at(x, y);
      for (const auto& [cy, wy] : oy[y]) {
        for (const auto& [cx, wx] : ox[x]) {
          acc[cy * grid + cx] += v * wx * wy;
        }
      }
    }
  }
  const double area = (static_cast<double>(g.width) / grid) * (static_cast<double>(g.height) / grid);
  for (auto& v : acc) v /= area;
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
  double spread = 0;
  for (auto& v : acc) {
    v -= mean;
    spread = std::max(spread, std::abs(v));
  }
  // Constant images must map to the exact zero vector despite rounding in
  // the fractional cell weights.
  if (spread < 1e-12) std::fill(acc.begin(), acc.end(), 0.0);
  return acc;
}

double fallback_perceptual_distance(const AlignedPair& pair) {
  if (pair.a.pixels.size() != pair.b.pixels.size()) {
    throw std::invalid_argument("fallback_perceptual_distance: pair is not aligned");
  }
  if (pair.a.pixels.empty()) return 0.0;
  double s = 0;
  for (std::size_t i = 0; i < pair.a.pixels.size(); ++i) s += std::abs(double(pair.a.pixels[i]) - pair.b.pixels[i]);
  return s / static_cast<double>(pair.a.pixels.size());
}

}  // namespace scitikz::imgmetrics
