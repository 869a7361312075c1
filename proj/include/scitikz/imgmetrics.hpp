#pragma once

// Image-side scores. Every function here is pure.

#include <span>
#include <vector>

#include "scitikz/raster.hpp"

namespace scitikz::imgmetrics {

/// Two grayscale images of identical dimensions on a common canvas.
struct AlignedPair {
  RasterImage a;
  RasterImage b;
  double border_pt = 10.0;
};

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

struct VisualScores {
  double s_raw = 0.0;        // cosine in [-1, 1]
  double s_sem = 0.0;        // hinge-scaled, [0, 1]
  double s_struct = 1.0;     // exp kernel of d_perceptual, (0, 1]
  double ssim = 0.0;         // [-1, 1]
  double d_perceptual = 0.0;
};

/// Crops both images to their content boxes (pixels darker than
/// `background_threshold` on a white background) and center-pads them with
/// white to the elementwise maximum size. Throws EmptyContent.
AlignedPair trim_and_align(const RasterImage& a, const RasterImage& b, double background_threshold = 0.99,
                           double border_pt = 10.0);

/// Bounding box of content pixels; nullopt-equivalent {0,0,0,0} with
/// `found == false` when the image is all background.
struct ContentBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  bool found = false;
};
ContentBox content_box(const RasterImage& gray, double background_threshold);

/// Mean local SSIM with a Gaussian window over the valid region. Images
/// smaller than the window fall back to a single global window.
double ssim(const AlignedPair& pair, const SsimParams& params = {});

/// Throws ZeroVector for an all-zero input and DimensionMismatch-style
/// std::invalid_argument for unequal lengths.
double cosine(std::span<const double> u, std::span<const double> v);

/// Reporting map from [-1, 1] to [0, 1].
double map_unit(double s_raw);

/// max(0, s_raw - tau_hold) / (1 - tau_hold). Throws InvalidThreshold unless
/// 0 <= tau_hold < 1.
double hinge_semantic(double s_raw, double tau_hold);

/// exp(-d / tau_temp).
double struct_from_distance(double d, double tau_temp);

inline constexpr int kFallbackGrid = 16;

/// 16x16 area-averaged grayscale thumbnail, mean-centered and flattened.
std::vector<double> fallback_embedding(const RasterImage& img);

/// Mean absolute pixel difference of an aligned pair, in [0, 1].
double fallback_perceptual_distance(const AlignedPair& pair);

}  // namespace scitikz::imgmetrics
