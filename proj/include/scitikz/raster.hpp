#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scitikz {

enum class Channels { gray = 1, rgb = 3 };

/// Row-major raster with intensities in [0, 1]. RGB pixels are interleaved.
struct RasterImage {
  int width = 0;
  int height = 0;
  Channels channels = Channels::gray;
  double dpi = 72.0;
  std::vector<float> pixels;

  RasterImage() = default;
  RasterImage(int w, int h, Channels ch, double dpi_, float fill = 1.0f);

  int channel_count() const noexcept { return static_cast<int>(channels); }
  bool empty() const noexcept { return width == 0 || height == 0; }
  /// width * height * channels == pixels.size() and dpi > 0
  bool valid() const noexcept;

  float at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channel_count() + c];
  }
  float& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channel_count() + c];
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

/// Rec. 601 luma; gray images are returned unchanged.
RasterImage to_gray(const RasterImage& img);

/// Binary PGM (P5) or PPM (P6), 8 or 16 bit.
RasterImage decode_pnm(std::string_view bytes, double dpi);
RasterImage read_pnm(const std::filesystem::path& path, double dpi);

/// 8-bit PNG (gray or RGB). Alpha in decoded PNGs is flattened onto white.
std::string encode_png(const RasterImage& img);
RasterImage decode_png(std::string_view bytes, double dpi = 72.0);
void write_png(const RasterImage& img, const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace scitikz
