#include "scitikz/raster.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "scitikz/error.hpp"

namespace scitikz {

RasterImage::RasterImage(int w, int h, Channels ch, double dpi_, float fill)
    : width(w), height(h), channels(ch), dpi(dpi_),
      pixels(static_cast<std::size_t>(w) * h * static_cast<int>(ch), fill) {}

bool RasterImage::valid() const noexcept {
  return width >= 0 && height >= 0 && dpi > 0 &&
         pixels.size() == static_cast<std::size_t>(width) * height * channel_count();
}

RasterImage to_gray(const RasterImage& img) {
  if (img.channels == Channels::gray) return img;
  RasterImage out(img.width, img.height, Channels::gray, img.dpi);
  for (std::size_t i = 0, n = static_cast<std::size_t>(img.width) * img.height; i < n; ++i) {
    const float r = img.pixels[3 * i], g = img.pixels[3 * i + 1], b = img.pixels[3 * i + 2];
    out.pixels[i] = std::clamp(0.299f * r + 0.587f * g + 0.114f * b, 0.0f, 1.0f);
  }
  return out;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RenderFailed("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

// Reads the next whitespace-delimited header integer, skipping # comments.
long pnm_header_int(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++pos;
    } else {
      break;
    }
  }
  long value = 0;
  bool any = false;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos++] - '0');
    any = true;
    if (value > (1L << 30)) throw RenderFailed("PNM header value out of range");
  }
  if (!any) throw RenderFailed("malformed PNM header");
  return value;
}

}  // namespace

RasterImage decode_pnm(std::string_view bytes, double dpi) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw RenderFailed("not a binary PGM/PPM image");
  }
  const Channels ch = bytes[1] == '5' ? Channels::gray : Channels::rgb;
  std::size_t pos = 2;
  const long w = pnm_header_int(bytes, pos);
  const long h = pnm_header_int(bytes, pos);
  const long maxval = pnm_header_int(bytes, pos);
  if (maxval <= 0 || maxval > 65535) throw RenderFailed("unsupported PNM maxval");
  ++pos;  // single whitespace byte after maxval

  RasterImage img(static_cast<int>(w), static_cast<int>(h), ch, dpi);
  const std::size_t samples = img.pixels.size();
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  if (bytes.size() < pos + samples * bytes_per_sample) throw RenderFailed("truncated PNM data");
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  const float scale = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < samples; ++i) {
    const unsigned v = bytes_per_sample == 2 ? (data[2 * i] << 8) | data[2 * i + 1] : data[i];
    img.pixels[i] = static_cast<float>(v) * scale;
  }
  return img;
}

RasterImage read_pnm(const std::filesystem::path& path, double dpi) {
  return decode_pnm(slurp(path), dpi);
}

std::string encode_png(const RasterImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == Channels::gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  std::vector<unsigned char> buffer(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), buffer.begin(), [](float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  });

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, buffer.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, buffer.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

RasterImage decode_png(std::string_view bytes, double dpi) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw RenderFailed(std::string("PNG decode failed: ") + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&image, &white, buffer.data(), 0, nullptr)) {
    throw RenderFailed(std::string("PNG decode failed: ") + image.message);
  }
  RasterImage img(static_cast<int>(image.width), static_cast<int>(image.height),
                  gray ? Channels::gray : Channels::rgb, dpi);
  std::transform(buffer.begin(), buffer.end(), img.pixels.begin(),
                 [](unsigned char v) { return static_cast<float>(v) / 255.0f; });
  return img;
}

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  const std::string bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EnvironmentError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (c != '\n' && c != '\r' && c != ' ') clean.push_back(c);
  }
  if (clean.size() % 4 != 0) throw Error("base64 input length is not a multiple of 4");
  std::string out(3 * clean.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0) throw Error("invalid base64 input");
  std::size_t padding = 0;
  if (!clean.empty() && clean.back() == '=') ++padding;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

}  // namespace scitikz
