#include <doctest.h>

#include "scitikz/error.hpp"
#include "scitikz/raster.hpp"
#include "support.hpp"

using namespace scitikz;

TEST_SUITE("raster") {

TEST_CASE("png round trip keeps 8-bit intensities") {
  RasterImage img(5, 3, Channels::gray, 300.0);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x) img.at(x, y) = static_cast<float>((x * 50 + y * 20) % 256) / 255.0f;
  const auto back = decode_png(encode_png(img), 300.0);
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 3);
  CHECK(back.channels == Channels::gray);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-6));
}

TEST_CASE("pnm decoding") {
  const std::string pgm = std::string("P5\n2 1\n255\n") + '\x00' + '\xff';
  const auto g = decode_pnm(pgm, 72.0);
  CHECK(g.width == 2);
  CHECK(g.pixels == std::vector<float>{0.0f, 1.0f});
  const std::string ppm = std::string("P6\n1 1\n255\n") + '\xff' + '\x00' + '\x00';
  const auto c = decode_pnm(ppm, 72.0);
  CHECK(c.channels == Channels::rgb);
  // Rec. 601 luma of pure red
  CHECK(to_gray(c).pixels[0] == doctest::Approx(0.299).epsilon(1e-6));
  CHECK_THROWS_AS(decode_pnm("P5\n2 2\n255\n", 72.0), Error);
}

TEST_CASE("raster invariants") {
  RasterImage img(4, 2, Channels::rgb, 300.0);
  CHECK(img.valid());
  CHECK(img.pixels.size() == 4u * 2u * 3u);
  img.pixels.pop_back();
  CHECK_FALSE(img.valid());
}

}  // TEST_SUITE
