#include <doctest.h>

#include <string>

#include "latentlens/error.hpp"
#include "latentlens/imgcodec.hpp"
#include "latentlens/rng.hpp"
#include "oracles.hpp"

using namespace latentlens;

namespace {

ImageSample random_image(int h, int w, std::uint64_t seed) {
  SplitMix64 g(seed);
  ImageSample img(h, w);
  for (auto& v : img.pixels) v = g.uniform();
  return img;
}

// Minimal P5 reader for the round-trip check.
std::vector<std::uint8_t> pgm_pixels(const std::vector<std::uint8_t>& bytes, int& w, int& h) {
  const std::string s(bytes.begin(), bytes.end());
  int maxval = 0, consumed = 0;
  REQUIRE(std::sscanf(s.c_str(), "P5 %d %d %d%n", &w, &h, &maxval, &consumed) == 3);
  REQUIRE(maxval == 255);
  return {bytes.begin() + consumed + 1, bytes.end()};
}

}  // namespace

TEST_SUITE("imgcodec") {
  TEST_CASE("quantization rounds halves away from zero") {
    CHECK(quantize(0.0) == 0);
    CHECK(quantize(1.0) == 255);
    CHECK(quantize(0.5) == 128);
    CHECK(quantize(127.4 / 255) == 127);
  }

  TEST_CASE("pgm bytes") {
    const auto one = encode_pgm(ImageSample(1, 1, 1.0));
    CHECK(std::string(one.bytes.begin(), one.bytes.end()) == std::string("P5\n1 1\n255\n\xFF"));
    ImageSample two(1, 2);
    two.pixels = {0.0, 0.5};
    const auto b = encode_pgm(two).bytes;
    CHECK(b[b.size() - 2] == 0x00);
    CHECK(b.back() == 0x80);
    const auto img = random_image(5, 7, 3);
    int w = 0, h = 0;
    const auto px = pgm_pixels(encode_pgm(img).bytes, w, h);
    CHECK(w == 7);
    CHECK(h == 5);
    for (std::size_t i = 0; i < px.size(); ++i) {
      CHECK(std::abs(px[i] / 255.0 - img.pixels[i]) <= 0.5 / 255 + 1e-12);
    }
  }

  TEST_CASE("checksums agree with zlib") {
    CHECK(crc32(std::vector<std::uint8_t>{'I', 'E', 'N', 'D'}) == 0xAE426082u);
    CHECK(adler32(std::vector<std::uint8_t>{0, 0}) == 0x00020001u);
    SplitMix64 g(8);
    for (int t = 0; t < 50; ++t) {
      std::vector<std::uint8_t> data(g.below(70000));
      for (auto& b : data) b = static_cast<std::uint8_t>(g());
      CHECK(crc32(data) == oracle::zlib_crc32(data));
      CHECK(adler32(data) == oracle::zlib_adler32(data));
    }
  }

  TEST_CASE("png output is decoded pixel-exactly by libpng") {
    for (auto [h, w] : std::vector<std::pair<int, int>>{{1, 1}, {3, 5}, {64, 724}, {300, 260}}) {
      const auto img = random_image(h, w, static_cast<std::uint64_t>(h * 1000 + w));
      const auto png = encode_png(img);
      CHECK(png.width == w);
      CHECK(png.height == h);
      REQUIRE(png.bytes.size() > 8);
      CHECK(std::vector<std::uint8_t>(png.bytes.begin(), png.bytes.begin() + 8) ==
            std::vector<std::uint8_t>{0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A});
      CHECK(std::vector<std::uint8_t>(png.bytes.end() - 4, png.bytes.end()) ==
            std::vector<std::uint8_t>{0xAE, 0x42, 0x60, 0x82});
      const auto dec = oracle::decode_png(png.bytes);
      CHECK(dec.width == w);
      CHECK(dec.height == h);
      int wp = 0, hp = 0;
      CHECK(dec.gray == pgm_pixels(encode_pgm(img).bytes, wp, hp));
    }
  }

  TEST_CASE("oversized images are refused") {
    CHECK_THROWS_AS(encode_png(ImageSample(1, 65537)), Error);
  }

  TEST_CASE("base64") {
    const std::string s = "any carnal pleas";
    CHECK(base64_encode(std::vector<std::uint8_t>(s.begin(), s.end())) == "YW55IGNhcm5hbCBwbGVhcw==");
    CHECK(base64_encode(std::vector<std::uint8_t>{'f', 'o'}) == "Zm8=");
    CHECK(base64_encode(std::vector<std::uint8_t>{}) == "");
  }
}
