#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latentlens/dataset.hpp"

namespace latentlens {

enum class ImageFormat { Pgm, Png };

struct EncodedImage {
  std::vector<std::uint8_t> bytes;
  ImageFormat format = ImageFormat::Png;
  int width = 0;
  int height = 0;
};

// round(v * 255) with halves away from zero.
std::uint8_t quantize(double v);

EncodedImage encode_pgm(const ImageSample& image);

// 8-bit grayscale PNG with stored (uncompressed) deflate blocks.
EncodedImage encode_png(const ImageSample& image);

std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t crc = 0);
std::uint32_t adler32(std::span<const std::uint8_t> data, std::uint32_t adler = 1);

std::string base64_encode(std::span<const std::uint8_t> data);

void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace latentlens
