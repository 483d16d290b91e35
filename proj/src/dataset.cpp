#include "latentlens/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <string>

#include "latentlens/error.hpp"
#include "latentlens/rng.hpp"

namespace latentlens {

ImageSample::ImageSample(int h, int w, double fill)
    : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

void ImageSample::validate() const {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  }
  if (pixels.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::SizeMismatch, "pixel count does not match height*width");
  }
  for (double v : pixels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "pixel intensity outside [0,1]");
    }
  }
}

void FactorAssignment::validate() const {
  const auto in = [](int v, int n) { return v >= 0 && v < n; };
  if (static_cast<int>(shape) > 2 || !in(scale_index, kScaleValues) ||
      !in(rotation_index, kRotationValues) || !in(pos_x_index, kPositionValues) ||
      !in(pos_y_index, kPositionValues)) {
    throw Error(ErrorCode::InvalidArgument, "factor index out of range");
  }
}

void ImageDataset::validate() const {
  if (factors && factors->size() != samples.size()) {
    throw Error(ErrorCode::LengthMismatch, "factors list length differs from samples");
  }
  if (labels && labels->size() != samples.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels list length differs from samples");
  }
  for (const auto& s : samples) {
    if (s.height != samples.front().height || s.width != samples.front().width) {
      throw Error(ErrorCode::SizeMismatch, "dataset mixes image sizes");
    }
  }
}

namespace {

// Inside test in the shape's canonical frame, coordinates scaled so the
// half-width is 1.
bool inside_canonical(Shape shape, double u, double v) {
  switch (shape) {
    case Shape::Square:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case Shape::Ellipse:
      // Aspect 1:0.6 so rotation is visible.
      return u * u + (v * v) / 0.36 <= 1.0;
    case Shape::Heart: {
      // (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0 spans roughly x in [-1.14, 1.14] and
      // y in [-1, 1.25]; shrink so the half-width is about 1.
      const double x = u * 1.14;
      const double y = -v * 1.14 + 0.1;  // image rows grow downward
      const double a = x * x + y * y - 1.0;
      return a * a * a - x * x * y * y * y <= 0.0;
    }
  }
  return false;
}

}  // namespace

ImageSample render_shape(const FactorAssignment& factors, int side) {
  factors.validate();
  if (side < 16) {
    throw Error(ErrorCode::InvalidArgument, "render_shape requires side >= 16");
  }
  const double s = static_cast<double>(side);
  const double half_width = s * (0.1 + 0.2 * factors.scale_index / (kScaleValues - 1));
  const double angle = 2.0 * std::numbers::pi * factors.rotation_index / kRotationValues;
  const double cx = s * (0.15 + 0.7 * factors.pos_x_index / (kPositionValues - 1));
  const double cy = s * (0.15 + 0.7 * factors.pos_y_index / (kPositionValues - 1));
  const double cos_a = std::cos(angle);
  const double sin_a = std::sin(angle);

  constexpr int kSuper = 4;
  ImageSample img(side, side, 0.0);
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = col + (sx + 0.5) / kSuper - cx;
          const double py = row + (sy + 0.5) / kSuper - cy;
          // Rotate the sample point into the shape frame.
          const double u = (cos_a * px + sin_a * py) / half_width;
          const double v = (-sin_a * px + cos_a * py) / half_width;
          hits += inside_canonical(factors.shape, u, v) ? 1 : 0;
        }
      }
      img.at(row, col) = static_cast<double>(hits) / (kSuper * kSuper);
    }
  }
  return img;
}

ImageDataset generate_shapes_dataset(std::size_t count, int side, std::uint64_t seed) {
  if (count == 0) {
    throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  }
  SplitMix64 rng(seed);
  ImageDataset ds;
  ds.factors.emplace();
  ds.samples.reserve(count);
  ds.factors->reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    FactorAssignment f;
    f.shape = static_cast<Shape>(rng.below(3));
    f.scale_index = static_cast<int>(rng.below(kScaleValues));
    f.rotation_index = static_cast<int>(rng.below(kRotationValues));
    f.pos_x_index = static_cast<int>(rng.below(kPositionValues));
    f.pos_y_index = static_cast<int>(rng.below(kPositionValues));
    ds.samples.push_back(render_shape(f, side));
    ds.factors->push_back(f);
  }
  return ds;
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void check_magic(std::span<const std::uint8_t> bytes, std::uint8_t type_code, std::size_t header) {
  if (bytes.size() < 4 || bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 ||
      bytes[3] != type_code) {
    throw Error(ErrorCode::BadMagic, "unexpected IDX magic");
  }
  if (bytes.size() < header) {
    throw Error(ErrorCode::TruncatedPayload, "IDX header incomplete");
  }
}

}  // namespace

ImageDataset load_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, 0x03, 16);
  const std::uint64_t count = read_be32(bytes, 4);
  const std::uint64_t rows = read_be32(bytes, 8);
  const std::uint64_t cols = read_be32(bytes, 12);
  if (count > 0 && (rows == 0 || cols == 0)) {
    throw Error(ErrorCode::InvalidArgument, "IDX images with zero rows or cols");
  }
  const std::uint64_t per_image = rows * cols;
  if (bytes.size() - 16 < count * per_image) {
    throw Error(ErrorCode::TruncatedPayload, "IDX declares " + std::to_string(count) +
                                                 " images but payload is short");
  }
  ImageDataset ds;
  ds.samples.reserve(count);
  std::size_t offset = 16;
  for (std::uint64_t i = 0; i < count; ++i) {
    ImageSample img(static_cast<int>(rows), static_cast<int>(cols));
    for (std::uint64_t p = 0; p < per_image; ++p) {
      img.pixels[p] = bytes[offset++] / 255.0;
    }
    ds.samples.push_back(std::move(img));
  }
  return ds;
}

std::vector<int> load_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, 0x01, 8);
  const std::uint64_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) {
    throw Error(ErrorCode::TruncatedPayload, "IDX label payload is short");
  }
  std::vector<int> labels;
  labels.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const int v = bytes[8 + i];
    if (v > 9) {
      throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(v) + " at index " +
                                                  std::to_string(i));
    }
    labels.push_back(v);
  }
  return labels;
}

std::vector<std::uint8_t> write_idx_images(const ImageDataset& dataset) {
  std::vector<std::uint8_t> out = {0, 0, 0x08, 0x03};
  const int rows = dataset.samples.empty() ? 0 : dataset.samples.front().height;
  const int cols = dataset.samples.empty() ? 0 : dataset.samples.front().width;
  write_be32(out, static_cast<std::uint32_t>(dataset.samples.size()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (const auto& s : dataset.samples) {
    for (double v : s.pixels) {
      out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
  return out;
}

std::vector<std::uint8_t> write_idx_labels(std::span<const int> labels) {
  std::vector<std::uint8_t> out = {0, 0, 0x08, 0x01};
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int v : labels) out.push_back(static_cast<std::uint8_t>(v));
  return out;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t dataset_size, std::size_t batch_size,
                                                  std::uint64_t seed) {
  if (batch_size == 0 || batch_size > dataset_size) {
    throw Error(ErrorCode::InvalidArgument, "batch_size must be in [1, dataset size]");
  }
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  // Fisher-Yates with the portable generator.
  for (std::size_t i = dataset_size; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < dataset_size; start += batch_size) {
    const std::size_t end = std::min(dataset_size, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open " + path);
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace latentlens
