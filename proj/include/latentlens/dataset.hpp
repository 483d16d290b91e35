#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <span>
#include <vector>

namespace latentlens {

// Row-major grayscale image with intensities in [0, 1].
struct ImageSample {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  ImageSample() = default;
  ImageSample(int h, int w, double fill = 0.0);

  double& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::size_t size() const { return pixels.size(); }

  // Throws InvalidArgument if the shape or any intensity is out of contract.
  void validate() const;

  friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

enum class Shape : std::uint8_t { Square = 0, Ellipse = 1, Heart = 2 };

constexpr int kScaleValues = 6;
constexpr int kRotationValues = 40;
constexpr int kPositionValues = 32;

struct FactorAssignment {
  Shape shape = Shape::Square;
  int scale_index = 0;     // [0, 5]
  int rotation_index = 0;  // [0, 39]
  int pos_x_index = 0;     // [0, 31]
  int pos_y_index = 0;     // [0, 31]

  void validate() const;
  friend bool operator==(const FactorAssignment&, const FactorAssignment&) = default;
};

struct ImageDataset {
  std::vector<ImageSample> samples;
  std::optional<std::vector<FactorAssignment>> factors;
  std::optional<std::vector<int>> labels;

  std::size_t size() const { return samples.size(); }
  void validate() const;
};

// Rasterizes one sprite with 4x4 supersampling. Deterministic.
ImageSample render_shape(const FactorAssignment& factors, int side = 64);

// Factors drawn uniformly and independently per index from a seeded generator.
ImageDataset generate_shapes_dataset(std::size_t count, int side, std::uint64_t seed);

// IDX3 image payload (magic 0x00000803). Labels are left empty.
ImageDataset load_idx_images(std::span<const std::uint8_t> bytes);

// IDX1 label payload (magic 0x00000801); every label must be a digit 0-9.
std::vector<int> load_idx_labels(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> write_idx_images(const ImageDataset& dataset);
std::vector<std::uint8_t> write_idx_labels(std::span<const int> labels);

// Seeded permutation of [0, n) cut into consecutive batches; the final short
// batch is kept.
std::vector<std::vector<std::size_t>> minibatches(std::size_t dataset_size, std::size_t batch_size,
                                                  std::uint64_t seed);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

}  // namespace latentlens
