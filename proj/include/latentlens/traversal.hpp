#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "latentlens/dataset.hpp"
#include "latentlens/tinyvae.hpp"

namespace latentlens {

struct TraversalSpec {
  LatentVector base;
  int dim_index = 0;
  double low = -3.0;
  double high = 3.0;
  double step = 0.6;

  void validate() const;
};

struct TraversalSequence {
  TraversalSpec spec;
  std::vector<double> assigned_values;
  std::vector<ImageSample> frames;
  std::string sequence_id;
  std::string model;
  std::uint64_t seed = 0;
};

// low, low+step, ... with `high` included when it lies within 1e-9 of a
// lattice point. Values are computed as low + j*step to avoid drift.
std::vector<double> traversal_values(double low, double high, double step);

LatentVector sample_base_latent(std::uint64_t seed, int latent_dim);

// The latent inputs used for each frame of a traversal.
std::vector<LatentVector> traversal_latents(const TraversalSpec& spec);

TraversalSequence generate_sequence(const VaeParameters& params, const TraversalSpec& spec);

struct GridOptions {
  double low = -3.0;
  double high = 3.0;
  double step = 0.6;
  // Draw a fresh base latent for every dimension instead of sharing one.
  bool resample_per_dim = false;
};

std::string make_sequence_id(const std::string& model, std::uint64_t seed, int dim_index);

// One sequence per latent dimension, decoded in parallel and assembled in
// dimension order.
std::vector<TraversalSequence> generate_grid(const VaeParameters& params, std::uint64_t seed,
                                             const std::string& model_name,
                                             const GridOptions& options = {});

// Frames side by side in ascending assigned value, separated by white columns.
ImageSample compose_strip(const TraversalSequence& sequence, int separator_px = 2);

nlohmann::json sequence_metadata(const TraversalSequence& sequence,
                                 const std::vector<std::string>& image_refs);

}  // namespace latentlens
