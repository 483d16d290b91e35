#include "latentlens/traversal.hpp"

#include <cmath>
#include <cstdio>
#include <future>

#include "latentlens/error.hpp"
#include "latentlens/rng.hpp"

namespace latentlens {

void TraversalSpec::validate() const {
  if (!(low < high) || !(step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "traversal needs low < high and step > 0");
  }
  for (double v : base.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite base latent");
  }
  if (dim_index < 0 || dim_index >= static_cast<int>(base.size())) {
    throw Error(ErrorCode::DimensionMismatch, "dim_index outside the latent vector");
  }
}

std::vector<double> traversal_values(double low, double high, double step) {
  if (!(low < high) || !(step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "traversal needs low < high and step > 0");
  }
  constexpr double kEndpointTol = 1e-9;
  const auto count = static_cast<long>(std::floor((high - low) / step + kEndpointTol)) + 1;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(count));
  for (long j = 0; j < count; ++j) {
    double v = low + static_cast<double>(j) * step;
    if (std::abs(v - high) <= kEndpointTol) v = high;
    // Snap to a 1e-12 grid so decimal steps reproduce their literal values
    // (-3 + 0.6 is otherwise one ulp away from -2.4).
    v = std::round(v * 1e12) / 1e12;
    values.push_back(v);
  }
  return values;
}

LatentVector sample_base_latent(std::uint64_t seed, int latent_dim) {
  if (latent_dim < 1) throw Error(ErrorCode::InvalidArgument, "latent_dim must be >= 1");
  SplitMix64 rng(seed);
  LatentVector z;
  z.values.resize(static_cast<std::size_t>(latent_dim));
  for (double& v : z.values) v = rng.normal();
  return z;
}

std::vector<LatentVector> traversal_latents(const TraversalSpec& spec) {
  spec.validate();
  std::vector<LatentVector> out;
  for (double v : traversal_values(spec.low, spec.high, spec.step)) {
    LatentVector z = spec.base;
    z.values[static_cast<std::size_t>(spec.dim_index)] = v;
    out.push_back(std::move(z));
  }
  return out;
}

TraversalSequence generate_sequence(const VaeParameters& params, const TraversalSpec& spec) {
  if (static_cast<int>(spec.base.size()) != params.latent_dim) {
    throw Error(ErrorCode::DimensionMismatch, "base latent length differs from latent_dim");
  }
  TraversalSequence seq;
  seq.spec = spec;
  seq.assigned_values = traversal_values(spec.low, spec.high, spec.step);
  for (const auto& z : traversal_latents(spec)) seq.frames.push_back(decode(params, z));
  return seq;
}

std::string make_sequence_id(const std::string& model, std::uint64_t seed, int dim_index) {
  return model + "-s" + std::to_string(seed) + "-z" + std::to_string(dim_index);
}

std::vector<TraversalSequence> generate_grid(const VaeParameters& params, std::uint64_t seed,
                                             const std::string& model_name,
                                             const GridOptions& options) {
  params.validate();
  const int m = params.latent_dim;
  const LatentVector shared = sample_base_latent(seed, m);
  std::vector<std::future<TraversalSequence>> jobs;
  for (int d = 0; d < m; ++d) {
    TraversalSpec spec;
    spec.base = options.resample_per_dim
                    ? sample_base_latent(derive_seed(seed, static_cast<std::uint64_t>(d)), m)
                    : shared;
    spec.dim_index = d;
    spec.low = options.low;
    spec.high = options.high;
    spec.step = options.step;
    jobs.push_back(std::async(std::launch::async, [&params, spec] {
      return generate_sequence(params, spec);
    }));
  }
  std::vector<TraversalSequence> grid;
  for (int d = 0; d < m; ++d) {
    TraversalSequence seq = jobs[static_cast<std::size_t>(d)].get();
    seq.model = model_name;
    seq.seed = seed;
    seq.sequence_id = make_sequence_id(model_name, seed, d);
    grid.push_back(std::move(seq));
  }
  return grid;
}

ImageSample compose_strip(const TraversalSequence& sequence, int separator_px) {
  if (sequence.frames.empty()) throw Error(ErrorCode::InvalidArgument, "sequence has no frames");
  if (separator_px < 0) throw Error(ErrorCode::InvalidArgument, "negative separator");
  const int h = sequence.frames.front().height;
  const int w = sequence.frames.front().width;
  for (const auto& f : sequence.frames) {
    if (f.height != h || f.width != w) throw Error(ErrorCode::SizeMismatch, "frame sizes differ");
  }
  const int k = static_cast<int>(sequence.frames.size());
  ImageSample strip(h, k * w + (k - 1) * separator_px, 1.0);
  for (int j = 0; j < k; ++j) {
    const int x0 = j * (w + separator_px);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) strip.at(r, x0 + c) = sequence.frames[j].at(r, c);
    }
  }
  return strip;
}

nlohmann::json sequence_metadata(const TraversalSequence& sequence,
                                 const std::vector<std::string>& image_refs) {
  return {{"sequence_id", sequence.sequence_id},
          {"model", sequence.model},
          {"seed", sequence.seed},
          {"dim_index", sequence.spec.dim_index},
          {"values", sequence.assigned_values},
          {"image_refs", image_refs}};
}

}  // namespace latentlens
